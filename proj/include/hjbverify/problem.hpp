#pragma once

#include "hjbverify/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hjbv {

enum class Sense { minimize, maximize };

struct BoxControls {
    Control lower;
    Control upper; // entries may be +inf
};

struct FiniteControls {
    std::vector<Control> points;
};

/// Control set U: a box (possibly unbounded above) or a finite list of points.
class ControlSet {
public:
    static ControlSet box(Control lower, Control upper, int grid_resolution = 64);
    static ControlSet finite(std::vector<Control> points);

    int dimension() const;
    bool is_box() const { return std::holds_alternative<BoxControls>(shape_); }
    const BoxControls& as_box() const { return std::get<BoxControls>(shape_); }
    const FiniteControls& as_finite() const { return std::get<FiniteControls>(shape_); }
    int grid_resolution() const { return grid_resolution_; }

    bool contains(const Control& z, double tol = 1e-12) const;
    /// Nearest point of U (Euclidean); boxes project componentwise.
    Control project(const Control& z) const;

private:
    std::variant<BoxControls, FiniteControls> shape_;
    int grid_resolution_ = 64;
};

/// Open box O = prod (lo_i, hi_i); a single axis is an interval.
class Domain {
public:
    static Domain interval(double a, double b);
    static Domain box(std::vector<std::pair<double, double>> axes);

    int dimension() const { return static_cast<int>(axes_.size()); }
    const std::vector<std::pair<double, double>>& axes() const { return axes_; }

    /// Negative inside, zero on the boundary, positive outside.
    double signed_distance(const State& x) const;
    /// Closest point of the boundary of O.
    State project_to_boundary(const State& x) const;
    State centroid() const;

private:
    std::vector<std::pair<double, double>> axes_;
};

struct FiniteHorizon {
    double T = 1.0;
};

struct DiscountedInfinite {
    double rate = 1.0;
};

using Horizon = std::variant<FiniteHorizon, DiscountedInfinite>;

/// Closed-form optimized Hamiltonian: value and optimizer, in the problem's own
/// sense (inf for minimize, sup for maximize).
struct HamiltonianPoint {
    double value = 0.0;
    Control argopt;
};

using DriftFn = std::function<State(double t, const State& x)>;
using ControlledDriftFn = std::function<State(double t, const State& x, const Control& z)>;
using DiffusionFn = std::function<Mat(double t, const State& x)>;
using RunningCostFn = std::function<double(double t, const State& x, const Control& z)>;
using TerminalCostFn = std::function<double(const State& x)>;
using BoundaryCostFn = std::function<double(double t, const State& x)>;
using ClosedFormHamiltonianFn = std::function<HamiltonianPoint(double t, const State& x, const Covector& p)>;

/// Full description of a controlled diffusion
///   dy = [F0(s,y) + F1(s,y,z)] ds + B(s,y) dW,
/// with running cost l, terminal cost phi (finite horizon), optional exit
/// domain with boundary cost psi, and discount rate for infinite horizon.
struct ControlProblem {
    std::string name;
    int dimension = 1;       // n
    int noise_dimension = 1; // m
    Horizon horizon = FiniteHorizon{};
    DriftFn drift_uncontrolled;
    ControlledDriftFn drift_controlled;
    DiffusionFn diffusion;
    RunningCostFn running_cost;
    TerminalCostFn terminal_cost;
    ControlSet control_set = ControlSet::finite({scalar_vec(0.0)});
    std::optional<Domain> domain;
    BoundaryCostFn boundary_cost;
    Sense sense = Sense::minimize;
    std::optional<ClosedFormHamiltonianFn> closed_form_hamiltonian;
    /// Known non-smooth points of the value function (1-D), excluded by grid gates.
    std::vector<double> kinks;

    int control_dimension() const { return control_set.dimension(); }
    bool finite_horizon() const { return std::holds_alternative<FiniteHorizon>(horizon); }
    double horizon_T() const;
    double discount_rate() const;
};

/// Canonical minimization form: maximize problems get l, phi, psi negated and
/// their closed-form Hamiltonian mapped to H_min(p) = -H_sup(-p).
ControlProblem canonicalize(const ControlProblem& problem);

/// +1 for minimize, -1 for maximize: canonical value = sign * original value.
inline double sense_sign(const ControlProblem& problem) {
    return problem.sense == Sense::minimize ? 1.0 : -1.0;
}

/// Checks structural invariants (dimensions, compatibility psi(T,.) = phi on
/// sampled boundary points). Throws DomainError on violation.
void validate(const ControlProblem& problem);

struct SampleRegion {
    double t_lo = 0.0;
    double t_hi = 0.0;
    State x_lo;
    State x_hi;
};

struct HypothesisReport {
    double lipschitz_F0_estimate = 0.0;
    double lipschitz_F1_estimate = 0.0;
    double ellipticity_lambda0_estimate = 0.0;
    double girsanov_sup_estimate = 0.0; // +inf when F1 leaves the range of B
    /// Set on infinite values, on 10x growth toward a region face, or on 10x sampled-sup growth over two decades.
    bool girsanov_unbounded = false;
    int samples_used = 0;
};

/// Sampled lower bounds on the constants of the standing hypotheses.
HypothesisReport probe_hypotheses(const ControlProblem& problem, int n_samples, std::uint64_t seed,
                                  const SampleRegion& region);

/// Representative finite box used when sampling controls from U.
BoxControls sampling_box(const ControlSet& set);

} // namespace hjbv
