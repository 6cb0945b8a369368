#pragma once

#include "hjbverify/problem.hpp"

#include <functional>
#include <memory>

namespace hjbv {

enum class HamiltonianMethod { closed_form, grid_refined };

/// Relative tolerance below which a duality gap counts as zero.
inline double gap_tolerance(double hamiltonian_value) {
    return 1e-9 * (1.0 + std::abs(hamiltonian_value));
}

/// Result of minimizing H_CV^0(t,x,p;.) over U. The covector p is canonical:
/// it is the gradient of the value function of the minimization form.
struct HamiltonianEval {
    double value = 0.0; // H^0(t,x,p)
    Control argmin;
    HamiltonianMethod method = HamiltonianMethod::grid_refined;
    /// Set when a rescan at doubled grid resolution finds a lower value
    /// (non-unimodal or discontinuous data: the value depends on the grid).
    bool scan_irregular = false;

    double tol_gap() const { return gap_tolerance(value); }
    /// H_CV^0(t,x,p;z) - H^0(t,x,p), unclamped.
    double gap_at(const Control& z) const;

    double t = 0.0;
    State x;
    Covector p;
    std::shared_ptr<const ControlProblem> problem;
};

/// Current-value and minimized Hamiltonians of the canonical form of a problem.
class Hamiltonian {
public:
    explicit Hamiltonian(const ControlProblem& problem);

    const ControlProblem& canonical() const { return *canonical_; }
    const ControlProblem& original() const { return *original_; }

    /// <F1(t,x,z), p> + l(t,x,z); throws DomainError if z is outside U.
    double current_value(double t, const State& x, const Covector& p, const Control& z) const;
    HamiltonianEval minimize(double t, const State& x, const Covector& p) const;
    /// Value and argmin only, without the bookkeeping of HamiltonianEval.
    HamiltonianPoint minimize_point(double t, const State& x, const Covector& p) const;
    /// Clamped duality gap: zero iff z attains the minimum within tol_gap.
    double duality_gap(double t, const State& x, const Covector& p, const Control& z) const;
    double unclamped_gap(double t, const State& x, const Covector& p, const Control& z) const;

private:
    HamiltonianPoint scan_box(double t, const State& x, const Covector& p, int resolution) const;

    std::shared_ptr<const ControlProblem> original_;
    std::shared_ptr<const ControlProblem> canonical_;
};

double current_value(const ControlProblem& problem, double t, const State& x, const Covector& p, const Control& z);
HamiltonianEval minimize(const ControlProblem& problem, double t, const State& x, const Covector& p);
double duality_gap(const ControlProblem& problem, double t, const State& x, const Covector& p, const Control& z);

/// Optimized Hamiltonian in the problem's own sense (sup for maximize problems),
/// evaluated at the gradient p of the original value function.
HamiltonianPoint optimized_hamiltonian(const ControlProblem& problem, double t, const State& x, const Covector& p);

using GradientField = std::function<Covector(double t, const State& x)>;
using FeedbackFn = std::function<Control(double t, const State& x)>;

/// (t,x) -> argmin of the Hamiltonian at the value gradient. The gradient is
/// that of the value function in the problem's own sense.
FeedbackFn feedback_map(const ControlProblem& problem, GradientField value_gradient);

} // namespace hjbv
