#pragma once

#include "hjbverify/hjb.hpp"
#include "hjbverify/problem.hpp"
#include "hjbverify/sde.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hjbv {

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;            // paths that entered the estimate
    int discarded_diverged = 0; // paths dropped because the state blew up
};

/// Mean and standard error (sample sd / sqrt(n)) of per-path samples, summed in order.
CostEstimate summarize(const std::vector<double>& samples);

/// Candidate value function v and its spatial gradient in the problem's own
/// sense. Either may return nullopt where the source has no data (outside a grid).
struct FieldSource {
    std::function<std::optional<double>(double t, const State& x)> value;
    std::function<std::optional<Covector>(double t, const State& x)> gradient;
    /// Grid spacing entering the discretization allowance; 0 for closed forms.
    double dx = 0.0;
    /// True when v is a closed-form solution or a grid field whose refinement ladder passed.
    bool strong_solution_proxy = false;
    std::string description;

    static FieldSource closed_form(std::function<double(double, const State&)> value,
                                   std::function<Covector(double, const State&)> gradient,
                                   std::string description = "closed form");
    /// Grid field: linear in x, piecewise constant from the left in t.
    static FieldSource grid(SpaceTimeField field, bool ladder_passed);
};

struct VerifyOptions {
    /// Replaces the computed tolerance entirely when set.
    std::optional<double> tolerance;
    double c_dx = 1.0;
    double c_dt = 1.0;
    /// Scan duality gaps at every (path, step) for the necessity check.
    bool necessity = false;
    /// Subtract the zero-mean Ito term int (dv/dx) B dW from each path's
    /// defect sample. Off: plain pairing of cost and gap on common paths.
    bool martingale_control_variate = true;
};

struct IdentityReport {
    double v_at_start = 0.0;
    CostEstimate cost;         // original sense
    /// Cost minus each path's Ito term (original sense, tail included for discounted
    /// problems): same expectation as cost + tail, lower variance.
    CostEstimate cost_control_variate;
    CostEstimate gap_integral; // canonical, nonnegative in expectation
    double identity_defect = 0.0;
    double tolerance_used = 0.0;
    bool passed = false;

    /// SE of the per-path defect sample (canonical cost - gap, minus the Ito
    /// term when the control variate is on) on common paths.
    double combined_std_error = 0.0;
    /// Mean of the canonical Ito term int (dv/dx) B dW; zero in expectation.
    double martingale_mean = 0.0;
    bool martingale_control_variate = false;
    double statistical_part = 0.0;
    double discretization_part = 0.0;
    int escaped_paths = 0;
    int projected_controls = 0;
    double dt = 0.0;

    /// Discounted problems: E[e^{-lambda T1} v(y(T1))] (original sense) and its bound.
    std::optional<CostEstimate> tail;
    std::optional<double> tail_bound;
    std::optional<double> sampled_sup_abs_v;
    std::optional<double> truncation_T1;

    /// Fraction of retained (path, step) points with gap > tol_gap (necessity mode).
    std::optional<double> necessity_violation_fraction;
    std::vector<std::string> notes;
};

enum class Verdict { optimal_within_tolerance, suboptimal, inconclusive };
const char* to_string(Verdict v);

struct Certificate {
    Verdict verdict = Verdict::inconclusive;
    double optimality_margin = 0.0;
    IdentityReport evidence;
    std::string lower_bound_note;
};

/// Monte Carlo estimate of J(t0, x0; policy) with left-endpoint quadrature of the
/// running cost plus phi(y(T)), or psi(tau, y(tau)) on exit. Original sign.
CostEstimate estimate_cost(const ControlProblem& problem, const ControlPolicy& policy, double t0, const State& x0,
                           const SimConfig& config);

/// E int (H_CV - H) ds along the policy's paths, canonical sign.
CostEstimate estimate_gap_integral(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy,
                                   double t0, const State& x0, const SimConfig& config);

/// J = v + E int (H_CV - H) ds checked on common paths (canonical sign).
IdentityReport fundamental_identity(const ControlProblem& problem, const FieldSource& field,
                                    const ControlPolicy& policy, double t0, const State& x0, const SimConfig& config,
                                    const VerifyOptions& options = {});

/// Three-valued verdict from an identity report.
Certificate certificate_from(IdentityReport report, bool strong_solution_proxy);

Certificate certify(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy, double t0,
                    const State& x0, const SimConfig& config, const VerifyOptions& options = {});

/// Identity over [0, T1] for a discounted problem, with the tail term
/// E[e^{-lambda T1} v(y(T1))] folded in and bounded by e^{-lambda T1} sup|v|.
IdentityReport discounted_verify(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy,
                                 const State& x0, double truncation_T1, const SimConfig& config,
                                 const VerifyOptions& options = {});

} // namespace hjbv
