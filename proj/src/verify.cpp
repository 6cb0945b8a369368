#include "hjbverify/verify.hpp"
#include "hjbverify/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace hjbv {

CostEstimate summarize(const std::vector<double>& samples) {
    CostEstimate e;
    e.n_paths = static_cast<int>(samples.size());
    if (samples.empty()) {
        return e;
    }
    // Neumaier-compensated, so n identical samples average back to themselves.
    double sum = 0.0;
    double carry = 0.0;
    for (const double s : samples) {
        const double next = sum + s;
        carry += std::abs(sum) >= std::abs(s) ? (sum - next) + s : (s - next) + sum;
        sum = next;
    }
    e.mean = (sum + carry) / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double ss = 0.0;
        for (const double s : samples) {
            ss += (s - e.mean) * (s - e.mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
        e.std_error = sd / std::sqrt(static_cast<double>(samples.size()));
    }
    return e;
}

FieldSource FieldSource::closed_form(std::function<double(double, const State&)> value,
                                     std::function<Covector(double, const State&)> gradient, std::string description) {
    FieldSource f;
    f.value = [value](double t, const State& x) -> std::optional<double> { return value(t, x); };
    f.gradient = [gradient](double t, const State& x) -> std::optional<Covector> { return gradient(t, x); };
    f.dx = 0.0;
    f.strong_solution_proxy = true;
    f.description = std::move(description);
    return f;
}

FieldSource FieldSource::grid(SpaceTimeField field, bool ladder_passed) {
    FieldSource f;
    const double dx = field.grid.dx();
    auto shared = std::make_shared<const SpaceTimeField>(std::move(field));
    f.value = [shared](double t, const State& x) -> std::optional<double> { return shared->value_at(t, x[0]); };
    f.gradient = [shared](double t, const State& x) -> std::optional<Covector> {
        const auto g = shared->gradient_at(t, x[0]);
        if (!g) {
            return std::nullopt;
        }
        return scalar_vec(*g);
    };
    f.dx = dx;
    f.strong_solution_proxy = ladder_passed;
    f.description = "grid field";
    return f;
}

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::optimal_within_tolerance:
        return "optimal_within_tolerance";
    case Verdict::suboptimal:
        return "suboptimal";
    case Verdict::inconclusive:
        return "inconclusive";
    }
    return "inconclusive";
}

namespace {

struct PathOutcome {
    double cost = 0.0; // canonical
    double gap = 0.0;
    double tail = 0.0; // canonical, discounted only
    double martingale = 0.0;
    double sup_abs_v_early = 0.0;
    double sup_abs_v_late = 0.0;
    long violations = 0;
    long points = 0;
    int projected = 0;
    bool diverged = false;
    bool escaped = false;
};

struct PassSettings {
    const FieldSource* field = nullptr;
    bool discounted = false;
    bool necessity = false;
    bool track_sup_v = false;
};

struct PassResult {
    std::vector<PathOutcome> outcomes;
    double dt = 0.0;
    int diverged = 0;
    int escaped = 0;
};

constexpr double kMaxBadFraction = 1e-3;

PassResult run_pass(const ControlProblem& problem, const ControlPolicy& policy, double t0, const State& x0,
                    const SimConfig& config, const PassSettings& settings) {
    const Hamiltonian ham(problem);
    const ControlProblem& pb = ham.canonical();
    const double sign = sense_sign(problem);
    const PathSimulator sim(problem, policy, config, t0);
    const double dt = sim.dt();
    const double rate = settings.discounted ? problem.discount_rate() : 0.0;
    // Exact integral of e^{-rate s} over one step, relative to its left endpoint.
    const double step_weight = settings.discounted ? -std::expm1(-rate * dt) / rate : dt;
    const FieldSource* field = settings.field;

    PassResult result;
    result.dt = dt;
    result.outcomes.resize(static_cast<std::size_t>(config.n_paths));
    sim.run_all(x0, [&](std::size_t p, const Trajectory& tr) {
        PathOutcome& out = result.outcomes[p];
        out.projected = tr.projected_controls;
        if (tr.diverged_at) {
            out.diverged = true;
            return;
        }
        const int half = sim.n_steps() / 2;
        for (int i = 0; i < tr.steps; ++i) {
            const double t = tr.time(i);
            const State& x = tr.states[static_cast<std::size_t>(i)];
            const Control& z = tr.controls[static_cast<std::size_t>(i)];
            const double w = settings.discounted ? std::exp(-rate * t) * step_weight : dt;
            out.cost += w * pb.running_cost(t, x, z);
            if (field) {
                const auto grad = field->gradient(t, x);
                if (!grad) {
                    out.escaped = true;
                    return;
                }
                const Covector pc = sign * *grad;
                const double discount = settings.discounted ? std::exp(-rate * t) : 1.0;
                out.martingale += discount * pc.dot(pb.diffusion(t, x) * tr.increments[static_cast<std::size_t>(i)]);
                const HamiltonianPoint h = ham.minimize_point(t, x, pc);
                const double raw = ham.current_value(t, x, pc, z) - h.value;
                const double tol = gap_tolerance(h.value);
                const double gap = raw <= tol ? 0.0 : raw;
                out.gap += w * gap;
                if (settings.necessity) {
                    ++out.points;
                    if (raw > tol) {
                        ++out.violations;
                    }
                }
                if (settings.track_sup_v) {
                    const auto v = field->value(t, x);
                    if (v) {
                        double& slot = i < half ? out.sup_abs_v_early : out.sup_abs_v_late;
                        slot = std::max(slot, std::abs(*v));
                    }
                }
            }
        }
        const State& last = tr.states[static_cast<std::size_t>(tr.steps)];
        if (tr.exit) {
            out.cost += (settings.discounted ? std::exp(-rate * tr.exit->time) : 1.0) *
                        pb.boundary_cost(tr.exit->time, tr.exit->state);
        } else if (settings.discounted) {
            const double t_end = tr.time(tr.steps);
            const auto v = field ? field->value(t_end, last) : std::nullopt;
            if (field && !v) {
                out.escaped = true;
                return;
            }
            if (v) {
                out.tail = std::exp(-rate * t_end) * sign * *v;
                out.sup_abs_v_late = std::max(out.sup_abs_v_late, std::abs(*v));
            }
        } else {
            out.cost += pb.terminal_cost(last);
        }
    });

    for (const auto& o : result.outcomes) {
        result.diverged += o.diverged ? 1 : 0;
        result.escaped += (!o.diverged && o.escaped) ? 1 : 0;
    }
    const double n = static_cast<double>(config.n_paths);
    if (result.diverged > kMaxBadFraction * n) {
        std::ostringstream os;
        os << result.diverged << " of " << config.n_paths << " paths diverged (more than 0.1%); reduce dt";
        throw NumericalError(os.str());
    }
    if (result.escaped > kMaxBadFraction * n) {
        std::ostringstream os;
        os << result.escaped << " of " << config.n_paths
           << " paths left the field's grid (more than 0.1%); use a larger grid";
        throw DomainError(os.str());
    }
    return result;
}

bool retained(const PathOutcome& o) { return !o.diverged && !o.escaped; }

IdentityReport assemble(const ControlProblem& problem, const FieldSource& field, double t0, const State& x0,
                        const PassResult& pass, const VerifyOptions& options, bool discounted) {
    const double sign = sense_sign(problem);
    const auto v0 = field.value(t0, x0);
    if (!v0) {
        throw DomainError("the candidate field has no value at the initial point");
    }
    std::vector<double> cost, gap, tail, combined, martingale, adjusted;
    long violations = 0;
    long points = 0;
    IdentityReport rep;
    for (const auto& o : pass.outcomes) {
        rep.projected_controls += o.projected;
        if (!retained(o)) {
            continue;
        }
        cost.push_back(o.cost);
        gap.push_back(o.gap);
        tail.push_back(o.tail);
        martingale.push_back(o.martingale);
        adjusted.push_back(o.cost + o.tail - o.martingale);
        combined.push_back(o.cost + o.tail - o.gap - (options.martingale_control_variate ? o.martingale : 0.0));
        violations += o.violations;
        points += o.points;
    }
    rep.v_at_start = *v0;
    const CostEstimate cost_c = summarize(cost);
    rep.cost = cost_c;
    rep.cost.mean = sign * cost_c.mean;
    rep.cost.discarded_diverged = pass.diverged;
    rep.cost_control_variate = summarize(adjusted);
    rep.cost_control_variate.mean *= sign;
    rep.cost_control_variate.discarded_diverged = pass.diverged;
    rep.gap_integral = summarize(gap);
    rep.gap_integral.discarded_diverged = pass.diverged;
    rep.escaped_paths = pass.escaped;
    rep.dt = pass.dt;
    double tail_c = 0.0;
    if (discounted) {
        CostEstimate t = summarize(tail);
        tail_c = t.mean;
        t.mean *= sign;
        t.discarded_diverged = pass.diverged;
        rep.tail = t;
    }
    const double v_c = sign * *v0;
    const CostEstimate paired = summarize(combined);
    rep.martingale_mean = summarize(martingale).mean;
    rep.martingale_control_variate = options.martingale_control_variate;
    rep.identity_defect = std::abs(paired.mean - v_c);
    rep.combined_std_error = paired.std_error;
    rep.statistical_part = 3.0 * rep.combined_std_error;
    // Floor for exact cancellations lost to rounding when every sample is identical.
    const double rounding = 64.0 * std::numeric_limits<double>::epsilon() *
                            (std::abs(v_c) + std::abs(cost_c.mean) + std::abs(tail_c) + rep.gap_integral.mean);
    rep.discretization_part = options.c_dx * field.dx + options.c_dt * std::sqrt(pass.dt) + rounding;
    rep.tolerance_used = options.tolerance ? *options.tolerance : rep.statistical_part + rep.discretization_part;
    rep.passed = rep.identity_defect <= rep.tolerance_used;
    if (options.necessity && points > 0) {
        rep.necessity_violation_fraction = static_cast<double>(violations) / static_cast<double>(points);
        rep.notes.push_back("necessity scan is conditional on v = V");
    }
    if (pass.escaped > 0) {
        rep.notes.push_back(std::to_string(pass.escaped) + " paths left the field's grid and were excluded");
    }
    if (rep.projected_controls > 0) {
        rep.notes.push_back(std::to_string(rep.projected_controls) + " policy values were projected onto U");
    }
    return rep;
}

} // namespace

CostEstimate estimate_cost(const ControlProblem& problem, const ControlPolicy& policy, double t0, const State& x0,
                           const SimConfig& config) {
    if (!problem.finite_horizon()) {
        throw DomainError("estimate_cost needs a finite horizon; use discounted_verify for discounted problems");
    }
    const PassResult pass = run_pass(problem, policy, t0, x0, config, PassSettings{});
    std::vector<double> cost;
    for (const auto& o : pass.outcomes) {
        if (retained(o)) {
            cost.push_back(o.cost);
        }
    }
    CostEstimate e = summarize(cost);
    e.mean *= sense_sign(problem);
    e.discarded_diverged = pass.diverged;
    return e;
}

CostEstimate estimate_gap_integral(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy,
                                   double t0, const State& x0, const SimConfig& config) {
    if (!problem.finite_horizon()) {
        throw DomainError("estimate_gap_integral needs a finite horizon");
    }
    PassSettings s;
    s.field = &field;
    const PassResult pass = run_pass(problem, policy, t0, x0, config, s);
    std::vector<double> gap;
    for (const auto& o : pass.outcomes) {
        if (retained(o)) {
            gap.push_back(o.gap);
        }
    }
    CostEstimate e = summarize(gap);
    e.discarded_diverged = pass.diverged;
    return e;
}

IdentityReport fundamental_identity(const ControlProblem& problem, const FieldSource& field,
                                    const ControlPolicy& policy, double t0, const State& x0, const SimConfig& config,
                                    const VerifyOptions& options) {
    if (!problem.finite_horizon()) {
        throw DomainError("fundamental_identity needs a finite horizon; use discounted_verify");
    }
    if (!field.value || !field.gradient) {
        throw DomainError("the candidate field needs both value and gradient");
    }
    PassSettings s;
    s.field = &field;
    s.necessity = options.necessity;
    const PassResult pass = run_pass(problem, policy, t0, x0, config, s);
    return assemble(problem, field, t0, x0, pass, options, false);
}

Certificate certificate_from(IdentityReport report, bool strong_solution_proxy) {
    Certificate c;
    c.optimality_margin = report.gap_integral.mean;
    if (!report.passed) {
        c.verdict = Verdict::inconclusive;
        report.notes.push_back("identity defect exceeds the tolerance");
    } else if (report.tolerance_used < report.statistical_part) {
        c.verdict = Verdict::inconclusive;
        report.notes.push_back("tolerance is below the Monte Carlo noise level");
    } else if (report.gap_integral.mean <= 3.0 * report.gap_integral.std_error + report.tolerance_used) {
        c.verdict = Verdict::optimal_within_tolerance;
    } else {
        c.verdict = Verdict::suboptimal;
    }
    if (strong_solution_proxy) {
        c.lower_bound_note = "v is a strong-solution proxy, so v bounds the value function: v <= V for minimization "
                             "(v >= V for maximization) on the sampled region";
    } else {
        c.lower_bound_note = "no bound v vs V attached: the field has not passed the refinement ladder";
    }
    c.evidence = std::move(report);
    return c;
}

Certificate certify(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy, double t0,
                    const State& x0, const SimConfig& config, const VerifyOptions& options) {
    return certificate_from(fundamental_identity(problem, field, policy, t0, x0, config, options),
                            field.strong_solution_proxy);
}

IdentityReport discounted_verify(const ControlProblem& problem, const FieldSource& field, const ControlPolicy& policy,
                                 const State& x0, double truncation_T1, const SimConfig& config,
                                 const VerifyOptions& options) {
    if (problem.finite_horizon()) {
        throw DomainError("discounted_verify needs a discounted infinite-horizon problem");
    }
    if (!(truncation_T1 > 0.0)) {
        throw DomainError("truncation_T1 must be positive");
    }
    if (!field.value || !field.gradient) {
        throw DomainError("the candidate field needs both value and gradient");
    }
    SimConfig cfg = config;
    cfg.t_end = truncation_T1;
    PassSettings s;
    s.field = &field;
    s.discounted = true;
    s.necessity = options.necessity;
    s.track_sup_v = true;
    const PassResult pass = run_pass(problem, policy, 0.0, x0, cfg, s);
    IdentityReport rep = assemble(problem, field, 0.0, x0, pass, options, true);

    double early = std::abs(rep.v_at_start);
    double late = 0.0;
    for (const auto& o : pass.outcomes) {
        if (retained(o)) {
            early = std::max(early, o.sup_abs_v_early);
            late = std::max(late, o.sup_abs_v_late);
        }
    }
    const double sup_v = std::max(early, late);
    rep.truncation_T1 = truncation_T1;
    rep.sampled_sup_abs_v = sup_v;
    rep.tail_bound = std::exp(-problem.discount_rate() * truncation_T1) * sup_v;
    if (late > 10.0 * (1.0 + early)) {
        rep.notes.push_back("warning: |v| grows along the paths; v may be unbounded on the sampled region");
    }
    if (*rep.tail_bound > rep.tolerance_used) {
        rep.passed = false;
        rep.notes.push_back("tail bound exceeds the tolerance; raise truncation_T1");
    }
    return rep;
}

} // namespace hjbv
