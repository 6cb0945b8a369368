#include "hjbverify/cli.hpp"
#include "hjbverify/benchmarks.hpp"
#include "hjbverify/hamiltonian.hpp"
#include "hjbverify/hjb.hpp"
#include "hjbverify/io.hpp"
#include "hjbverify/sde.hpp"
#include "hjbverify/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hjbv {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

NegativeBranch negative_branch_of(const std::string& name) {
    if (name == "linear") {
        return NegativeBranch::linear;
    }
    if (name == "hjb_consistent") {
        return NegativeBranch::hjb_consistent;
    }
    throw DomainError("unknown negative branch '" + name + "' (linear | hjb_consistent)");
}

AdvertisingParams advertising_params(const RunConfig& c) {
    return AdvertisingParams{c.eta, c.alpha, c.beta, c.T, negative_branch_of(c.negative_branch)};
}

ControlProblem build_problem(const RunConfig& c) {
    if (c.kind == "advertising") {
        return make_advertising_problem(advertising_params(c));
    }
    if (c.kind == "exit_demo") {
        return make_exit_demo(c.demo == "constant" ? ExitDemoKind::constant : ExitDemoKind::expected_exit_time);
    }
    return make_discounted_constant(c.cost, c.rate);
}

struct ClosedForm {
    std::function<double(double, double)> value;
    std::function<double(double, double)> gradient;
    std::string description;
};

/// Closed-form candidate v for each built-in problem.
ClosedForm closed_form(const RunConfig& c) {
    if (c.kind == "advertising") {
        const AdvertisingSolution s(advertising_params(c));
        return {[s](double t, double x) { return s.value(t, x); }, [s](double t, double x) { return s.gradient(t, x); },
                "closed form advertising value"};
    }
    if (c.kind == "exit_demo") {
        if (c.demo == "constant") {
            return {[](double, double) { return kExitDemoConstant; }, [](double, double) { return 0.0; },
                    "closed form constant"};
        }
        return {[](double, double x) { return x * (1.0 - x); }, [](double, double x) { return 1.0 - 2.0 * x; },
                "x(1-x), expected exit time of the untruncated problem"};
    }
    const double v = c.cost / c.rate;
    return {[v](double, double) { return v; }, [](double, double) { return 0.0; }, "closed form cost/rate"};
}

Grid1D grid_of(const RunConfig& c, const ControlProblem& problem) {
    Grid1D g{c.x_min, c.x_max, c.nx, c.nt, 0.0, problem.horizon_T()};
    g.validate();
    return g;
}

struct SolvedField {
    SpaceTimeField field;
    std::optional<ApproximationLadder> ladder;
};

SolvedField solve_field(const RunConfig& c, const ControlProblem& problem) {
    if (!problem.finite_horizon()) {
        throw DomainError("the grid solver needs a finite horizon; discounted problems use the closed form field");
    }
    const Grid1D grid = grid_of(c, problem);
    const ClosedForm cf = closed_form(c);
    const BoundaryCondition bc = dirichlet_from(cf.value);
    SolvedField out;
    if (c.ladder_levels >= 3) {
        out.ladder = refine_ladder(problem, grid, c.ladder_levels, bc);
        out.field = out.ladder->levels.back();
    } else if (c.ladder_levels != 0) {
        throw DomainError("grid.ladder_levels must be 0 (off) or at least 3");
    } else {
        out.field = solve(problem, grid, bc);
    }
    return out;
}

struct FieldChoice {
    FieldSource source;
    std::optional<ApproximationLadder> ladder;
};

FieldChoice choose_field(const RunConfig& c, const ControlProblem& problem) {
    FieldChoice out;
    if (c.field == "closed_form") {
        const ClosedForm cf = closed_form(c);
        out.source = FieldSource::closed_form([v = cf.value](double t, const State& x) { return v(t, x[0]); },
                                              [g = cf.gradient](double t, const State& x) { return scalar_vec(g(t, x[0])); },
                                              cf.description);
        // The exit-time formula ignores truncation at T: a close proxy, not a solution.
        out.source.strong_solution_proxy = !(c.kind == "exit_demo" && c.demo == "expected_exit_time");
        return out;
    }
    if (c.field == "solved") {
        SolvedField s = solve_field(c, problem);
        const bool passed = s.ladder && s.ladder->passed;
        out.source = FieldSource::grid(std::move(s.field), passed);
        out.source.description = "solved grid field";
        out.ladder = std::move(s.ladder);
        return out;
    }
    const std::string path = c.field.substr(4);
    std::ifstream in(path);
    if (!in) {
        throw DomainError("cannot open field file " + path);
    }
    out.source = FieldSource::grid(load_field_csv(in), false);
    out.source.description = "grid field loaded from " + path;
    return out;
}

ControlPolicy policy_of(const RunConfig& c, const ControlProblem& problem, const FieldSource& field) {
    if (c.policy == "zero") {
        return ControlPolicy::constant(scalar_vec(0.0));
    }
    if (c.policy.rfind("constant:", 0) == 0) {
        return ControlPolicy::constant(scalar_vec(parse_double(c.policy.substr(9))));
    }
    auto grad = field.gradient;
    return ControlPolicy::feedback(feedback_map(problem, [grad](double t, const State& x) -> Covector {
        const auto g = grad(t, x);
        if (!g) {
            throw DomainError("feedback policy queried outside the field's grid; use a larger grid");
        }
        return *g;
    }));
}

SimConfig sim_config(const RunConfig& c, const RunOptions& o) {
    SimConfig s;
    s.dt = c.dt;
    s.n_paths = c.paths;
    s.seed = c.seed;
    s.exit_rule = c.exit_rule == "brownian_bridge" ? ExitRule::brownian_bridge : ExitRule::grid_crossing;
    s.threads = std::max(1, o.threads);
    return s;
}

Json header(const RunConfig& c) {
    Json j;
    j["version"] = kToolkitVersion;
    j["config"] = echo_config(c);
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DomainError("cannot write " + path.string());
    }
    out << text;
}

void prepare(const RunConfig& c, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir / "config.ini", echo_config(c));
}

int finish(Json& j, const std::vector<std::string>& failures, const fs::path& path) {
    j["failures"] = failures;
    j["status"] = failures.empty() ? "pass" : "fail";
    write_text(path, j.dump(2) + "\n");
    for (const auto& f : failures) {
        std::cerr << "FAIL: " << f << '\n';
    }
    return failures.empty() ? 0 : 1;
}

Json to_json(const CostEstimate& e) {
    return Json{{"mean", e.mean},
                {"std_error", e.std_error},
                {"n_paths", e.n_paths},
                {"discarded_diverged", e.discarded_diverged}};
}

Json to_json(const ApproximationLadder& l) {
    Json j;
    j["value_distances"] = l.value_distances;
    j["gradient_distances"] = l.gradient_distances;
    j["value_ratios"] = l.value_ratios;
    j["passed"] = l.passed;
    j["gradient_proxy_conclusive"] = l.gradient_proxy_conclusive;
    j["notes"] = l.notes;
    return j;
}

Json to_json(const HypothesisReport& h) {
    Json j;
    j["lipschitz_F0_estimate"] = h.lipschitz_F0_estimate;
    j["lipschitz_F1_estimate"] = h.lipschitz_F1_estimate;
    j["ellipticity_lambda0_estimate"] = h.ellipticity_lambda0_estimate;
    j["girsanov_sup_estimate"] = std::isfinite(h.girsanov_sup_estimate) ? Json(h.girsanov_sup_estimate) : Json("inf");
    j["girsanov_unbounded"] = h.girsanov_unbounded;
    j["samples_used"] = h.samples_used;
    return j;
}

std::string fmt(double v) { return format_double(v); }

} // namespace

int cmd_solve(const RunConfig& config, const fs::path& out_dir, const RunOptions&) {
    const ControlProblem problem = build_problem(config);
    SolvedField s = solve_field(config, problem);
    prepare(config, out_dir);
    {
        std::ofstream out(out_dir / "field.csv", std::ios::binary);
        write_field_csv(out, s.field);
    }
    std::vector<std::string> failures;
    Json j = header(config);
    const Grid1D& g = s.field.grid;
    j["grid"] = Json{{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx}, {"nt", g.nt}, {"dx", g.dx()},
                     {"dt", g.dt()}, {"stability_ratio", g.stability_ratio()}};
    const ResidualReport r = residual(s.field, problem, 2);
    j["residual"] = Json{{"sup_interior_residual", r.sup_interior_residual},
                         {"excluded_nodes", r.excluded_nodes.size()}};

    const ClosedForm cf = closed_form(config);
    double max_err = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 0; i < g.nx; ++i) {
            max_err = std::max(max_err, std::abs(s.field.v(n, i) - cf.value(g.t(n), g.x(i))));
        }
    }
    j["max_error_vs_closed_form"] = max_err;
    j["closed_form"] = cf.description;

    std::vector<double> probe_points;
    for (int i = 1; i < g.nx - 1; i += std::max(1, (g.nx - 2) / 20)) {
        probe_points.push_back(g.x(i));
    }
    const GradientDiagnostics gd =
        gradient_diagnostics(s.field, {g.t_start, 0.5 * (g.t_start + g.t_end)}, probe_points,
                             BlowupProbe{g.x_min, 0.5 * (g.x_max - g.x_min), 21});
    j["gradient_diagnostics"] = Json{{"weighted_gradient_sup", gd.weighted_gradient_sup},
                                     {"blowup_exponents_from_x_min", gd.blowup_exponents},
                                     {"second_differences_vanish", gd.second_differences_vanish}};
    if (s.ladder) {
        j["ladder"] = to_json(*s.ladder);
        if (!s.ladder->passed) {
            failures.push_back("refinement ladder did not pass");
        }
    }
    return finish(j, failures, out_dir / "solve.json");
}

int cmd_simulate(const RunConfig& config, const fs::path& out_dir, const RunOptions& options) {
    const ControlProblem problem = build_problem(config);
    const FieldChoice fc = choose_field(config, problem);
    const ControlPolicy policy = policy_of(config, problem, fc.source);
    SimConfig sim = sim_config(config, options);
    const State x0 = scalar_vec(config.x0);
    const double t0 = problem.finite_horizon() ? config.t0 : 0.0;
    if (!problem.finite_horizon()) {
        sim.t_end = config.truncation_T1;
    }
    prepare(config, out_dir);

    // Paths are addressed by index, so the first csv_paths paths of the full run
    // are exactly the stored ones.
    SimConfig small = sim;
    small.n_paths = std::max(1, std::min(config.csv_paths, config.paths));
    const PathBatch batch = simulate(problem, policy, t0, x0, small);
    {
        std::ofstream out(out_dir / "paths.csv", std::ios::binary);
        write_paths_csv(out, batch, config.path_stride);
    }

    Json j = header(config);
    std::vector<std::string> failures;
    if (problem.finite_horizon()) {
        j["cost"] = to_json(estimate_cost(problem, policy, t0, x0, sim));
    } else {
        const IdentityReport rep = discounted_verify(problem, fc.source, policy, x0, config.truncation_T1, sim);
        j["truncated_cost"] = to_json(rep.cost);
        j["tail"] = to_json(*rep.tail);
        j["cost"] = Json{{"mean", rep.cost.mean + rep.tail->mean}};
    }
    j["dt"] = PathSimulator(problem, policy, sim, t0).dt();
    j["projected_controls_in_csv_paths"] = batch.projected_controls;
    return finish(j, failures, out_dir / "estimate.json");
}

int cmd_verify(const RunConfig& config, const fs::path& out_dir, const RunOptions& options) {
    const ControlProblem problem = build_problem(config);
    const FieldChoice fc = choose_field(config, problem);
    const ControlPolicy policy = policy_of(config, problem, fc.source);
    SimConfig sim = sim_config(config, options);
    const State x0 = scalar_vec(config.x0);
    VerifyOptions vo;
    vo.tolerance = config.tolerance;
    vo.c_dx = config.c_dx;
    vo.c_dt = config.c_dt;
    vo.necessity = config.necessity;
    vo.martingale_control_variate = config.control_variate;
    prepare(config, out_dir);

    const bool finite = problem.finite_horizon();
    const double t0 = finite ? config.t0 : 0.0;
    Certificate cert =
        finite ? certify(problem, fc.source, policy, t0, x0, sim, vo)
               : certificate_from(discounted_verify(problem, fc.source, policy, x0, config.truncation_T1, sim, vo),
                                  fc.source.strong_solution_proxy);
    const IdentityReport& rep = cert.evidence;

    SampleRegion region;
    region.t_lo = t0;
    region.t_hi = finite ? problem.horizon_T() : config.truncation_T1;
    if (problem.domain) {
        region.x_lo = scalar_vec(problem.domain->axes()[0].first);
        region.x_hi = scalar_vec(problem.domain->axes()[0].second);
    } else {
        region.x_lo = scalar_vec(config.x_min);
        region.x_hi = scalar_vec(config.x_max);
    }
    const HypothesisReport hyp = probe_hypotheses(problem, 2000, config.seed, region);

    Json j = header(config);
    j["problem"] = Json{{"name", problem.name}, {"sense", problem.sense == Sense::maximize ? "maximize" : "minimize"}};
    j["hypotheses"] = to_json(hyp);
    Json field{{"description", fc.source.description},
               {"dx", fc.source.dx},
               {"strong_solution_proxy", fc.source.strong_solution_proxy}};
    if (fc.ladder) {
        field["ladder"] = to_json(*fc.ladder);
    }
    j["field"] = field;
    Json id;
    id["t0"] = t0;
    id["x0"] = config.x0;
    id["v_at_start"] = rep.v_at_start;
    id["cost"] = to_json(rep.cost);
    id["cost_control_variate"] = to_json(rep.cost_control_variate);
    id["gap_integral"] = to_json(rep.gap_integral);
    id["identity_defect"] = rep.identity_defect;
    id["tolerance_used"] = rep.tolerance_used;
    id["statistical_part"] = rep.statistical_part;
    id["discretization_part"] = rep.discretization_part;
    id["combined_std_error"] = rep.combined_std_error;
    id["martingale_control_variate"] = rep.martingale_control_variate;
    id["martingale_mean"] = rep.martingale_mean;
    id["passed"] = rep.passed;
    id["dt"] = rep.dt;
    id["escaped_paths"] = rep.escaped_paths;
    id["projected_controls"] = rep.projected_controls;
    if (rep.tail) {
        id["tail"] = to_json(*rep.tail);
        id["tail_bound"] = *rep.tail_bound;
        id["sampled_sup_abs_v"] = *rep.sampled_sup_abs_v;
        id["truncation_T1"] = *rep.truncation_T1;
    }
    if (rep.necessity_violation_fraction) {
        id["necessity_violation_fraction"] = *rep.necessity_violation_fraction;
    }
    id["notes"] = rep.notes;
    j["identity"] = id;
    j["certificate"] = Json{{"verdict", to_string(cert.verdict)},
                            {"optimality_margin", cert.optimality_margin},
                            {"lower_bound_note", cert.lower_bound_note}};

    std::ostringstream md;
    md << "# Verification report\n\n";
    md << "Toolkit: " << kToolkitVersion << "\n\n";
    md << "Problem: " << problem.name << " (" << (problem.sense == Sense::maximize ? "maximize" : "minimize")
       << "), start (t0, x0) = (" << fmt(t0) << ", " << fmt(config.x0) << ")\n\n";
    md << "## Hypotheses\n\n| quantity | sampled estimate |\n|---|---|\n";
    md << "| Lipschitz constant of F0 | " << fmt(hyp.lipschitz_F0_estimate) << " |\n";
    md << "| Lipschitz constant of F1 | " << fmt(hyp.lipschitz_F1_estimate) << " |\n";
    md << "| ellipticity lambda0 | " << fmt(hyp.ellipticity_lambda0_estimate) << " |\n";
    md << "| sup abs(B^-1 F1) | "
       << (std::isfinite(hyp.girsanov_sup_estimate) ? fmt(hyp.girsanov_sup_estimate) : std::string("inf"))
       << (hyp.girsanov_unbounded ? " (unbounded)" : "") << " |\n\n";
    md << "## Field diagnostics\n\n";
    md << "- source: " << fc.source.description << "\n";
    md << "- grid spacing dx: " << fmt(fc.source.dx) << "\n";
    md << "- strong-solution proxy: " << (fc.source.strong_solution_proxy ? "yes" : "no") << "\n";
    if (fc.ladder) {
        md << "- refinement ladder: " << (fc.ladder->passed ? "passed" : "failed") << ", value distances";
        for (const double d : fc.ladder->value_distances) {
            md << ' ' << fmt(d);
        }
        md << "\n";
        for (const auto& n : fc.ladder->notes) {
            md << "- " << n << "\n";
        }
    }
    md << "\n## Identity table\n\n| term | value |\n|---|---|\n";
    md << "| v(t0, x0) | " << fmt(rep.v_at_start) << " |\n";
    md << "| J estimate | " << fmt(rep.cost.mean) << " +- " << fmt(rep.cost.std_error) << " |\n";
    md << "| J estimate, Ito term removed | " << fmt(rep.cost_control_variate.mean) << " +- "
       << fmt(rep.cost_control_variate.std_error) << " |\n";
    if (rep.tail) {
        md << "| tail term | " << fmt(rep.tail->mean) << " (bound " << fmt(*rep.tail_bound) << ") |\n";
    }
    md << "| gap integral | " << fmt(rep.gap_integral.mean) << " +- " << fmt(rep.gap_integral.std_error) << " |\n";
    md << "| Ito term mean | " << fmt(rep.martingale_mean)
       << (rep.martingale_control_variate ? " (subtracted per path)" : " (not subtracted)") << " |\n";
    md << "| identity defect | " << fmt(rep.identity_defect) << " +- " << fmt(rep.combined_std_error) << " |\n";
    md << "| tolerance | " << fmt(rep.tolerance_used) << " |\n";
    md << "| paths used | " << rep.cost.n_paths << " |\n\n";
    md << "## Certificate verdict\n\n";
    md << "Verdict: **" << to_string(cert.verdict) << "**, margin " << fmt(cert.optimality_margin) << "\n\n";
    md << cert.lower_bound_note << "\n";
    if (rep.necessity_violation_fraction) {
        md << "\nNecessity scan (conditional on v = V): fraction of points with positive gap "
           << fmt(*rep.necessity_violation_fraction) << "\n";
    }
    for (const auto& n : rep.notes) {
        md << "\n- " << n;
    }
    md << "\n";
    write_text(out_dir / "report.md", md.str());

    std::vector<std::string> failures;
    if (cert.verdict == Verdict::inconclusive) {
        failures.push_back(rep.passed ? "verdict inconclusive: tolerance below Monte Carlo noise"
                                      : "verdict inconclusive: identity defect exceeds tolerance");
    }
    return finish(j, failures, out_dir / "report.json");
}

int cmd_benchmark(const std::string& name, const BenchmarkArgs& args, const fs::path& out_dir) {
    if (name != "advertising") {
        throw DomainError("unknown benchmark '" + name + "' (available: advertising)");
    }
    const AdvertisingParams params{args.eta, args.alpha, args.beta, args.T, negative_branch_of(args.negative_branch)};
    params.require_valid();
    if (args.n_times < 2 || args.nx < 2 || !(args.x_min < args.x_max)) {
        throw DomainError("benchmark needs n_times >= 2, nx >= 2 and x_min < x_max");
    }
    const AdvertisingSolution sol(params);
    const ControlProblem problem = make_advertising_problem(params);
    fs::create_directories(out_dir);

    std::ostringstream coeff;
    coeff << "t,a,b\n";
    for (int n = 0; n < args.n_times; ++n) {
        const double t = n == args.n_times - 1 ? params.T : params.T * n / (args.n_times - 1);
        coeff << fmt(t) << ',' << fmt(sol.a(t)) << ',' << fmt(sol.b(t)) << '\n';
    }
    write_text(out_dir / "coefficients.csv", coeff.str());

    const FeedbackFn generic = feedback_map(problem, [&sol](double t, const State& x) {
        return scalar_vec(sol.gradient(t, x[0]));
    });
    double feedback_mismatch = 0.0;
    std::ostringstream prof;
    prof << "t,x,v,dvdx,feedback\n";
    for (const double t : args.times) {
        if (t < 0.0 || t > params.T) {
            throw DomainError("benchmark time " + fmt(t) + " lies outside [0, T]");
        }
        for (int i = 0; i < args.nx; ++i) {
            const double x = i == args.nx - 1 ? args.x_max : args.x_min + (args.x_max - args.x_min) * i / (args.nx - 1);
            const double fb = sol.feedback(t, x);
            feedback_mismatch = std::max(feedback_mismatch, std::abs(fb - generic(t, scalar_vec(x))[0]));
            prof << fmt(t) << ',' << fmt(x) << ',' << fmt(sol.value(t, x)) << ',' << fmt(sol.gradient(t, x)) << ','
                 << fmt(fb) << '\n';
        }
    }
    write_text(out_dir / "profile.csv", prof.str());

    const auto [a0, b0] = advertising_coefficients(params, 0.0);
    const auto [a_rk, b_rk] = advertising_coefficients_rk4(params, 0.0, params.T * 1e-4);
    const double a_rel = std::abs(a0 - a_rk) / std::abs(a_rk);
    const double b_rel = std::abs(b0 - b_rk) / std::abs(b_rk);
    Json j;
    j["version"] = kToolkitVersion;
    j["params"] = Json{{"eta", params.eta}, {"alpha", params.alpha}, {"beta", params.beta}, {"T", params.T},
                       {"negative_branch", args.negative_branch}};
    j["a0"] = a0;
    j["b0"] = b0;
    j["a0_rk4"] = a_rk;
    j["b0_rk4"] = b_rk;
    j["a0_relative_difference"] = a_rel;
    j["b0_relative_difference"] = b_rel;
    j["feedback_mismatch"] = feedback_mismatch;
    std::vector<std::string> failures;
    if (!(a_rel <= 1e-8)) {
        failures.push_back("a(0) differs from RK4 by more than 1e-8 relative");
    }
    if (!(b_rel <= 1e-8)) {
        failures.push_back("b(0) differs from RK4 by more than 1e-8 relative");
    }
    if (sol.a(params.T) != 1.0 || sol.b(params.T) != -1.0) {
        failures.push_back("terminal conditions a(T) = 1, b(T) = -1 not met exactly");
    }
    if (!(feedback_mismatch <= 1e-10)) {
        failures.push_back("closed-form feedback differs from the generic argmax by more than 1e-10");
    }
    return finish(j, failures, out_dir / "benchmark.json");
}

} // namespace hjbv
