#include "hjbverify/sde.hpp"
#include "hjbverify/io.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace hjbv {

ControlPolicy ControlPolicy::feedback(FeedbackFn map) {
    if (!map) {
        throw DomainError("feedback policy needs a map");
    }
    ControlPolicy p;
    p.form_ = Feedback{std::move(map)};
    return p;
}

ControlPolicy ControlPolicy::open_loop(std::vector<double> times, std::vector<std::vector<Control>> controls) {
    if (times.empty() || controls.empty()) {
        throw DomainError("open-loop policy needs at least one time and one row");
    }
    if (!std::is_sorted(times.begin(), times.end())) {
        throw DomainError("open-loop times must be increasing");
    }
    for (const auto& row : controls) {
        if (row.size() != times.size()) {
            throw DomainError("open-loop rows must have one control per time");
        }
    }
    ControlPolicy p;
    p.form_ = OpenLoop{std::move(times), std::move(controls)};
    return p;
}

ControlPolicy ControlPolicy::constant(Control z) {
    ControlPolicy p;
    p.form_ = Constant{std::move(z)};
    return p;
}

Control ControlPolicy::raw(std::size_t path, double t, const State& x) const {
    if (const auto* fb = std::get_if<Feedback>(&form_)) {
        return fb->map(t, x);
    }
    if (const auto* ol = std::get_if<OpenLoop>(&form_)) {
        const auto it = std::upper_bound(ol->times.begin(), ol->times.end(), t + 1e-12);
        const std::size_t j = it == ol->times.begin() ? 0 : static_cast<std::size_t>(it - ol->times.begin() - 1);
        return ol->controls[path % ol->controls.size()][j];
    }
    return std::get<Constant>(form_).z;
}

double bridge_crossing_probability(double d0, double d1, double sigma2, double dt) {
    if (d0 <= 0.0 || d1 <= 0.0) {
        return 1.0;
    }
    if (!(sigma2 > 0.0)) {
        return 0.0;
    }
    return std::exp(-2.0 * d0 * d1 / (sigma2 * dt));
}

namespace {

/// Exit between two consecutive grid points; `u` is the bridge uniform.
bool crosses(const Domain& domain, ExitRule rule, const State& x0, const State& x1, double sigma2, double dt,
             double u) {
    const double s1 = domain.signed_distance(x1);
    if (s1 >= 0.0) {
        return true;
    }
    if (rule == ExitRule::brownian_bridge && domain.dimension() == 1) {
        const double d0 = -domain.signed_distance(x0);
        const double d1 = -s1;
        return u < bridge_crossing_probability(d0, d1, sigma2, dt);
    }
    return false;
}

} // namespace

std::optional<ExitRecord> detect_exit(std::span<const State> path, const Domain& domain, ExitRule rule,
                                      double t0, double dt, const std::function<double(int)>& variance,
                                      const StreamAddress& rng, std::size_t path_index) {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const int step = static_cast<int>(i);
        const double u = rule == ExitRule::brownian_bridge
                             ? rng.uniforms(path_index, static_cast<std::uint32_t>(step), Substream::bridge)[0]
                             : 1.0;
        const double sigma2 = rule == ExitRule::brownian_bridge ? variance(step) : 0.0;
        if (i == 0 && domain.signed_distance(path[0]) >= 0.0) {
            return ExitRecord{0, t0, domain.project_to_boundary(path[0])};
        }
        if (crosses(domain, rule, path[i], path[i + 1], sigma2, dt, u)) {
            return ExitRecord{step + 1, t0 + (step + 1) * dt, domain.project_to_boundary(path[i + 1])};
        }
    }
    return std::nullopt;
}

PathSimulator::PathSimulator(const ControlProblem& problem, ControlPolicy policy, SimConfig config, double t0)
    : problem_(problem), policy_(std::move(policy)), config_(config), t0_(t0), rng_(config.seed) {
    validate(problem_);
    if (!(config_.dt > 0.0) || config_.n_paths < 1) {
        throw DomainError("simulation needs dt > 0 and n_paths >= 1");
    }
    double t_end = 0.0;
    if (problem_.finite_horizon()) {
        t_end = problem_.horizon_T();
    } else {
        if (!config_.t_end) {
            throw DomainError("infinite-horizon simulation needs an explicit end time");
        }
        t_end = *config_.t_end;
    }
    const double span = t_end - t0_;
    if (!(span > 0.0)) {
        throw DomainError("simulation start time must precede the horizon end");
    }
    if (config_.dt > span / 10.0 + 1e-15) {
        throw DomainError("dt must not exceed a tenth of the simulated horizon");
    }
    n_steps_ = static_cast<int>(std::ceil(span / config_.dt - 1e-9));
    dt_ = span / n_steps_;
}

void PathSimulator::run_path(std::size_t path, const State& x0, Trajectory& out) const {
    const int n = problem_.dimension;
    const int m = problem_.noise_dimension;
    const ControlSet& U = problem_.control_set;
    const std::optional<Domain>& domain = problem_.domain;
    const bool bridge = config_.exit_rule == ExitRule::brownian_bridge && domain && domain->dimension() == 1;
    const double sqdt = std::sqrt(dt_);

    out.t0 = t0_;
    out.dt = dt_;
    out.states.resize(static_cast<std::size_t>(n_steps_) + 1);
    out.controls.resize(static_cast<std::size_t>(n_steps_));
    out.increments.resize(static_cast<std::size_t>(n_steps_));
    out.steps = 0;
    out.exit.reset();
    out.diverged_at.reset();
    out.projected_controls = 0;

    if (x0.size() != n) {
        throw DomainError("initial state dimension does not match the problem");
    }
    if (domain && domain->signed_distance(x0) >= 0.0) {
        throw DomainError("initial state must lie inside the exit domain");
    }
    out.states[0] = x0;

    Vec dW(m);
    for (int i = 0; i < n_steps_; ++i) {
        const double t = t0_ + i * dt_;
        const State& x = out.states[static_cast<std::size_t>(i)];
        Control z = policy_.raw(path, t, x);
        if (!U.contains(z, 1e-12)) {
            z = U.project(z);
            ++out.projected_controls;
        }
        rng_.normals(path, static_cast<std::uint32_t>(i), m, [&](int j, double g) { dW[j] = sqdt * g; });
        const Mat B = problem_.diffusion(t, x);
        State next = x + (problem_.drift_uncontrolled(t, x) + problem_.drift_controlled(t, x, z)) * dt_ + B * dW;

        out.controls[static_cast<std::size_t>(i)] = z;
        out.increments[static_cast<std::size_t>(i)] = dW;
        out.states[static_cast<std::size_t>(i) + 1] = next;
        out.steps = i + 1;

        if (!next.allFinite()) {
            out.diverged_at = i + 1;
            return;
        }
        if (domain) {
            double sigma2 = 0.0;
            double u = 1.0;
            if (bridge) {
                sigma2 = (B * B.transpose())(0, 0);
                u = rng_.uniforms(path, static_cast<std::uint32_t>(i), Substream::bridge)[0];
            }
            if (crosses(*domain, config_.exit_rule, x, next, sigma2, dt_, u)) {
                out.exit = ExitRecord{i + 1, t0_ + (i + 1) * dt_, domain->project_to_boundary(next)};
                return;
            }
        }
    }
}

void PathSimulator::run_all(const State& x0,
                            const std::function<void(std::size_t, const Trajectory&)>& visit) const {
    const std::size_t n_paths = static_cast<std::size_t>(config_.n_paths);
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config_.threads)), n_paths));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&](std::size_t begin, std::size_t end) {
        try {
            Trajectory traj;
            for (std::size_t p = begin; p < end; ++p) {
                run_path(p, x0, traj);
                visit(p, traj);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    };

    if (workers == 1) {
        work(0, n_paths);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_paths + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n_paths, begin + chunk);
            if (begin < end) {
                pool.emplace_back(work, begin, end);
            }
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

State PathBatch::state(int path, int step) const {
    State x(n);
    const std::size_t base = (static_cast<std::size_t>(path) * (n_steps + 1) + step) * n;
    for (int j = 0; j < n; ++j) {
        x[j] = states[base + j];
    }
    return x;
}

Control PathBatch::control(int path, int step) const {
    Control z(k);
    const std::size_t base = (static_cast<std::size_t>(path) * n_steps + step) * k;
    for (int j = 0; j < k; ++j) {
        z[j] = controls[base + j];
    }
    return z;
}

Vec PathBatch::increment(int path, int step) const {
    Vec w(m);
    const std::size_t base = (static_cast<std::size_t>(path) * n_steps + step) * m;
    for (int j = 0; j < m; ++j) {
        w[j] = increments[base + j];
    }
    return w;
}

int PathBatch::diverged_count() const {
    return static_cast<int>(std::count_if(diverged.begin(), diverged.end(), [](const auto& d) { return d.has_value(); }));
}

PathBatch simulate(const ControlProblem& problem, const ControlPolicy& policy, double t0, const State& x0,
                   const SimConfig& config) {
    const PathSimulator sim(problem, policy, config, t0);
    PathBatch batch;
    batch.n_paths = config.n_paths;
    batch.n_steps = sim.n_steps();
    batch.n = problem.dimension;
    batch.k = problem.control_dimension();
    batch.m = problem.noise_dimension;
    batch.seed = config.seed;
    batch.times.resize(static_cast<std::size_t>(batch.n_steps) + 1);
    for (int i = 0; i <= batch.n_steps; ++i) {
        batch.times[static_cast<std::size_t>(i)] = t0 + i * sim.dt();
    }
    const std::size_t np = static_cast<std::size_t>(batch.n_paths);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    batch.states.assign(np * (batch.n_steps + 1) * batch.n, nan);
    batch.controls.assign(np * batch.n_steps * batch.k, nan);
    batch.increments.assign(np * batch.n_steps * batch.m, nan);
    batch.steps_taken.assign(np, 0);
    batch.exits.assign(np, std::nullopt);
    batch.diverged.assign(np, std::nullopt);
    std::vector<int> projected(np, 0);

    sim.run_all(x0, [&](std::size_t p, const Trajectory& tr) {
        const std::size_t sbase = p * (batch.n_steps + 1) * batch.n;
        for (int i = 0; i <= tr.steps; ++i) {
            for (int j = 0; j < batch.n; ++j) {
                batch.states[sbase + static_cast<std::size_t>(i) * batch.n + j] = tr.states[static_cast<std::size_t>(i)][j];
            }
        }
        const std::size_t cbase = p * batch.n_steps * batch.k;
        const std::size_t wbase = p * batch.n_steps * batch.m;
        for (int i = 0; i < tr.steps; ++i) {
            for (int j = 0; j < batch.k; ++j) {
                batch.controls[cbase + static_cast<std::size_t>(i) * batch.k + j] = tr.controls[static_cast<std::size_t>(i)][j];
            }
            for (int j = 0; j < batch.m; ++j) {
                batch.increments[wbase + static_cast<std::size_t>(i) * batch.m + j] = tr.increments[static_cast<std::size_t>(i)][j];
            }
        }
        batch.steps_taken[p] = tr.steps;
        batch.exits[p] = tr.exit;
        batch.diverged[p] = tr.diverged_at;
        projected[p] = tr.projected_controls;
    });

    for (const int c : projected) {
        batch.projected_controls += c;
    }
    if (batch.diverged_count() == batch.n_paths) {
        throw NumericalError("every simulated path diverged");
    }
    return batch;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch, int stride, int max_paths) {
    stride = std::max(1, stride);
    os << "path,step,t";
    for (int j = 1; j <= batch.n; ++j) {
        os << ",x" << j;
    }
    for (int j = 1; j <= batch.k; ++j) {
        os << ",z" << j;
    }
    os << ",exited\n";
    const int paths = max_paths < 0 ? batch.n_paths : std::min(batch.n_paths, max_paths);
    for (int p = 0; p < paths; ++p) {
        const int last = batch.path_steps(p);
        const bool exited = batch.exits[static_cast<std::size_t>(p)].has_value();
        for (int i = 0; i <= last; ++i) {
            if (i % stride != 0 && i != last) {
                continue;
            }
            os << p << ',' << i << ',' << format_double(batch.times[static_cast<std::size_t>(i)]);
            const State x = batch.state(p, i);
            for (int j = 0; j < batch.n; ++j) {
                os << ',' << format_double(x[j]);
            }
            // The control applied from this step on; the terminal row has none.
            const bool has_control = i < last;
            const Control z = has_control ? batch.control(p, i) : Control::Constant(batch.k, std::nan(""));
            for (int j = 0; j < batch.k; ++j) {
                os << ',' << (has_control ? format_double(z[j]) : std::string());
            }
            os << ',' << ((exited && i == last) ? 1 : 0) << '\n';
        }
    }
}

} // namespace hjbv
