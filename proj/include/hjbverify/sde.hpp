#pragma once

#include "hjbverify/hamiltonian.hpp"
#include "hjbverify/problem.hpp"
#include "hjbverify/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace hjbv {

enum class ExitRule { grid_crossing, brownian_bridge };

struct SimConfig {
    double dt = 1e-3;
    int n_paths = 1000;
    std::uint64_t seed = 0;
    ExitRule exit_rule = ExitRule::grid_crossing;
    /// Worker threads; results do not depend on it.
    int threads = 1;
    /// End of the simulated window for infinite-horizon problems (ignored otherwise).
    std::optional<double> t_end;
};

/// Admissible control representations: feedback, open-loop schedule, constant.
class ControlPolicy {
public:
    struct Feedback {
        FeedbackFn map;
    };
    struct OpenLoop {
        std::vector<double> times;                 // increasing
        std::vector<std::vector<Control>> controls; // [row][time index]; path p uses row p % rows
    };
    struct Constant {
        Control z;
    };

    static ControlPolicy feedback(FeedbackFn map);
    static ControlPolicy open_loop(std::vector<double> times, std::vector<std::vector<Control>> controls);
    static ControlPolicy constant(Control z);

    /// Raw (unprojected) control for path p at grid time t with state x.
    Control raw(std::size_t path, double t, const State& x) const;
    bool is_feedback() const { return std::holds_alternative<Feedback>(form_); }

private:
    std::variant<Feedback, OpenLoop, Constant> form_;
};

struct ExitRecord {
    int step = 0;
    double time = 0.0;
    State state; // boundary projection of the exit point
};

/// One simulated path. states has steps + 1 entries; controls/increments have steps.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<State> states;
    std::vector<Control> controls;
    std::vector<Vec> increments;
    int steps = 0;
    std::optional<ExitRecord> exit;
    std::optional<int> diverged_at;
    int projected_controls = 0;

    double time(int i) const { return t0 + i * dt; }
};

/// Euler-Maruyama simulator over a uniform grid t0 < t0 + dt < ... < t_end.
/// Paths are driven by counter-based streams addressed by (seed, path, step),
/// so each path is a pure function of its index.
class PathSimulator {
public:
    PathSimulator(const ControlProblem& problem, ControlPolicy policy, SimConfig config, double t0);

    int n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double t0() const { return t0_; }
    const SimConfig& config() const { return config_; }
    const ControlProblem& problem() const { return problem_; }

    void run_path(std::size_t path, const State& x0, Trajectory& out) const;

    /// Runs every path, calling visit(path, trajectory) from worker threads.
    /// visit must only write to per-path storage.
    void run_all(const State& x0, const std::function<void(std::size_t, const Trajectory&)>& visit) const;

private:
    ControlProblem problem_;
    ControlPolicy policy_;
    SimConfig config_;
    double t0_ = 0.0;
    double dt_ = 0.0;
    int n_steps_ = 0;
    StreamAddress rng_;
};

/// Ensemble of stored trajectories. Steps after a path halts (exit or
/// divergence) are filled with NaN; path_steps(p) gives the valid count.
struct PathBatch {
    std::vector<double> times;
    int n_paths = 0;
    int n_steps = 0;
    int n = 1;
    int k = 1;
    int m = 1;
    std::vector<double> states;      // [path][step 0..n_steps][n]
    std::vector<double> controls;    // [path][step 0..n_steps-1][k]
    std::vector<double> increments;  // [path][step 0..n_steps-1][m]
    std::vector<int> steps_taken;
    std::vector<std::optional<ExitRecord>> exits;
    std::vector<std::optional<int>> diverged;
    std::uint64_t seed = 0;
    int projected_controls = 0;

    State state(int path, int step) const;
    Control control(int path, int step) const;
    Vec increment(int path, int step) const;
    int path_steps(int path) const { return steps_taken[static_cast<std::size_t>(path)]; }
    int diverged_count() const;
};

PathBatch simulate(const ControlProblem& problem, const ControlPolicy& policy, double t0, const State& x0,
                   const SimConfig& config);

/// Probability that a Brownian bridge with variance rate sigma2 started at
/// distance d0 from a barrier and ending at distance d1 touches it within dt.
double bridge_crossing_probability(double d0, double d1, double sigma2, double dt);

/// First exit of a stored path from the domain. grid_crossing: first index with
/// signed distance >= 0. brownian_bridge (1-D): also samples an exit between
/// two interior points using uniforms from (seed, path, step, bridge).
std::optional<ExitRecord> detect_exit(std::span<const State> path, const Domain& domain, ExitRule rule,
                                      double t0, double dt, const std::function<double(int)>& variance,
                                      const StreamAddress& rng, std::size_t path_index);

/// CSV with header path,step,t,x1..xn,z1..zk,exited; every stride-th step plus
/// each path's last step.
void write_paths_csv(std::ostream& os, const PathBatch& batch, int stride = 1, int max_paths = -1);

} // namespace hjbv
