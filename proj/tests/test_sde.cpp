#include "hjbverify/benchmarks.hpp"
#include "hjbverify/sde.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace hjbv;
using hjbv::testing::brownian_exit;
using hjbv::testing::linear_problem;

namespace {

struct ExitStats {
    double mean_time = 0.0;
    double se_time = 0.0;
    double upper_fraction = 0.0;
    double se_fraction = 0.0;
    int exited = 0;
};

ExitStats exit_stats(const ControlProblem& pb, double x0, const SimConfig& cfg) {
    const PathSimulator sim(pb, ControlPolicy::constant(scalar_vec(0.0)), cfg, 0.0);
    const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
    std::vector<double> tau(n, 0.0);
    std::vector<int> upper(n, 0);
    std::vector<int> hit(n, 0);
    sim.run_all(scalar_vec(x0), [&](std::size_t p, const Trajectory& tr) {
        tau[p] = tr.exit ? tr.exit->time : tr.time(tr.steps);
        hit[p] = tr.exit ? 1 : 0;
        upper[p] = tr.exit && tr.exit->state[0] > x0 ? 1 : 0;
    });
    ExitStats s;
    double sum = 0.0;
    double sum2 = 0.0;
    double up = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        sum += tau[p];
        sum2 += tau[p] * tau[p];
        up += upper[p];
        s.exited += hit[p];
    }
    const double dn = static_cast<double>(n);
    s.mean_time = sum / dn;
    s.se_time = std::sqrt(std::max(0.0, sum2 / dn - s.mean_time * s.mean_time) / (dn - 1.0));
    s.upper_fraction = up / dn;
    s.se_fraction = std::sqrt(s.upper_fraction * (1.0 - s.upper_fraction) / dn);
    return s;
}

} // namespace

TEST_CASE("deterministic decay matches exp(-1)") {
    const ControlProblem pb = linear_problem(-1.0, 0.0);
    SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.n_paths = 1;
    const PathSimulator sim(pb, ControlPolicy::constant(scalar_vec(0.0)), cfg, 0.0);
    Trajectory tr;
    sim.run_path(0, scalar_vec(1.0), tr);
    CHECK(tr.steps == 10000);
    CHECK(std::abs(tr.states.back()[0] - std::exp(-1.0)) <= 2e-4);
}

TEST_CASE("symmetric exit and mean exit time of Brownian motion") {
    const ControlProblem pb = brownian_exit(0.0, 1.0, 10.0);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_paths = 100000;
    cfg.seed = 17;
    const ExitStats s = exit_stats(pb, 0.5, cfg);
    CHECK(s.exited == cfg.n_paths);
    CHECK(std::abs(s.upper_fraction - 0.5) <= 3.0 * s.se_fraction);
    CHECK(std::abs(s.mean_time - 0.25) <= std::max(3.0 * s.se_time, 2.0 * std::sqrt(cfg.dt)));
}

TEST_CASE("Brownian bridge exit reduces the grid-crossing bias") {
    const ControlProblem pb = brownian_exit(0.0, 1.0, 10.0);
    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.n_paths = 20000;
    cfg.seed = 23;
    const ExitStats grid = exit_stats(pb, 0.5, cfg);
    cfg.exit_rule = ExitRule::brownian_bridge;
    const ExitStats bridge = exit_stats(pb, 0.5, cfg);
    // Grid crossing misses excursions between steps and overshoots the mean.
    CHECK(grid.mean_time > 0.25);
    CHECK(std::abs(bridge.mean_time - 0.25) < std::abs(grid.mean_time - 0.25));
    CHECK(std::abs(bridge.mean_time - 0.25) <= 3.0 * bridge.se_time + 0.01);
}

TEST_CASE("bridge crossing probability") {
    CHECK(bridge_crossing_probability(0.0, 0.3, 1.0, 0.01) == 1.0);
    CHECK(bridge_crossing_probability(0.1, 0.2, 0.0, 0.01) == 0.0);
    CHECK(bridge_crossing_probability(0.1, 0.2, 1.0, 0.01) == doctest::Approx(std::exp(-4.0)).epsilon(1e-14));
}

TEST_CASE("detect_exit on stored paths") {
    const Domain d = Domain::interval(0.0, 1.0);
    const StreamAddress rng(1);
    auto var = [](int) { return 1.0; };
    const std::vector<State> crossing{scalar_vec(0.5), scalar_vec(0.9), scalar_vec(1.1)};
    const auto e = detect_exit(crossing, d, ExitRule::grid_crossing, 0.0, 0.1, var, rng, 0);
    REQUIRE(e.has_value());
    CHECK(e->step == 2);
    CHECK(e->time == doctest::Approx(0.2));
    CHECK(e->state[0] == 1.0);
    const std::vector<State> still(5, d.centroid());
    CHECK_FALSE(detect_exit(still, d, ExitRule::grid_crossing, 0.0, 0.1, var, rng, 0).has_value());
    CHECK_FALSE(detect_exit(still, d, ExitRule::brownian_bridge, 0.0, 0.1, var, rng, 0).has_value());
    // Touching the boundary counts as an exit.
    const std::vector<State> touch{scalar_vec(0.5), scalar_vec(0.0)};
    CHECK(detect_exit(touch, d, ExitRule::grid_crossing, 0.0, 0.1, var, rng, 0)->step == 1);
}

TEST_CASE("increments have the right moments") {
    const ControlProblem pb = linear_problem(0.0, 1.0);
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.n_paths = 2000;
    cfg.seed = 4;
    const PathBatch b = simulate(pb, ControlPolicy::constant(scalar_vec(0.0)), 0.0, scalar_vec(0.0), cfg);
    double s = 0.0;
    double s2 = 0.0;
    double s4 = 0.0;
    int count = 0;
    for (int p = 0; p < b.n_paths; ++p) {
        for (int i = 0; i < b.n_steps; ++i) {
            const double w = b.increment(p, i)[0] / std::sqrt(cfg.dt);
            s += w;
            s2 += w * w;
            s4 += w * w * w * w;
            ++count;
        }
    }
    CHECK(std::abs(s / count) <= 4.0 / std::sqrt(count));
    CHECK(std::abs(s2 / count - 1.0) <= 4.0 * std::sqrt(2.0 / count));
    CHECK(std::abs(s4 / count - 3.0) <= 4.0 * std::sqrt(96.0 / count));
}

TEST_CASE("stored states satisfy the Euler recursion") {
    const ControlProblem pb = make_advertising_problem(AdvertisingParams{});
    const AdvertisingSolution sol(AdvertisingParams{});
    const auto policy = ControlPolicy::feedback([&](double t, const State& x) { return scalar_vec(sol.feedback(t, x[0])); });
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.n_paths = 50;
    const PathBatch b = simulate(pb, policy, 0.0, scalar_vec(2.0), cfg);
    double worst = 0.0;
    for (int p = 0; p < b.n_paths; ++p) {
        for (int i = 0; i < b.path_steps(p); ++i) {
            const double t = b.times[static_cast<std::size_t>(i)];
            const State x = b.state(p, i);
            const Control z = b.control(p, i);
            const State next = x + (pb.drift_uncontrolled(t, x) + pb.drift_controlled(t, x, z)) * b.times[1] +
                               pb.diffusion(t, x) * b.increment(p, i);
            worst = std::max(worst, (next - b.state(p, i + 1)).norm());
            CHECK(b.state(p, i + 1)[0] > 0.0);
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("shrinking the domain can only hasten the exit") {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_paths = 500;
    cfg.seed = 8;
    const auto policy = ControlPolicy::constant(scalar_vec(0.0));
    const PathBatch outer = simulate(brownian_exit(0.0, 1.0, 2.0), policy, 0.0, scalar_vec(0.5), cfg);
    const PathBatch inner = simulate(brownian_exit(0.1, 0.9, 2.0), policy, 0.0, scalar_vec(0.5), cfg);
    for (int p = 0; p < cfg.n_paths; ++p) {
        CHECK(inner.path_steps(p) <= outer.path_steps(p));
        if (outer.exits[static_cast<std::size_t>(p)]) {
            CHECK(inner.exits[static_cast<std::size_t>(p)].has_value());
        }
    }
}

TEST_CASE("results do not depend on the thread count") {
    const ControlProblem pb = linear_problem(-0.5, 0.7);
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.n_paths = 301;
    cfg.seed = 99;
    const auto policy = ControlPolicy::feedback([](double t, const State& x) { return scalar_vec(std::sin(t + x[0])); });
    const PathBatch one = simulate(pb, policy, 0.0, scalar_vec(0.2), cfg);
    cfg.threads = 4;
    const PathBatch four = simulate(pb, policy, 0.0, scalar_vec(0.2), cfg);
    CHECK(one.states == four.states);
    CHECK(one.controls == four.controls);
    // Each path is a function of its index alone.
    cfg.n_paths = 10;
    const PathBatch few = simulate(pb, policy, 0.0, scalar_vec(0.2), cfg);
    for (int i = 0; i <= few.n_steps; ++i) {
        CHECK(few.state(7, i)[0] == one.state(7, i)[0]);
    }
}

TEST_CASE("out-of-set controls are projected and counted") {
    const ControlProblem pb = linear_problem(0.0, 1.0);
    SimConfig cfg;
    cfg.dt = 0.1;
    cfg.n_paths = 3;
    const PathBatch b = simulate(pb, ControlPolicy::constant(scalar_vec(5.0)), 0.0, scalar_vec(0.0), cfg);
    CHECK(b.projected_controls == 3 * b.n_steps);
    CHECK(b.control(1, 4)[0] == 1.0);
}

TEST_CASE("open-loop schedules") {
    const auto pol = ControlPolicy::open_loop({0.0, 0.5}, {{scalar_vec(0.1), scalar_vec(0.2)}, {scalar_vec(-0.1), scalar_vec(-0.2)}});
    CHECK(pol.raw(0, 0.25, scalar_vec(0.0))[0] == 0.1);
    CHECK(pol.raw(0, 0.5, scalar_vec(0.0))[0] == 0.2);
    CHECK(pol.raw(3, 0.7, scalar_vec(0.0))[0] == -0.2);
    CHECK_THROWS_AS(ControlPolicy::open_loop({0.5, 0.0}, {{scalar_vec(0.0), scalar_vec(0.0)}}), DomainError);
}

TEST_CASE("invalid simulation setups") {
    const ControlProblem pb = brownian_exit(0.0, 1.0, 1.0);
    SimConfig cfg;
    cfg.dt = 0.5;
    CHECK_THROWS_AS(PathSimulator(pb, ControlPolicy::constant(scalar_vec(0.0)), cfg, 0.0), DomainError);
    cfg.dt = 0.01;
    CHECK_THROWS_AS(simulate(pb, ControlPolicy::constant(scalar_vec(0.0)), 0.0, scalar_vec(1.5), cfg), DomainError);
}

TEST_CASE("paths CSV") {
    const ControlProblem pb = brownian_exit(0.0, 1.0, 1.0);
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.n_paths = 4;
    const PathBatch b = simulate(pb, ControlPolicy::constant(scalar_vec(0.0)), 0.0, scalar_vec(0.5), cfg);
    std::ostringstream os;
    write_paths_csv(os, b, 10, 2);
    const std::string text = os.str();
    CHECK(text.rfind("path,step,t,x1,z1,exited\n", 0) == 0);
    CHECK(text.find("\n2,") == std::string::npos);
}
