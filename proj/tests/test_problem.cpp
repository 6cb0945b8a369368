#include "hjbverify/benchmarks.hpp"
#include "hjbverify/hamiltonian.hpp"
#include "hjbverify/problem.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>

using namespace hjbv;
using hjbv::testing::linear_problem;
using hjbv::testing::scalar_mat;

namespace {

SampleRegion region1(double lo, double hi, double T = 1.0) {
    return SampleRegion{0.0, T, scalar_vec(lo), scalar_vec(hi)};
}

} // namespace

TEST_CASE("control sets") {
    const ControlSet box = ControlSet::box(scalar_vec(0.0), scalar_vec(INFINITY));
    CHECK(box.contains(scalar_vec(1e9)));
    CHECK_FALSE(box.contains(scalar_vec(-1e-6)));
    CHECK(box.project(scalar_vec(-2.0))[0] == 0.0);
    const ControlSet fin = ControlSet::finite({scalar_vec(0.0), scalar_vec(1.0), scalar_vec(2.0)});
    CHECK(fin.contains(scalar_vec(1.0)));
    CHECK_FALSE(fin.contains(scalar_vec(0.5)));
    CHECK(fin.project(scalar_vec(1.4))[0] == 1.0);
    CHECK_THROWS_AS(ControlSet::box(scalar_vec(1.0), scalar_vec(0.0)), DomainError);
    CHECK_THROWS_AS(ControlSet::finite({}), DomainError);
}

TEST_CASE("domain signed distance") {
    const Domain d = Domain::interval(0.0, 1.0);
    CHECK(d.signed_distance(d.centroid()) < 0.0);
    CHECK(std::abs(d.signed_distance(scalar_vec(0.0))) <= 1e-12);
    CHECK(std::abs(d.signed_distance(scalar_vec(1.0))) <= 1e-12);
    CHECK(d.signed_distance(scalar_vec(1.1)) == doctest::Approx(0.1));
    CHECK(d.project_to_boundary(scalar_vec(1.1))[0] == 1.0);
    CHECK(d.project_to_boundary(scalar_vec(0.3))[0] == 0.0);
    const Domain sq = Domain::box({{0.0, 1.0}, {0.0, 2.0}});
    State x(2);
    x << 0.5, 1.9;
    CHECK(sq.signed_distance(x) == doctest::Approx(-0.1));
}

TEST_CASE("validate rejects incompatible exit data") {
    ControlProblem pb = make_exit_demo(ExitDemoKind::constant);
    CHECK_NOTHROW(validate(pb));
    pb.terminal_cost = [](const State&) { return 2.0; };
    CHECK_THROWS_AS(validate(pb), DomainError);
}

TEST_CASE("probe: linear coefficients") {
    const ControlProblem pb = linear_problem(-1.0, 1.0);
    // F1 = z is state independent; B = 1.
    const HypothesisReport r = probe_hypotheses(pb, 1000, 3, region1(-2.0, 2.0));
    CHECK(r.lipschitz_F0_estimate <= 1.0 + 1e-12);
    CHECK(r.lipschitz_F0_estimate == doctest::Approx(1.0));
    CHECK(r.ellipticity_lambda0_estimate == doctest::Approx(1.0));
    CHECK(r.samples_used == 1000);

    ControlProblem zero_f1 = pb;
    zero_f1.drift_controlled = [](double, const State& x, const Control&) { return State(State::Zero(x.size())); };
    CHECK(probe_hypotheses(zero_f1, 500, 3, region1(-2.0, 2.0)).girsanov_sup_estimate == 0.0);
}

TEST_CASE("probe: advertising Girsanov quantity is unbounded near x = 0") {
    const ControlProblem pb = make_advertising_problem(AdvertisingParams{});
    const HypothesisReport near = probe_hypotheses(pb, 20000, 5, region1(0.0, 1.0));
    CHECK(near.girsanov_unbounded);
    const HypothesisReport far = probe_hypotheses(pb, 20000, 5, region1(0.5, 5.0));
    CHECK_FALSE(far.girsanov_unbounded);
    CHECK(far.girsanov_sup_estimate <= 10.0 / (0.5 * 0.5) + 1e-9);
}

TEST_CASE("probe: exit demo is uniformly elliptic") {
    const ControlProblem pb = make_exit_demo(ExitDemoKind::expected_exit_time);
    CHECK(probe_hypotheses(pb, 200, 1, region1(0.0, 1.0, 2.0)).ellipticity_lambda0_estimate == doctest::Approx(1.0));
}

TEST_CASE("probe: determinism and monotonicity in samples") {
    const ControlProblem pb = make_advertising_problem(AdvertisingParams{});
    const auto a = probe_hypotheses(pb, 2000, 9, region1(0.1, 3.0));
    const auto b = probe_hypotheses(pb, 2000, 9, region1(0.1, 3.0));
    CHECK(a.lipschitz_F0_estimate == b.lipschitz_F0_estimate);
    CHECK(a.girsanov_sup_estimate == b.girsanov_sup_estimate);
    CHECK(a.ellipticity_lambda0_estimate == b.ellipticity_lambda0_estimate);
    const auto small = probe_hypotheses(pb, 200, 9, region1(0.1, 3.0));
    CHECK(small.lipschitz_F0_estimate <= a.lipschitz_F0_estimate);
    CHECK(small.girsanov_sup_estimate <= a.girsanov_sup_estimate);
    // lambda0 is a sampled minimum, so it can only go down as samples are added.
    CHECK(small.ellipticity_lambda0_estimate >= a.ellipticity_lambda0_estimate);
}

TEST_CASE("probe: affine drift attains the operator norm") {
    ControlProblem pb;
    pb.name = "affine 2d";
    pb.dimension = 2;
    pb.noise_dimension = 2;
    Mat A(2, 2);
    A << 2.0, 1.0, 0.0, 1.0;
    pb.drift_uncontrolled = [A](double, const State& x) { return State(A * x); };
    pb.drift_controlled = [](double, const State&, const Control&) { return State(State::Zero(2)); };
    pb.diffusion = [](double, const State&) { return Mat(Mat::Identity(2, 2)); };
    pb.running_cost = [](double, const State&, const Control&) { return 0.0; };
    pb.terminal_cost = [](const State&) { return 0.0; };
    State lo(2), hi(2);
    lo << -1.0, -1.0;
    hi << 1.0, 1.0;
    const auto r = probe_hypotheses(pb, 100000, 2, SampleRegion{0.0, 1.0, lo, hi});
    const double norm = Eigen::JacobiSVD<Eigen::Matrix2d>(Eigen::Matrix2d(A)).singularValues()[0];
    CHECK(r.lipschitz_F0_estimate <= norm + 1e-12);
    CHECK(r.lipschitz_F0_estimate >= 0.99 * norm);
    CHECK(r.ellipticity_lambda0_estimate == doctest::Approx(1.0));
}

TEST_CASE("probe: non-finite coefficients are reported") {
    ControlProblem pb = linear_problem(-1.0, 1.0);
    pb.drift_uncontrolled = [](double, const State& x) { return State(scalar_vec(x[0] > 0.5 ? NAN : x[0])); };
    CHECK_THROWS_AS(probe_hypotheses(pb, 100, 1, region1(0.0, 1.0)), DomainError);
}

TEST_CASE("canonicalize") {
    const ControlProblem lin = linear_problem(-1.0, 1.0);
    const ControlProblem c = canonicalize(lin);
    CHECK(c.sense == Sense::minimize);
    CHECK(c.running_cost(0.0, scalar_vec(1.0), scalar_vec(0.5)) == lin.running_cost(0.0, scalar_vec(1.0), scalar_vec(0.5)));

    const ControlProblem ad = make_advertising_problem(AdvertisingParams{});
    const ControlProblem once = canonicalize(ad);
    const ControlProblem twice = canonicalize(once);
    CHECK(once.sense == Sense::minimize);
    const State x = scalar_vec(1.7);
    const Control z = scalar_vec(0.8);
    CHECK(once.running_cost(0.3, x, z) == doctest::Approx(std::pow(0.8, 1.5)));
    CHECK(once.terminal_cost(x) == doctest::Approx(-std::pow(1.7, 1.5)));
    CHECK(twice.running_cost(0.3, x, z) == once.running_cost(0.3, x, z));
    CHECK(twice.terminal_cost(x) == once.terminal_cost(x));
    for (const double p : {-2.0, -0.3, 0.0, 0.7, 1.5, 4.0}) {
        const auto h1 = (*once.closed_form_hamiltonian)(0.2, x, scalar_vec(p));
        const auto h2 = (*twice.closed_form_hamiltonian)(0.2, x, scalar_vec(p));
        CHECK(h1.value == h2.value);
        CHECK(h1.argopt[0] == h2.argopt[0]);
    }
}

TEST_CASE("canonicalize preserves the optimizer") {
    const ControlProblem ad = make_advertising_problem(AdvertisingParams{});
    const AdvertisingSolution sol(AdvertisingParams{});
    const Hamiltonian h(ad);
    for (const double p : {-1.0, 0.0, 0.4, 1.5, 3.0}) {
        // Canonical covector of the original gradient p is -p.
        const auto ev = h.minimize(0.5, scalar_vec(1.0), scalar_vec(-p));
        CHECK(ev.argmin[0] == doctest::Approx(sol.hamiltonian_argmax(p)).epsilon(1e-12));
        CHECK(-ev.value == doctest::Approx(sol.hamiltonian(p)).epsilon(1e-12));
    }
}
