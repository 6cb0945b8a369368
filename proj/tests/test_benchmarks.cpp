#include "hjbverify/benchmarks.hpp"
#include "hjbverify/hamiltonian.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hjbv;

TEST_CASE("advertising coefficients") {
    const AdvertisingParams p;
    const auto [aT, bT] = advertising_coefficients(p, p.T);
    CHECK(aT == 1.0);
    CHECK(bT == -1.0);
    const auto [a0, b0] = advertising_coefficients(p, 0.0);
    CHECK(b0 == doctest::Approx(-std::exp(1.40625)).epsilon(1e-14));
    // Bernoulli oracle: w' = -2.8125 w + 1 in forward form, w(T) = 1.
    const double r = -2.8125;
    const double w0 = std::exp(-r) + (std::exp(-r) - 1.0) / r;
    CHECK(w0 == doctest::Approx(11.0866).epsilon(1e-5));
    CHECK(a0 == doctest::Approx(1.0 / std::sqrt(w0)).epsilon(1e-13));
    CHECK(a0 == doctest::Approx(0.30033).epsilon(1e-5));
    const auto [ar, br] = advertising_coefficients_rk4(p, 0.0, p.T * 1e-4);
    CHECK(std::abs(ar - a0) / a0 <= 1e-8);
    CHECK(std::abs(br - b0) / std::abs(b0) <= 1e-8);
}

TEST_CASE("advertising parameter validity") {
    CHECK(AdvertisingParams{}.valid());
    CHECK_FALSE((AdvertisingParams{0.5, 0.01, 2.0, 1.0}.valid()));
    CHECK_THROWS_AS((AdvertisingParams{0.5, 0.01, 2.0, 1.0}.require_valid()), DomainError);
    CHECK_THROWS_AS((AdvertisingParams{1.5, 1.0, 0.5, 1.0}.require_valid()), DomainError);
    CHECK_THROWS_AS(make_advertising_problem(AdvertisingParams{0.5, 0.01, 2.0, 1.0}), DomainError);
}

TEST_CASE("advertising value, gradient and feedback") {
    const AdvertisingParams p;
    const AdvertisingSolution s(p);
    CHECK(s.value(0.3, 0.0) == 0.0);
    CHECK(s.gradient(0.3, 0.0) == 0.0);
    CHECK(s.value(0.0, 2.0) == doctest::Approx(0.8494).epsilon(1e-4));
    CHECK(s.value(p.T, -1.0) == -1.0);
    CHECK(advertising_value(p, 0.0, 2.0) == s.value(0.0, 2.0));
    CHECK(s.feedback(0.0, 0.0) == 0.0);
    CHECK(s.feedback(0.0, 2.0) == doctest::Approx(0.1804).epsilon(1e-3));
    CHECK(s.feedback(p.T, -1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(advertising_feedback(p, 0.5, -0.7) >= 0.0);
    // Continuity of v and its gradient across x = 0.
    CHECK(std::abs(s.value(0.5, 1e-9)) < 1e-12);
    CHECK(std::abs(s.value(0.5, -1e-9)) < 1e-12);
    CHECK(std::abs(s.gradient(0.5, 1e-9)) < 1e-4);
    CHECK(std::abs(s.gradient(0.5, -1e-9)) < 1e-3);
    for (const double t : {0.0, 0.4, 1.0}) {
        CHECK(s.a(t) > 0.0);
        CHECK(s.b(t) < 0.0);
    }
}

TEST_CASE("ODE residuals of the closed forms") {
    const AdvertisingParams p;
    const AdvertisingSolution s(p);
    const double k = p.rate();
    const double eta = p.eta;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = 0.001 + 0.998 * i / 999.0;
        const double h = 1e-5;
        const double da = (s.a(t + h) - s.a(t - h)) / (2.0 * h);
        const double db = (s.b(t + h) - s.b(t - h)) / (2.0 * h);
        worst = std::max(worst, std::abs(da + k * s.a(t) + eta * std::pow(s.a(t), 1.0 + 1.0 / eta)));
        worst = std::max(worst, std::abs(db - k * s.b(t)));
    }
    CHECK(worst <= 1e-9);
}

namespace {

// Worst relative sup-form residual v_t + 1/2 beta^2 x^2 v_xx - alpha x v_x + H(v_x) on one side of 0.
double hjb_residual(const AdvertisingParams& p, double sign) {
    const AdvertisingSolution s(p);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> ut(0.0, p.T);
    std::uniform_real_distribution<double> ux(0.05, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double t = ut(gen);
        const double x = sign * ux(gen);
        const double res = s.time_derivative(t, x) + 0.5 * p.beta * p.beta * x * x * s.second_derivative(t, x) -
                           p.alpha * x * s.gradient(t, x) + s.hamiltonian(s.gradient(t, x));
        worst = std::max(worst, std::abs(res) / (1.0 + std::abs(s.value(t, x))));
    }
    return worst;
}

} // namespace

TEST_CASE("closed-form value solves the HJB away from x = 0") {
    AdvertisingParams p;
    CHECK(hjb_residual(p, 1.0) <= 1e-8);
    // The reference b' = k b leaves the active Hamiltonian term unbalanced for x < 0.
    CHECK(hjb_residual(p, -1.0) > 1e-2);
    p.negative_branch = NegativeBranch::hjb_consistent;
    CHECK(hjb_residual(p, 1.0) <= 1e-8);
    CHECK(hjb_residual(p, -1.0) <= 1e-8);
}

TEST_CASE("consistent negative branch") {
    AdvertisingParams p;
    p.negative_branch = NegativeBranch::hjb_consistent;
    const AdvertisingSolution s(p);
    CHECK(s.b(p.T) == -1.0);
    // Bernoulli oracle for c = -b: w = c^{-1/eta}, w' = (k/eta) w - 1, w(T) = 1.
    const double r = p.rate() / p.eta;
    const double w0 = 1.0 / r + (1.0 - 1.0 / r) * std::exp(-r * p.T);
    CHECK(s.b(0.0) == doctest::Approx(-std::pow(w0, -p.eta)).epsilon(1e-12));
    const auto [ar, br] = advertising_coefficients_rk4(p, 0.0, p.T * 1e-4);
    CHECK(std::abs(br - s.b(0.0)) / std::abs(s.b(0.0)) <= 1e-8);
    CHECK(ar == doctest::Approx(s.a(0.0)).epsilon(1e-8));
    double worst = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double t = p.T * i / 1000.0;
        const double h = 1e-5;
        const double db = (s.b(t + h) - s.b(t - h)) / (2.0 * h);
        worst = std::max(worst, std::abs(db + p.rate() * s.b(t) + p.eta * std::pow(-s.b(t), 1.0 + 1.0 / p.eta)));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("feedback agrees with the generic argmax") {
    const AdvertisingParams p;
    const AdvertisingSolution s(p);
    const ControlProblem pb = make_advertising_problem(p);
    const FeedbackFn g = feedback_map(pb, [&](double t, const State& x) { return scalar_vec(s.gradient(t, x[0])); });
    for (const double t : {0.0, 0.25, 0.75, 1.0}) {
        for (const double x : {-2.0, -0.3, 0.0, 0.3, 2.0, 5.0}) {
            CHECK(std::abs(g(t, scalar_vec(x))[0] - s.feedback(t, x)) <= 1e-10);
        }
    }
}

TEST_CASE("exit demos") {
    const ControlProblem c = make_exit_demo(ExitDemoKind::constant);
    CHECK(c.boundary_cost(0.3, scalar_vec(1.0)) == kExitDemoConstant);
    CHECK(c.terminal_cost(scalar_vec(0.4)) == kExitDemoConstant);
    CHECK(exit_demo_reference(ExitDemoKind::expected_exit_time, 0.5) == 0.25);
    const ControlProblem e = make_exit_demo(ExitDemoKind::expected_exit_time);
    // z = 0 is optimal wherever |p| <= 2.
    CHECK(minimize(e, 0.0, scalar_vec(0.5), scalar_vec(1.0)).argmin[0] == doctest::Approx(0.0).epsilon(1e-8));
}
