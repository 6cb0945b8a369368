#pragma once

#include "hjbverify/problem.hpp"

#include <utility>

namespace hjbv {

/// Degenerate bilinear advertising model
///   dy = [-alpha y + z] ds + beta y dW,  U = [0, inf),
/// maximizing E{ -int z^{1+eta} ds + |y(T)|^{1+eta} sgn y(T) }.
///
/// The x < 0 coefficient b has two variants. `linear` is b' = k b, the
/// reference formula b = -e^{k(t-T)}. It does not satisfy the HJB for x < 0
/// (the Hamiltonian term is active there because dv/dx > 0). `hjb_consistent`
/// solves b' = -k b - eta (-b)^{1+1/eta}, which does. The x > 0 branch is the
/// same in both.
enum class NegativeBranch { linear, hjb_consistent };

struct AdvertisingParams {
    double eta = 0.5;
    double alpha = 1.0;
    double beta = 0.5;
    double T = 1.0;
    NegativeBranch negative_branch = NegativeBranch::linear;

    /// Global existence of a(t): beta^2 eta / 2 < alpha, plus parameter ranges.
    bool valid() const;
    /// Throws DomainError naming the violated condition.
    void require_valid() const;
    /// beta^2 eta (1+eta) / 2 - alpha (1+eta): rate shared by the a and b ODEs.
    double rate() const { return 0.5 * beta * beta * eta * (1.0 + eta) - alpha * (1.0 + eta); }
};

/// Closed-form solution: v(t,x) = a(t)|x|^{1+eta} for x > 0, 0 at x = 0,
/// b(t)|x|^{1+eta} for x < 0, with
///   a' = -k a - eta a^{1+1/eta}, a(T) = 1,   b(T) = -1,   k = rate(),
/// and b from the selected NegativeBranch. a is obtained through
/// w = a^{-1/eta}, which turns its ODE into the linear w' = (k/eta) w + 1;
/// the consistent b uses w = (-b)^{-1/eta} with w' = (k/eta) w - 1.
class AdvertisingSolution {
public:
    explicit AdvertisingSolution(AdvertisingParams params);

    const AdvertisingParams& params() const { return params_; }

    double a(double t) const;
    double b(double t) const;
    double value(double t, double x) const;
    double gradient(double t, double x) const;
    /// d^2 v / dx^2 away from x = 0 (zero at x = 0 by convention; it blows up there).
    double second_derivative(double t, double x) const;
    double time_derivative(double t, double x) const;
    double feedback(double t, double x) const;

    /// sup_{z >= 0} { z p - z^{1+eta} } and its maximizer.
    double hamiltonian(double p) const;
    double hamiltonian_argmax(double p) const;

private:
    AdvertisingParams params_;
};

std::pair<double, double> advertising_coefficients(const AdvertisingParams& params, double t);
/// Independent RK4 integration of both ODEs backward from T to t.
std::pair<double, double> advertising_coefficients_rk4(const AdvertisingParams& params, double t, double step);
double advertising_value(const AdvertisingParams& params, double t, double x);
double advertising_gradient(const AdvertisingParams& params, double t, double x);
double advertising_feedback(const AdvertisingParams& params, double t, double x);

/// Original-sense (maximize) problem with the closed-form Hamiltonian registered
/// and x = 0 declared as a kink.
ControlProblem make_advertising_problem(const AdvertisingParams& params);

enum class ExitDemoKind { constant, expected_exit_time };

/// Exit-time demos on O = (0,1) with dy = z ds + dW and U = [-1, 1].
///  - constant: l = 0, psi = phi = 1.5, T = 1; v = 1.5 everywhere.
///  - expected_exit_time: l = 1 + 2|z|, psi = phi = 0, T = 2. Since
///    |d/dx x(1-x)| <= 1 < 2 the optimal control is z = 0 and v(t,x) is the
///    expected (truncated) exit time of Brownian motion, ~ x(1-x).
ControlProblem make_exit_demo(ExitDemoKind kind);
inline constexpr double kExitDemoConstant = 1.5;
/// x(1-x) for the exit-time demo, the constant for the constant demo.
double exit_demo_reference(ExitDemoKind kind, double x);

/// Discounted problem dy = -y ds + dW, F1 = 0, l1 = cost, rate lambda:
/// J = cost / lambda for every policy.
ControlProblem make_discounted_constant(double cost, double rate);

} // namespace hjbv
