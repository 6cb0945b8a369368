#include "hjbverify/benchmarks.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hjbv {

bool AdvertisingParams::valid() const {
    return eta > 0.0 && eta < 1.0 && alpha > 0.0 && beta > 0.0 && T > 0.0 && 0.5 * beta * beta * eta < alpha;
}

void AdvertisingParams::require_valid() const {
    std::ostringstream os;
    if (!(eta > 0.0 && eta < 1.0)) {
        os << "eta must lie in (0,1), got " << eta;
    } else if (!(alpha > 0.0) || !(beta > 0.0)) {
        os << "alpha and beta must be positive";
    } else if (!(T > 0.0)) {
        os << "horizon T must be positive";
    } else if (!(0.5 * beta * beta * eta < alpha)) {
        os << "advertising parameters violate beta^2 eta / 2 < alpha (" << 0.5 * beta * beta * eta
           << " >= " << alpha << ")";
    } else {
        return;
    }
    throw DomainError(os.str());
}

AdvertisingSolution::AdvertisingSolution(AdvertisingParams params) : params_(params) {
    params_.require_valid();
}

double AdvertisingSolution::a(double t) const {
    const double r = params_.rate() / params_.eta;
    const double s = r * (t - params_.T);
    // w = e^{rs} + (e^{rs} - 1)/r, written with expm1 for small r.
    const double w = std::exp(s) + std::expm1(s) / r;
    return std::pow(w, -params_.eta);
}

double AdvertisingSolution::b(double t) const {
    if (params_.negative_branch == NegativeBranch::linear) {
        return -std::exp(params_.rate() * (t - params_.T));
    }
    const double r = params_.rate() / params_.eta;
    const double s = r * (t - params_.T);
    const double w = std::exp(s) - std::expm1(s) / r;
    return -std::pow(w, -params_.eta);
}

double AdvertisingSolution::value(double t, double x) const {
    if (x == 0.0) {
        return 0.0;
    }
    const double m = std::pow(std::abs(x), 1.0 + params_.eta);
    return x > 0.0 ? a(t) * m : b(t) * m;
}

double AdvertisingSolution::gradient(double t, double x) const {
    if (x == 0.0) {
        return 0.0;
    }
    const double m = (1.0 + params_.eta) * std::pow(std::abs(x), params_.eta);
    return x > 0.0 ? a(t) * m : -b(t) * m;
}

double AdvertisingSolution::second_derivative(double t, double x) const {
    if (x == 0.0) {
        return 0.0;
    }
    const double eta = params_.eta;
    const double m = (1.0 + eta) * eta * std::pow(std::abs(x), eta - 1.0);
    return x > 0.0 ? a(t) * m : b(t) * m;
}

double AdvertisingSolution::time_derivative(double t, double x) const {
    if (x == 0.0) {
        return 0.0;
    }
    const double eta = params_.eta;
    const double k = params_.rate();
    const double m = std::pow(std::abs(x), 1.0 + eta);
    if (x > 0.0) {
        const double at = a(t);
        return (-k * at - eta * std::pow(at, 1.0 + 1.0 / eta)) * m;
    }
    const double bt = b(t);
    if (params_.negative_branch == NegativeBranch::linear) {
        return k * bt * m;
    }
    return (-k * bt - eta * std::pow(-bt, 1.0 + 1.0 / eta)) * m;
}

double AdvertisingSolution::feedback(double t, double x) const {
    if (x == 0.0) {
        return 0.0;
    }
    const double inv_eta = 1.0 / params_.eta;
    return x > 0.0 ? std::pow(a(t), inv_eta) * std::abs(x) : std::pow(-b(t), inv_eta) * std::abs(x);
}

double AdvertisingSolution::hamiltonian(double p) const {
    const double eta = params_.eta;
    const double q = std::max(p, 0.0) / (1.0 + eta);
    return eta * std::pow(q, 1.0 + 1.0 / eta);
}

double AdvertisingSolution::hamiltonian_argmax(double p) const {
    const double q = std::max(p, 0.0) / (1.0 + params_.eta);
    return std::pow(q, 1.0 / params_.eta);
}

std::pair<double, double> advertising_coefficients(const AdvertisingParams& params, double t) {
    if (!(t >= 0.0 && t <= params.T)) {
        throw DomainError("advertising coefficients need 0 <= t <= T");
    }
    const AdvertisingSolution sol(params);
    return {sol.a(t), sol.b(t)};
}

std::pair<double, double> advertising_coefficients_rk4(const AdvertisingParams& params, double t, double step) {
    params.require_valid();
    const double k = params.rate();
    const double eta = params.eta;
    auto fa = [&](double a) { return -k * a - eta * std::pow(a, 1.0 + 1.0 / eta); };
    const bool linear = params.negative_branch == NegativeBranch::linear;
    auto fb = [&](double b) { return linear ? k * b : -k * b - eta * std::pow(std::max(-b, 0.0), 1.0 + 1.0 / eta); };
    const int n = std::max(1, static_cast<int>(std::ceil((params.T - t) / step - 1e-9)));
    const double h = -(params.T - t) / n; // backward in time
    double a = 1.0;
    double b = -1.0;
    for (int i = 0; i < n; ++i) {
        const double a1 = fa(a);
        const double a2 = fa(a + 0.5 * h * a1);
        const double a3 = fa(a + 0.5 * h * a2);
        const double a4 = fa(a + h * a3);
        a += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        const double b1 = fb(b);
        const double b2 = fb(b + 0.5 * h * b1);
        const double b3 = fb(b + 0.5 * h * b2);
        const double b4 = fb(b + h * b3);
        b += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    return {a, b};
}

double advertising_value(const AdvertisingParams& params, double t, double x) {
    return AdvertisingSolution(params).value(t, x);
}

double advertising_gradient(const AdvertisingParams& params, double t, double x) {
    return AdvertisingSolution(params).gradient(t, x);
}

double advertising_feedback(const AdvertisingParams& params, double t, double x) {
    return AdvertisingSolution(params).feedback(t, x);
}

ControlProblem make_advertising_problem(const AdvertisingParams& params) {
    params.require_valid();
    const double eta = params.eta;
    const double alpha = params.alpha;
    const double beta = params.beta;

    ControlProblem pb;
    pb.name = "advertising";
    pb.dimension = 1;
    pb.noise_dimension = 1;
    pb.horizon = FiniteHorizon{params.T};
    pb.drift_uncontrolled = [alpha](double, const State& x) { return State(-alpha * x); };
    pb.drift_controlled = [](double, const State&, const Control& z) { return State(z); };
    pb.diffusion = [beta](double, const State& x) {
        Mat B(1, 1);
        B(0, 0) = beta * x[0];
        return B;
    };
    pb.running_cost = [eta](double, const State&, const Control& z) { return -std::pow(z[0], 1.0 + eta); };
    pb.terminal_cost = [eta](const State& x) {
        const double m = std::pow(std::abs(x[0]), 1.0 + eta);
        return x[0] > 0.0 ? m : (x[0] < 0.0 ? -m : 0.0);
    };
    pb.control_set = ControlSet::box(scalar_vec(0.0), scalar_vec(std::numeric_limits<double>::infinity()));
    pb.sense = Sense::maximize;
    pb.closed_form_hamiltonian = [eta](double, const State&, const Covector& p) {
        const double q = std::max(p[0], 0.0) / (1.0 + eta);
        return HamiltonianPoint{eta * std::pow(q, 1.0 + 1.0 / eta), scalar_vec(std::pow(q, 1.0 / eta))};
    };
    pb.kinks = {0.0};
    return pb;
}

ControlProblem make_exit_demo(ExitDemoKind kind) {
    ControlProblem pb;
    pb.dimension = 1;
    pb.noise_dimension = 1;
    pb.drift_uncontrolled = [](double, const State& x) { return State(State::Zero(x.size())); };
    pb.drift_controlled = [](double, const State&, const Control& z) { return State(z); };
    pb.diffusion = [](double, const State&) { return Mat(Mat::Identity(1, 1)); };
    pb.control_set = ControlSet::box(scalar_vec(-1.0), scalar_vec(1.0));
    pb.domain = Domain::interval(0.0, 1.0);
    pb.sense = Sense::minimize;
    if (kind == ExitDemoKind::constant) {
        pb.name = "exit_demo_constant";
        pb.horizon = FiniteHorizon{1.0};
        pb.running_cost = [](double, const State&, const Control&) { return 0.0; };
        pb.terminal_cost = [](const State&) { return kExitDemoConstant; };
        pb.boundary_cost = [](double, const State&) { return kExitDemoConstant; };
        pb.closed_form_hamiltonian = [](double, const State&, const Covector& p) {
            const double z = p[0] > 0.0 ? -1.0 : (p[0] < 0.0 ? 1.0 : 0.0);
            return HamiltonianPoint{-std::abs(p[0]), scalar_vec(z)};
        };
    } else {
        pb.name = "exit_demo_expected_exit_time";
        pb.horizon = FiniteHorizon{2.0};
        pb.running_cost = [](double, const State&, const Control& z) { return 1.0 + 2.0 * std::abs(z[0]); };
        pb.terminal_cost = [](const State&) { return 0.0; };
        pb.boundary_cost = [](double, const State&) { return 0.0; };
        // min over |z| <= 1 of z p + 1 + 2|z|: z = 0 unless |p| > 2.
        pb.closed_form_hamiltonian = [](double, const State&, const Covector& p) {
            const double excess = std::abs(p[0]) - 2.0;
            if (excess <= 0.0) {
                return HamiltonianPoint{1.0, scalar_vec(0.0)};
            }
            return HamiltonianPoint{1.0 - excess, scalar_vec(p[0] > 0.0 ? -1.0 : 1.0)};
        };
    }
    return pb;
}

double exit_demo_reference(ExitDemoKind kind, double x) {
    return kind == ExitDemoKind::constant ? kExitDemoConstant : x * (1.0 - x);
}

ControlProblem make_discounted_constant(double cost, double rate) {
    if (!(rate > 0.0)) {
        throw DomainError("discount rate must be positive");
    }
    ControlProblem pb;
    pb.name = "discounted_constant";
    pb.dimension = 1;
    pb.noise_dimension = 1;
    pb.horizon = DiscountedInfinite{rate};
    pb.drift_uncontrolled = [](double, const State& x) { return State(-x); };
    pb.drift_controlled = [](double, const State& x, const Control&) { return State(State::Zero(x.size())); };
    pb.diffusion = [](double, const State&) { return Mat(Mat::Identity(1, 1)); };
    pb.running_cost = [cost](double, const State&, const Control&) { return cost; };
    pb.control_set = ControlSet::box(scalar_vec(-1.0), scalar_vec(1.0));
    pb.sense = Sense::minimize;
    pb.closed_form_hamiltonian = [cost](double, const State&, const Covector&) {
        return HamiltonianPoint{cost, scalar_vec(0.0)};
    };
    return pb;
}

} // namespace hjbv
