#include "hjbverify/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hjbv {

namespace {

constexpr double kControlStep = 1e-8;
constexpr int kMaxDoublings = 1000;
constexpr int kRisesToStop = 3;

bool lex_less(const Control& a, const Control& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            return a[i] < b[i];
        }
    }
    return false;
}

/// Keeps the best (value, control), breaking ties lexicographically.
struct Best {
    double value = std::numeric_limits<double>::infinity();
    Control z;

    void offer(double v, const Control& c) {
        if (std::isnan(v)) {
            return;
        }
        if (z.size() == 0 || v < value || (v == value && lex_less(c, z))) {
            value = v;
            z = c;
        }
    }
};

/// Golden-section search of f on [a, b], to width kControlStep.
template <typename F>
std::pair<double, double> golden_section(F&& f, double a, double b) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > kControlStep) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

} // namespace

double HamiltonianEval::gap_at(const Control& z) const {
    if (!problem) {
        throw DomainError("HamiltonianEval has no problem attached");
    }
    const double cv = problem->drift_controlled(t, x, z).dot(p) + problem->running_cost(t, x, z);
    return cv - value;
}

Hamiltonian::Hamiltonian(const ControlProblem& problem)
    : original_(std::make_shared<const ControlProblem>(problem)),
      canonical_(std::make_shared<const ControlProblem>(canonicalize(problem))) {}

double Hamiltonian::current_value(double t, const State& x, const Covector& p, const Control& z) const {
    const ControlProblem& pb = *canonical_;
    if (!pb.control_set.contains(z, 1e-9 * (1.0 + z.norm()))) {
        throw DomainError("control outside U passed to current_value");
    }
    return pb.drift_controlled(t, x, z).dot(p) + pb.running_cost(t, x, z);
}

HamiltonianPoint Hamiltonian::minimize_point(double t, const State& x, const Covector& p) const {
    const ControlProblem& pb = *canonical_;
    if (pb.closed_form_hamiltonian) {
        return (*pb.closed_form_hamiltonian)(t, x, p);
    }
    auto f = [&](const Control& z) { return pb.drift_controlled(t, x, z).dot(p) + pb.running_cost(t, x, z); };

    const ControlSet& U = pb.control_set;
    if (!U.is_box()) {
        std::vector<Control> pts = U.as_finite().points;
        std::sort(pts.begin(), pts.end(), lex_less);
        Best best;
        for (const auto& z : pts) {
            best.offer(f(z), z);
        }
        if (!std::isfinite(best.value)) {
            throw NumericalError("Hamiltonian not finite: no finite value over the finite control set");
        }
        return {best.value, best.z};
    }

    return scan_box(t, x, p, U.grid_resolution());
}

HamiltonianPoint Hamiltonian::scan_box(double t, const State& x, const Covector& p, int resolution) const {
    const ControlProblem& pb = *canonical_;
    auto f = [&](const Control& z) { return pb.drift_controlled(t, x, z).dot(p) + pb.running_cost(t, x, z); };
    const ControlSet& U = pb.control_set;
    const BoxControls& box = U.as_box();
    const int k = U.dimension();
    Control lo = box.lower;
    Control hi = box.upper;

    // Unbounded axes: double from the finite corner until H_CV rises three times in a row.
    for (int i = 0; i < k; ++i) {
        if (std::isfinite(hi[i])) {
            continue;
        }
        const double step = std::max(1.0, std::abs(lo[i]));
        Control z = lo;
        double prev = f(z);
        int rises = 0;
        double s = step;
        int doublings = 0;
        for (; doublings < kMaxDoublings && rises < kRisesToStop; ++doublings, s *= 2.0) {
            z[i] = lo[i] + s;
            const double val = f(z);
            if (!(val <= prev)) {
                ++rises;
            } else {
                rises = 0;
            }
            prev = val;
        }
        if (rises < kRisesToStop) {
            std::ostringstream os;
            os << "Hamiltonian not finite: H_CV does not turn upward along unbounded control axis " << i
               << " after " << kMaxDoublings << " doublings (non-coercive)";
            throw NumericalError(os.str());
        }
        hi[i] = z[i];
    }

    // Coarse tensor grid, lexicographic order.
    const int g = resolution;
    Control hstep(k);
    for (int i = 0; i < k; ++i) {
        hstep[i] = (hi[i] - lo[i]) / (g - 1);
    }
    Best best;
    std::vector<double> node_values;
    std::vector<Control> nodes;
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    Control z(k);
    while (true) {
        for (int i = 0; i < k; ++i) {
            z[i] = idx[static_cast<std::size_t>(i)] == g - 1 ? hi[i] : lo[i] + hstep[i] * idx[static_cast<std::size_t>(i)];
        }
        const double fz = f(z);
        best.offer(fz, z);
        if (k == 1) {
            node_values.push_back(fz);
            nodes.push_back(z);
        }
        int axis = k - 1;
        while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == g) {
            idx[static_cast<std::size_t>(axis)] = 0;
            --axis;
        }
        if (axis < 0) {
            break;
        }
    }
    if (!std::isfinite(best.value)) {
        throw NumericalError("Hamiltonian not finite on the control grid");
    }

    // Golden-section refinement around a start node, coordinate by coordinate.
    auto refine = [&](const Control& start, double fstart) {
        Control zr = start;
        double fr = fstart;
        for (int sweep = 0; sweep < (k == 1 ? 1 : 20); ++sweep) {
            const Control before = zr;
            for (int i = 0; i < k; ++i) {
                if (hstep[i] == 0.0) {
                    continue;
                }
                const double a = std::max(lo[i], zr[i] - hstep[i]);
                const double b = std::min(hi[i], zr[i] + hstep[i]);
                Control trial = zr;
                auto fi = [&](double v) {
                    trial[i] = v;
                    return f(trial);
                };
                const auto [zi, fi_min] = golden_section(fi, a, b);
                Control cand = zr;
                cand[i] = zi;
                if (fi_min < fr) {
                    zr = cand;
                    fr = fi_min;
                }
                for (const double end : {a, b}) {
                    cand[i] = end;
                    const double fe = f(cand);
                    if (fe < fr) {
                        zr = cand;
                        fr = fe;
                    }
                }
            }
            if ((zr - before).norm() <= kControlStep) {
                break;
            }
        }
        best.offer(fr, zr);
    };

    if (k == 1) {
        // Every discrete local minimum gets refined, so a finer nested grid cannot miss a basin the coarse one saw.
        // Plateaus only count through the best node, so flat H_CV stays cheap.
        const Control first_best = best.z;
        const double first_value = best.value;
        refine(first_best, first_value);
        const int n = static_cast<int>(node_values.size());
        for (int j = 0; j < n; ++j) {
            const double fj = node_values[static_cast<std::size_t>(j)];
            const double left = j == 0 ? std::numeric_limits<double>::infinity() : node_values[static_cast<std::size_t>(j - 1)];
            const double right = j == n - 1 ? std::numeric_limits<double>::infinity() : node_values[static_cast<std::size_t>(j + 1)];
            const bool local = left >= fj && right >= fj && (left > fj || right > fj);
            if (std::isfinite(fj) && local && nodes[static_cast<std::size_t>(j)] != first_best) {
                refine(nodes[static_cast<std::size_t>(j)], fj);
            }
        }
    } else {
        refine(best.z, best.value);
    }
    return {best.value, best.z};
}

HamiltonianEval Hamiltonian::minimize(double t, const State& x, const Covector& p) const {
    HamiltonianEval eval;
    const HamiltonianPoint pt = minimize_point(t, x, p);
    eval.value = pt.value;
    eval.argmin = pt.argopt;
    eval.method = canonical_->closed_form_hamiltonian ? HamiltonianMethod::closed_form
                                                       : HamiltonianMethod::grid_refined;
    eval.t = t;
    eval.x = x;
    eval.p = p;
    eval.problem = canonical_;
    if (!std::isfinite(eval.value)) {
        throw NumericalError("Hamiltonian not finite");
    }
    if (eval.method == HamiltonianMethod::grid_refined && canonical_->control_set.is_box()) {
        // A rescan at twice the resolution must not find a lower value.
        const double fine = scan_box(t, x, p, 2 * canonical_->control_set.grid_resolution() - 1).value;
        if (fine < eval.value - eval.tol_gap()) {
            eval.scan_irregular = true;
        }
    }
    return eval;
}

double Hamiltonian::unclamped_gap(double t, const State& x, const Covector& p, const Control& z) const {
    const double cv = current_value(t, x, p, z);
    return cv - minimize_point(t, x, p).value;
}

double Hamiltonian::duality_gap(double t, const State& x, const Covector& p, const Control& z) const {
    const double cv = current_value(t, x, p, z);
    const double h = minimize_point(t, x, p).value;
    const double gap = cv - h;
    if (gap <= gap_tolerance(h)) {
        return 0.0;
    }
    return gap;
}

double current_value(const ControlProblem& problem, double t, const State& x, const Covector& p, const Control& z) {
    return Hamiltonian(problem).current_value(t, x, p, z);
}

HamiltonianEval minimize(const ControlProblem& problem, double t, const State& x, const Covector& p) {
    return Hamiltonian(problem).minimize(t, x, p);
}

double duality_gap(const ControlProblem& problem, double t, const State& x, const Covector& p, const Control& z) {
    return Hamiltonian(problem).duality_gap(t, x, p, z);
}

HamiltonianPoint optimized_hamiltonian(const ControlProblem& problem, double t, const State& x, const Covector& p) {
    const double sign = sense_sign(problem);
    const Hamiltonian h(problem);
    HamiltonianPoint pt = h.minimize_point(t, x, Covector(sign * p));
    pt.value *= sign;
    return pt;
}

FeedbackFn feedback_map(const ControlProblem& problem, GradientField value_gradient) {
    auto h = std::make_shared<const Hamiltonian>(problem);
    const double sign = sense_sign(problem);
    return [h, sign, grad = std::move(value_gradient)](double t, const State& x) {
        const Covector p = grad(t, x);
        if (!p.allFinite()) {
            throw DomainError("gradient field is not finite at a queried point");
        }
        return h->minimize_point(t, x, Covector(sign * p)).argopt;
    };
}

} // namespace hjbv
