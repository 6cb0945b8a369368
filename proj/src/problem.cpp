#include "hjbverify/problem.hpp"
#include "hjbverify/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hjbv {

namespace {

std::string describe(double t, const State& x) {
    std::ostringstream os;
    os << "(t=" << t << ", x=[";
    for (int i = 0; i < x.size(); ++i) {
        os << (i ? ", " : "") << x[i];
    }
    os << "])";
    return os.str();
}

void require_finite(const Vec& v, const char* what, double t, const State& x) {
    if (!v.allFinite()) {
        throw DomainError(std::string(what) + " is not finite at " + describe(t, x));
    }
}

/// |B^+ F1|, infinite when F1 leaves the range of B.
double girsanov_norm(const Mat& B, const State& f1) {
    Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    svd.setThreshold(1e-14);
    if (smax == 0.0) {
        return f1.norm() > 1e-10 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    const Vec sol = svd.solve(f1);
    const double resid = (B * sol - f1).norm();
    return resid > 1e-10 ? std::numeric_limits<double>::infinity() : sol.norm();
}

} // namespace

ControlSet ControlSet::box(Control lower, Control upper, int grid_resolution) {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw DomainError("control box bounds must be nonempty and of equal dimension");
    }
    for (int i = 0; i < lower.size(); ++i) {
        if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i])) {
            throw DomainError("control box requires finite lower <= upper componentwise");
        }
    }
    if (grid_resolution < 2) {
        throw DomainError("control grid_resolution must be >= 2");
    }
    ControlSet set;
    set.shape_ = BoxControls{std::move(lower), std::move(upper)};
    set.grid_resolution_ = grid_resolution;
    return set;
}

ControlSet ControlSet::finite(std::vector<Control> points) {
    if (points.empty()) {
        throw DomainError("finite control set must be nonempty");
    }
    const auto k = points.front().size();
    for (const auto& p : points) {
        if (p.size() != k) {
            throw DomainError("finite control points must share one dimension");
        }
    }
    ControlSet set;
    set.shape_ = FiniteControls{std::move(points)};
    set.grid_resolution_ = 1;
    return set;
}

int ControlSet::dimension() const {
    if (is_box()) {
        return static_cast<int>(as_box().lower.size());
    }
    return static_cast<int>(as_finite().points.front().size());
}

bool ControlSet::contains(const Control& z, double tol) const {
    if (z.size() != dimension()) {
        return false;
    }
    if (is_box()) {
        const auto& b = as_box();
        for (int i = 0; i < z.size(); ++i) {
            if (z[i] < b.lower[i] - tol || z[i] > b.upper[i] + tol) {
                return false;
            }
        }
        return true;
    }
    return std::any_of(as_finite().points.begin(), as_finite().points.end(),
                       [&](const Control& p) { return (p - z).norm() <= tol; });
}

Control ControlSet::project(const Control& z) const {
    if (is_box()) {
        const auto& b = as_box();
        Control out = z;
        for (int i = 0; i < z.size(); ++i) {
            out[i] = std::clamp(z[i], b.lower[i], b.upper[i]);
        }
        return out;
    }
    const auto& pts = as_finite().points;
    const Control* best = &pts.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        const double d = (p - z).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = &p;
        }
    }
    return *best;
}

Domain Domain::interval(double a, double b) {
    return box({{a, b}});
}

Domain Domain::box(std::vector<std::pair<double, double>> axes) {
    if (axes.empty() || static_cast<int>(axes.size()) > kMaxDim) {
        throw DomainError("domain must have between 1 and 4 axes");
    }
    for (const auto& [lo, hi] : axes) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw DomainError("domain axes must be finite with lo < hi");
        }
    }
    Domain d;
    d.axes_ = std::move(axes);
    return d;
}

double Domain::signed_distance(const State& x) const {
    // Box SDF: q = |x - c| - half extents.
    double outside_sq = 0.0;
    double inside_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < dimension(); ++i) {
        const auto [lo, hi] = axes_[static_cast<std::size_t>(i)];
        const double q = std::max(lo - x[i], x[i] - hi);
        outside_sq += q > 0.0 ? q * q : 0.0;
        inside_max = std::max(inside_max, q);
    }
    if (outside_sq > 0.0) {
        return std::sqrt(outside_sq);
    }
    return inside_max;
}

State Domain::project_to_boundary(const State& x) const {
    State out = x;
    bool outside = false;
    for (int i = 0; i < dimension(); ++i) {
        const auto [lo, hi] = axes_[static_cast<std::size_t>(i)];
        if (x[i] < lo || x[i] > hi) {
            outside = true;
        }
        out[i] = std::clamp(x[i], lo, hi);
    }
    if (outside) {
        return out;
    }
    // Inside or on the boundary: snap the nearest face.
    int best_axis = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    double best_value = 0.0;
    for (int i = 0; i < dimension(); ++i) {
        const auto [lo, hi] = axes_[static_cast<std::size_t>(i)];
        if (x[i] - lo < best_gap) {
            best_gap = x[i] - lo;
            best_axis = i;
            best_value = lo;
        }
        if (hi - x[i] < best_gap) {
            best_gap = hi - x[i];
            best_axis = i;
            best_value = hi;
        }
    }
    out[best_axis] = best_value;
    return out;
}

State Domain::centroid() const {
    State c(dimension());
    for (int i = 0; i < dimension(); ++i) {
        c[i] = 0.5 * (axes_[static_cast<std::size_t>(i)].first + axes_[static_cast<std::size_t>(i)].second);
    }
    return c;
}

double ControlProblem::horizon_T() const {
    if (const auto* fh = std::get_if<FiniteHorizon>(&horizon)) {
        return fh->T;
    }
    return std::numeric_limits<double>::infinity();
}

double ControlProblem::discount_rate() const {
    if (const auto* di = std::get_if<DiscountedInfinite>(&horizon)) {
        return di->rate;
    }
    return 0.0;
}

ControlProblem canonicalize(const ControlProblem& problem) {
    if (problem.sense == Sense::minimize) {
        return problem;
    }
    ControlProblem out = problem;
    out.sense = Sense::minimize;
    if (problem.running_cost) {
        out.running_cost = [l = problem.running_cost](double t, const State& x, const Control& z) {
            return -l(t, x, z);
        };
    }
    if (problem.terminal_cost) {
        out.terminal_cost = [phi = problem.terminal_cost](const State& x) { return -phi(x); };
    }
    if (problem.boundary_cost) {
        out.boundary_cost = [psi = problem.boundary_cost](double t, const State& x) { return -psi(t, x); };
    }
    if (problem.closed_form_hamiltonian) {
        // inf_z { <F1, p> - l } = -sup_z { <F1, -p> + l }
        out.closed_form_hamiltonian = [h = *problem.closed_form_hamiltonian](double t, const State& x,
                                                                             const Covector& p) {
            HamiltonianPoint sup = h(t, x, Covector(-p));
            sup.value = -sup.value;
            return sup;
        };
    }
    return out;
}

void validate(const ControlProblem& problem) {
    if (problem.dimension < 1 || problem.dimension > kMaxDim || problem.noise_dimension < 1 ||
        problem.noise_dimension > kMaxDim) {
        throw DomainError("problem dimensions must lie in [1, 4]");
    }
    if (!problem.drift_uncontrolled || !problem.drift_controlled || !problem.diffusion || !problem.running_cost) {
        throw DomainError("problem '" + problem.name + "' is missing a coefficient function");
    }
    if (problem.finite_horizon()) {
        if (!(problem.horizon_T() > 0.0) || !problem.terminal_cost) {
            throw DomainError("finite horizon problems need T > 0 and a terminal cost");
        }
    } else if (!(problem.discount_rate() > 0.0)) {
        throw DomainError("discount rate must be positive");
    }
    if (problem.domain) {
        if (problem.domain->dimension() != problem.dimension || !problem.boundary_cost) {
            throw DomainError("exit domain must match the state dimension and carry a boundary cost");
        }
        if (problem.finite_horizon()) {
            // psi(T, x) = phi(x) on the boundary, checked at corners and face midpoints.
            const auto& axes = problem.domain->axes();
            const State c = problem.domain->centroid();
            const double T = problem.horizon_T();
            for (int i = 0; i < problem.dimension; ++i) {
                for (const double end : {axes[static_cast<std::size_t>(i)].first, axes[static_cast<std::size_t>(i)].second}) {
                    State x = c;
                    x[i] = end;
                    const double gap = std::abs(problem.boundary_cost(T, x) - problem.terminal_cost(x));
                    if (!(gap <= 1e-12)) {
                        throw DomainError("boundary cost incompatible with terminal cost at " + describe(T, x) +
                                          ": psi(T,x) must equal phi(x) on the boundary");
                    }
                }
            }
        }
    }
}

BoxControls sampling_box(const ControlSet& set) {
    if (set.is_box()) {
        BoxControls b = set.as_box();
        for (int i = 0; i < b.upper.size(); ++i) {
            if (!std::isfinite(b.upper[i])) {
                b.upper[i] = b.lower[i] + std::max(10.0, std::abs(b.lower[i]));
            }
        }
        return b;
    }
    const auto& pts = set.as_finite().points;
    BoxControls b{pts.front(), pts.front()};
    for (const auto& p : pts) {
        b.lower = b.lower.cwiseMin(p);
        b.upper = b.upper.cwiseMax(p);
    }
    return b;
}

HypothesisReport probe_hypotheses(const ControlProblem& problem, int n_samples, std::uint64_t seed,
                                  const SampleRegion& region) {
    if (n_samples < 2) {
        throw DomainError("probe_hypotheses needs at least 2 samples");
    }
    const int n = problem.dimension;
    if (region.x_lo.size() != n || region.x_hi.size() != n || region.t_hi < region.t_lo) {
        throw DomainError("sample region does not match the state dimension");
    }
    for (int i = 0; i < n; ++i) {
        if (!(region.x_lo[i] < region.x_hi[i])) {
            throw DomainError("sample region must be nondegenerate");
        }
    }

    const StreamAddress rng(seed);
    const ControlSet& U = problem.control_set;
    const BoxControls zbox = sampling_box(U);

    auto draw = [&](int k, double& t, State& x, Control& z) {
        const auto ut = rng.uniforms(static_cast<std::uint64_t>(k), 0, Substream::probe, 0);
        t = region.t_lo + (region.t_hi - region.t_lo) * ut[0];
        x.resize(n);
        for (int i = 0; i < n; ++i) {
            const auto u = rng.uniforms(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(1 + i),
                                        Substream::probe, 0);
            x[i] = region.x_lo[i] + (region.x_hi[i] - region.x_lo[i]) * u[0];
        }
        if (U.is_box()) {
            z.resize(U.dimension());
            for (int i = 0; i < U.dimension(); ++i) {
                const auto u = rng.uniforms(static_cast<std::uint64_t>(k), static_cast<std::uint32_t>(1 + i),
                                            Substream::probe, 1);
                z[i] = zbox.lower[i] + (zbox.upper[i] - zbox.lower[i]) * u[0];
            }
        } else {
            const auto& pts = U.as_finite().points;
            z = pts[static_cast<std::size_t>(k) % pts.size()];
        }
    };

    HypothesisReport report;
    report.ellipticity_lambda0_estimate = std::numeric_limits<double>::infinity();
    report.samples_used = n_samples;

    // Sup of |B^+ F1| on nested prefixes, used to detect unbounded growth.
    const int early = std::max(1, n_samples / 100);
    double girsanov_early = 0.0;

    State x_prev;
    for (int k = 0; k < n_samples; ++k) {
        double t = 0.0;
        State x;
        Control z;
        draw(k, t, x, z);

        const State f0 = problem.drift_uncontrolled(t, x);
        const State f1 = problem.drift_controlled(t, x, z);
        const Mat B = problem.diffusion(t, x);
        require_finite(f0, "F0", t, x);
        require_finite(f1, "F1", t, x);
        if (!B.allFinite()) {
            throw DomainError("B is not finite at " + describe(t, x));
        }

        if (k > 0) {
            const double dx = (x - x_prev).norm();
            if (dx > 0.0) {
                const State f0p = problem.drift_uncontrolled(t, x_prev);
                const State f1p = problem.drift_controlled(t, x_prev, z);
                require_finite(f0p, "F0", t, x_prev);
                require_finite(f1p, "F1", t, x_prev);
                report.lipschitz_F0_estimate = std::max(report.lipschitz_F0_estimate, (f0 - f0p).norm() / dx);
                report.lipschitz_F1_estimate = std::max(report.lipschitz_F1_estimate, (f1 - f1p).norm() / dx);
            }
        }

        const Mat BBt = B * B.transpose();
        Eigen::SelfAdjointEigenSolver<Mat> eig(BBt, Eigen::EigenvaluesOnly);
        report.ellipticity_lambda0_estimate =
            std::min(report.ellipticity_lambda0_estimate, std::max(0.0, eig.eigenvalues().minCoeff()));

        if (!report.girsanov_unbounded || std::isfinite(report.girsanov_sup_estimate)) {
            const double girsanov = girsanov_norm(B, f1);
            if (!std::isfinite(girsanov)) {
                report.girsanov_unbounded = true;
            }
            report.girsanov_sup_estimate = std::max(report.girsanov_sup_estimate, girsanov);
        }
        if (k + 1 == early) {
            girsanov_early = report.girsanov_sup_estimate;
        }

        x_prev = x;
    }

    // Deterministic approach to each face of the region: |B^+ F1| growing 10x
    // between offsets 1e-2 and 1e-10 of the width means it is unbounded there.
    if (!report.girsanov_unbounded) {
        std::vector<Control> corners;
        if (U.is_box()) {
            corners = {zbox.lower, zbox.upper};
        } else {
            corners = U.as_finite().points;
        }
        const State centre = 0.5 * (region.x_lo + region.x_hi);
        for (int i = 0; i < n && !report.girsanov_unbounded; ++i) {
            const double w = region.x_hi[i] - region.x_lo[i];
            for (const double side : {-1.0, 1.0}) {
                for (const Control& z : corners) {
                    auto at = [&](double offset) {
                        State x = centre;
                        x[i] = side < 0.0 ? region.x_lo[i] + offset * w : region.x_hi[i] - offset * w;
                        const Mat B = problem.diffusion(region.t_lo, x);
                        const State f1 = problem.drift_controlled(region.t_lo, x, z);
                        return B.allFinite() && f1.allFinite() ? girsanov_norm(B, f1) : 0.0;
                    };
                    const double g_far = at(1e-2);
                    const double g_near = at(1e-10);
                    if (!std::isfinite(g_near) || (g_far > 0.0 && g_near >= 10.0 * g_far)) {
                        report.girsanov_unbounded = true;
                    }
                }
            }
        }
    }

    // Sampled sup still growing by >= 10x over two decades of samples: the
    // quantity is not bounded on the region (e.g. B -> 0 with F1 != 0).
    if (n_samples >= 100 && std::isfinite(report.girsanov_sup_estimate) && girsanov_early > 0.0 &&
        report.girsanov_sup_estimate >= 10.0 * girsanov_early) {
        report.girsanov_unbounded = true;
    }
    return report;
}

} // namespace hjbv
