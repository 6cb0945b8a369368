#include "hjbverify/hjb.hpp"
#include "hjbverify/hamiltonian.hpp"
#include "hjbverify/io.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hjbv {

void Grid1D::validate() const {
    if (!(x_min < x_max) || nx < 3 || nt < 1 || !(t_start < t_end)) {
        throw DomainError("grid needs x_min < x_max, nx >= 3, nt >= 1 and t_start < t_end");
    }
}

Grid1D Grid1D::refined() const {
    Grid1D g = *this;
    g.nx = 2 * (nx - 1) + 1;
    g.nt = 2 * nt;
    return g;
}

int SpaceTimeField::time_index(double t) const {
    const double pos = (t - grid.t_start) / grid.dt();
    const int n = static_cast<int>(std::floor(pos + 1e-9));
    return std::clamp(n, 0, grid.nt);
}

namespace {

std::optional<double> interpolate_row(const std::vector<double>& data, const Grid1D& grid, int n, double x) {
    if (!(x >= grid.x_min && x <= grid.x_max)) {
        return std::nullopt;
    }
    const double pos = (x - grid.x_min) / grid.dx();
    const int i = std::clamp(static_cast<int>(std::floor(pos)), 0, grid.nx - 2);
    const double w = std::clamp(pos - i, 0.0, 1.0);
    const std::size_t base = static_cast<std::size_t>(n) * grid.nx + i;
    return (1.0 - w) * data[base] + w * data[base + 1];
}

/// Thomas algorithm; sub[0] and sup[n-1] are ignored. Returns false on a zero pivot.
bool solve_tridiagonal(const std::vector<double>& sub, const std::vector<double>& diag, const std::vector<double>& sup,
                       std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double denom = diag[0];
    if (!(std::abs(denom) > 1e-300)) {
        return false;
    }
    c[0] = sup[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - sub[i] * c[i - 1];
        if (!(std::abs(denom) > 1e-300)) {
            return false;
        }
        c[i] = i + 1 < n ? sup[i] / denom : 0.0;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    return true;
}

double diffusion_coefficient(const ControlProblem& pb, double t, double x) {
    const Mat B = pb.diffusion(t, scalar_vec(x));
    return 0.5 * (B * B.transpose())(0, 0);
}

struct EdgeValues {
    std::function<double(double)> left;  // canonical sign
    std::function<double(double)> right;
};

/// Shared backward march. `edges` empty means linear extrapolation.
SpaceTimeField march(const ControlProblem& problem, const Grid1D& grid_in, const std::optional<EdgeValues>& edges) {
    if (problem.dimension != 1) {
        throw DomainError("the grid solver handles one-dimensional problems only");
    }
    if (!problem.finite_horizon()) {
        throw DomainError("the grid solver needs a finite horizon");
    }
    validate(problem);
    Grid1D grid = grid_in;
    grid.t_end = problem.horizon_T();
    grid.validate();

    const Hamiltonian ham(problem);
    const ControlProblem& pb = ham.canonical();
    const double sign = sense_sign(problem);
    const int nx = grid.nx;
    const int nt = grid.nt;
    const double dx = grid.dx();
    const double dt = grid.dt();

    std::vector<double> u(static_cast<std::size_t>(nt + 1) * nx);
    auto row = [&](int n) { return u.begin() + static_cast<std::ptrdiff_t>(n) * nx; };

    for (int i = 0; i < nx; ++i) {
        row(nt)[i] = pb.terminal_cost(scalar_vec(grid.x(i)));
    }

    std::vector<double> sub(static_cast<std::size_t>(nx)), diag(static_cast<std::size_t>(nx)),
        sup(static_cast<std::size_t>(nx)), rhs(static_cast<std::size_t>(nx));
    for (int n = nt - 1; n >= 0; --n) {
        const double t_now = grid.t(n);
        const double t_next = grid.t(n + 1);
        const auto next = row(n + 1);
        for (int i = 1; i < nx - 1; ++i) {
            const double x = grid.x(i);
            const State xs = scalar_vec(x);
            const double p = (next[i + 1] - next[i - 1]) / (2.0 * dx);
            const double h = ham.minimize_point(t_next, xs, scalar_vec(p)).value;
            const double d = diffusion_coefficient(pb, t_now, x);
            const double f0 = pb.drift_uncontrolled(t_now, xs)[0];
            const double fp = std::max(f0, 0.0);
            const double fm = std::max(-f0, 0.0);
            sub[static_cast<std::size_t>(i)] = -dt * (d / (dx * dx) + fm / dx);
            sup[static_cast<std::size_t>(i)] = -dt * (d / (dx * dx) + fp / dx);
            diag[static_cast<std::size_t>(i)] = 1.0 + dt * (2.0 * d / (dx * dx) + (fp + fm) / dx);
            rhs[static_cast<std::size_t>(i)] = next[i] + dt * h;
        }

        // Interior system on nodes 1..nx-2.
        const std::size_t m = static_cast<std::size_t>(nx - 2);
        std::vector<double> a(m), b(m), c(m), r(m);
        for (std::size_t j = 0; j < m; ++j) {
            a[j] = sub[j + 1];
            b[j] = diag[j + 1];
            c[j] = sup[j + 1];
            r[j] = rhs[j + 1];
        }
        double left = 0.0;
        double right = 0.0;
        if (edges) {
            left = edges->left(t_now);
            right = edges->right(t_now);
            r[0] -= a[0] * left;
            r[m - 1] -= c[m - 1] * right;
        } else {
            // u0 = 2 u1 - u2 and u_{nx-1} = 2 u_{nx-2} - u_{nx-3}.
            if (m >= 2) {
                b[0] += 2.0 * a[0];
                c[0] -= a[0];
                b[m - 1] += 2.0 * c[m - 1];
                a[m - 1] -= c[m - 1];
            } else {
                b[0] += a[0] + c[0]; // single interior node: constant extrapolation
            }
        }
        if (!solve_tridiagonal(a, b, c, r)) {
            std::ostringstream os;
            os << "tridiagonal solve failed at time level " << n << " (t=" << t_now << ")";
            throw NumericalError(os.str());
        }
        const auto cur = row(n);
        for (std::size_t j = 0; j < m; ++j) {
            cur[static_cast<std::ptrdiff_t>(j) + 1] = r[j];
        }
        if (edges) {
            cur[0] = left;
            cur[nx - 1] = right;
        } else if (m >= 2) {
            cur[0] = 2.0 * cur[1] - cur[2];
            cur[nx - 1] = 2.0 * cur[nx - 2] - cur[nx - 3];
        } else {
            cur[0] = cur[1];
            cur[nx - 1] = cur[1];
        }
        for (int i = 0; i < nx; ++i) {
            if (!std::isfinite(cur[i])) {
                std::ostringstream os;
                os << "non-finite value at time level " << n << ", node " << i;
                throw NumericalError(os.str());
            }
        }
    }

    SpaceTimeField field;
    field.grid = grid;
    field.provenance = FieldProvenance::solved;
    field.values.resize(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        field.values[j] = sign * u[j];
    }
    // Terminal row exactly phi in the original sense.
    for (int i = 0; i < nx; ++i) {
        field.values[static_cast<std::size_t>(nt) * nx + i] = problem.terminal_cost(scalar_vec(grid.x(i)));
    }
    field.gradient = central_gradient(field.values, grid);
    return field;
}

} // namespace

std::optional<double> SpaceTimeField::value_at(double t, double x) const {
    return interpolate_row(values, grid, time_index(t), x);
}

std::optional<double> SpaceTimeField::gradient_at(double t, double x) const {
    return interpolate_row(gradient, grid, time_index(t), x);
}

std::vector<double> central_gradient(const std::vector<double>& values, const Grid1D& grid) {
    const int nx = grid.nx;
    const double dx = grid.dx();
    std::vector<double> g(values.size());
    for (int n = 0; n <= grid.nt; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * nx;
        g[base] = (values[base + 1] - values[base]) / dx;
        g[base + nx - 1] = (values[base + nx - 1] - values[base + nx - 2]) / dx;
        for (int i = 1; i < nx - 1; ++i) {
            g[base + i] = (values[base + i + 1] - values[base + i - 1]) / (2.0 * dx);
        }
    }
    return g;
}

SpaceTimeField field_from_closed_form(const Grid1D& grid, const std::function<double(double, double)>& value,
                                      const std::function<double(double, double)>& gradient) {
    grid.validate();
    SpaceTimeField f;
    f.grid = grid;
    f.provenance = FieldProvenance::closed_form;
    f.values.resize(static_cast<std::size_t>(grid.nt + 1) * grid.nx);
    f.gradient.resize(f.values.size());
    for (int n = 0; n <= grid.nt; ++n) {
        for (int i = 0; i < grid.nx; ++i) {
            const std::size_t j = static_cast<std::size_t>(n) * grid.nx + i;
            f.values[j] = value(grid.t(n), grid.x(i));
            f.gradient[j] = gradient(grid.t(n), grid.x(i));
        }
    }
    return f;
}

BoundaryCondition dirichlet_from(const SpaceTimeField& field) {
    return DirichletBoundary{[field](double t, double x) {
        const auto v = field.value_at(t, x);
        if (!v) {
            throw DomainError("Dirichlet source field does not cover the boundary node");
        }
        return *v;
    }};
}

BoundaryCondition dirichlet_from(std::function<double(double t, double x)> closed_form) {
    return DirichletBoundary{std::move(closed_form)};
}

SpaceTimeField solve_parabolic(const ControlProblem& problem, const Grid1D& grid, const BoundaryCondition& boundary) {
    std::optional<EdgeValues> edges;
    if (const auto* dir = std::get_if<DirichletBoundary>(&boundary)) {
        const double sign = sense_sign(problem);
        const double xl = grid.x_min;
        const double xr = grid.x_max;
        edges = EdgeValues{[f = dir->value, sign, xl](double t) { return sign * f(t, xl); },
                           [f = dir->value, sign, xr](double t) { return sign * f(t, xr); }};
    }
    return march(problem, grid, edges);
}

SpaceTimeField solve_exit(const ControlProblem& problem, const Grid1D& grid) {
    if (!problem.domain || problem.domain->dimension() != 1) {
        throw DomainError("solve_exit needs a one-dimensional exit domain");
    }
    const auto [a, b] = problem.domain->axes().front();
    if (std::abs(grid.x_min - a) > 1e-12 || std::abs(grid.x_max - b) > 1e-12) {
        throw DomainError("exit grid endpoints must coincide with the domain boundary");
    }
    const double T = problem.horizon_T();
    for (const double end : {a, b}) {
        const State xe = scalar_vec(end);
        if (std::abs(problem.boundary_cost(T, xe) - problem.terminal_cost(xe)) > 1e-10) {
            std::ostringstream os;
            os << "incompatible data at corner (T, " << end << "): psi(T,x) = phi(x) on the boundary is required";
            throw DomainError(os.str());
        }
    }
    const ControlProblem canonical = canonicalize(problem);
    EdgeValues edges{[psi = canonical.boundary_cost, a = a](double t) { return psi(t, scalar_vec(a)); },
                     [psi = canonical.boundary_cost, b = b](double t) { return psi(t, scalar_vec(b)); }};
    Grid1D g = grid;
    g.x_min = a;
    g.x_max = b;
    SpaceTimeField field = march(problem, g, edges);
    return field;
}

SpaceTimeField solve(const ControlProblem& problem, const Grid1D& grid, const BoundaryCondition& boundary) {
    if (problem.domain) {
        return solve_exit(problem, grid);
    }
    return solve_parabolic(problem, grid, boundary);
}

ResidualReport residual(const SpaceTimeField& field, const ControlProblem& problem, int exclusion_radius) {
    const Grid1D& g = field.grid;
    if (g.nt < 2 || g.nx < 5) {
        throw DomainError("residual needs nt >= 2 and nx >= 5");
    }
    if (exclusion_radius < 0) {
        throw DomainError("exclusion radius must be nonnegative");
    }
    const Hamiltonian ham(problem);
    const ControlProblem& pb = ham.canonical();
    const double sign = sense_sign(problem);
    const double dx = g.dx();
    const double dt = g.dt();
    const int r = std::max(1, exclusion_radius);

    ResidualReport rep;
    rep.nx = g.nx;
    rep.nt = g.nt;
    rep.residual.assign(static_cast<std::size_t>(g.nt) * g.nx, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < g.nx; ++i) {
        const double x = g.x(i);
        bool excluded = i < r || i > g.nx - 1 - r;
        for (const double kink : problem.kinks) {
            if (std::abs(x - kink) <= r * dx * (1.0 + 1e-12)) {
                excluded = true;
            }
        }
        if (excluded) {
            rep.excluded_nodes.push_back(i);
        }
    }
    auto is_excluded = [&](int i) {
        return std::binary_search(rep.excluded_nodes.begin(), rep.excluded_nodes.end(), i);
    };

    for (int n = 0; n < g.nt; ++n) {
        const double t = g.t(n);
        for (int i = 1; i < g.nx - 1; ++i) {
            if (is_excluded(i)) {
                continue;
            }
            const double x = g.x(i);
            const State xs = scalar_vec(x);
            const double u = sign * field.v(n, i);
            const double ut = (sign * field.v(n + 1, i) - u) / dt;
            const double up = sign * field.v(n, i + 1);
            const double um = sign * field.v(n, i - 1);
            const double uxx = (up - 2.0 * u + um) / (dx * dx);
            const double ux = (up - um) / (2.0 * dx);
            const double res = ut + diffusion_coefficient(pb, t, x) * uxx + pb.drift_uncontrolled(t, xs)[0] * ux +
                               ham.minimize_point(t, xs, scalar_vec(ux)).value;
            rep.residual[static_cast<std::size_t>(n) * g.nx + i] = sign * res;
            rep.sup_interior_residual = std::max(rep.sup_interior_residual, std::abs(res));
        }
    }
    return rep;
}

namespace {

int ratio_or_throw(int fine, int coarse, const char* what) {
    if (coarse <= 0 || fine % coarse != 0) {
        throw DomainError(std::string("ladder grids must refine the base ") + what + " by an integer factor");
    }
    return fine / coarse;
}

} // namespace

ApproximationLadder refine_ladder(const ControlProblem& problem, const Grid1D& base_grid, int levels,
                                  const BoundaryCondition& boundary) {
    if (levels < 3) {
        throw DomainError("a refinement ladder needs at least 3 levels");
    }
    std::vector<Grid1D> grids{base_grid};
    for (int l = 1; l < levels; ++l) {
        grids.push_back(grids.back().refined());
    }
    return refine_ladder(problem, grids, boundary);
}

ApproximationLadder refine_ladder(const ControlProblem& problem, const std::vector<Grid1D>& grids,
                                  const BoundaryCondition& boundary) {
    if (grids.size() < 3) {
        throw DomainError("a refinement ladder needs at least 3 levels");
    }
    ApproximationLadder ladder;
    for (const auto& g : grids) {
        ladder.levels.push_back(solve(problem, g, boundary));
    }
    const Grid1D& base = ladder.levels.front().grid;
    std::vector<int> fx, ft;
    for (const auto& f : ladder.levels) {
        fx.push_back(ratio_or_throw(f.grid.nx - 1, base.nx - 1, "space steps"));
        ft.push_back(ratio_or_throw(f.grid.nt, base.nt, "time steps"));
    }
    const double dx0 = base.dx();
    auto gradient_node_ok = [&](int i) {
        if (i < 2 || i > base.nx - 3) {
            return false;
        }
        return std::none_of(problem.kinks.begin(), problem.kinks.end(),
                            [&](double k) { return std::abs(base.x(i) - k) <= 2.0 * dx0; });
    };

    for (std::size_t l = 0; l + 1 < ladder.levels.size(); ++l) {
        const auto& a = ladder.levels[l];
        const auto& b = ladder.levels[l + 1];
        double dv = 0.0;
        double dg = 0.0;
        for (int n = 0; n <= base.nt; ++n) {
            for (int i = 0; i < base.nx; ++i) {
                const int na = n * ft[l];
                const int ia = i * fx[l];
                const int nb = n * ft[l + 1];
                const int ib = i * fx[l + 1];
                dv = std::max(dv, std::abs(a.v(na, ia) - b.v(nb, ib)));
                if (gradient_node_ok(i)) {
                    dg = std::max(dg, std::abs(a.dvdx(na, ia) - b.dvdx(nb, ib)));
                }
            }
        }
        ladder.value_distances.push_back(dv);
        ladder.gradient_distances.push_back(dg);
    }

    bool monotone = true;
    for (std::size_t j = 1; j < ladder.value_distances.size(); ++j) {
        const double prev = ladder.value_distances[j - 1];
        const double cur = ladder.value_distances[j];
        ladder.value_ratios.push_back(prev > 0.0 ? cur / prev : 0.0);
        const bool both_exact = prev <= 1e-12 && cur <= 1e-12;
        if (!(cur < prev) && !both_exact) {
            monotone = false;
        }
    }
    const bool exact = ladder.value_distances.back() <= 1e-12;
    ladder.passed = monotone && (exact || ladder.value_ratios.back() <= 0.75);

    bool grad_shrinks = true;
    for (std::size_t j = 1; j < ladder.gradient_distances.size(); ++j) {
        const double prev = ladder.gradient_distances[j - 1];
        const double cur = ladder.gradient_distances[j];
        if (!(cur < prev) && !(prev <= 1e-12 && cur <= 1e-12)) {
            grad_shrinks = false;
        }
    }
    ladder.gradient_proxy_conclusive = grad_shrinks;
    ladder.notes.push_back("approximating sequence realized as grid refinement levels, not mollifications");
    if (!grad_shrinks) {
        ladder.notes.push_back("gradient-convergence proxy inconclusive: gradient distances do not shrink");
    }
    if (!monotone) {
        ladder.notes.push_back("value distances are not monotonically decreasing");
    }
    return ladder;
}

namespace {

/// Least-squares slope of log|d2| against log(offset).
double loglog_slope(const std::vector<double>& offsets, const std::vector<double>& d2) {
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < offsets.size(); ++j) {
        if (std::abs(d2[j]) > 0.0 && offsets[j] > 0.0) {
            lx.push_back(std::log(offsets[j]));
            ly.push_back(std::log(std::abs(d2[j])));
        }
    }
    if (lx.size() < 2) {
        return 0.0;
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t j = 0; j < lx.size(); ++j) {
        sxy += (lx[j] - mx) * (ly[j] - my);
        sxx += (lx[j] - mx) * (lx[j] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::vector<double> blowup_offsets(const BlowupProbe& probe) {
    std::vector<double> offs;
    const int count = std::max(2, probe.count);
    for (int j = 0; j < count; ++j) {
        offs.push_back(probe.x_far * std::pow(10.0, -2.0 * j / (count - 1)));
    }
    return offs;
}

} // namespace

GradientDiagnostics gradient_diagnostics(const SpaceTimeField& field, const std::vector<double>& probe_times,
                                         const std::vector<double>& probe_points, const BlowupProbe& blowup) {
    GradientDiagnostics out;
    const Grid1D& g = field.grid;
    const double T = g.t_end;
    for (const double t : probe_times) {
        for (const double x : probe_points) {
            const auto grad = field.gradient_at(t, x);
            if (!grad) {
                throw DomainError("gradient probe lies outside the field grid");
            }
            out.weighted_gradient_sup = std::max(out.weighted_gradient_sup, std::sqrt(std::max(0.0, T - t)) * std::abs(*grad));
        }
    }
    const double dx = g.dx();
    double scale = 0.0;
    bool all_small = true;
    for (const double t : probe_times) {
        const int n = field.time_index(t);
        std::vector<double> offs, d2;
        for (const double off : blowup_offsets(blowup)) {
            const double x = blowup.kink + off;
            const int i = static_cast<int>(std::lround((x - g.x_min) / dx));
            if (i < 1 || i > g.nx - 2 || g.x(i) - blowup.kink < 2.0 * dx) {
                continue;
            }
            offs.push_back(g.x(i) - blowup.kink);
            const double second = (field.v(n, i + 1) - 2.0 * field.v(n, i) + field.v(n, i - 1)) / (dx * dx);
            d2.push_back(second);
            scale = std::max(scale, std::abs(field.v(n, i)));
        }
        for (const double s : d2) {
            if (std::abs(s) > 1e-8 * (1.0 + scale)) {
                all_small = false;
            }
        }
        out.blowup_exponents.push_back(loglog_slope(offs, d2));
    }
    out.second_differences_vanish = all_small;
    if (all_small) {
        std::fill(out.blowup_exponents.begin(), out.blowup_exponents.end(), 0.0);
    }
    out.blowup_exponent = out.blowup_exponents.empty() ? 0.0 : out.blowup_exponents.front();
    return out;
}

GradientDiagnostics gradient_diagnostics(const std::function<double(double, double)>& value,
                                         const std::function<double(double, double)>& gradient, double T,
                                         const std::vector<double>& probe_times,
                                         const std::vector<double>& probe_points, const BlowupProbe& blowup) {
    GradientDiagnostics out;
    for (const double t : probe_times) {
        for (const double x : probe_points) {
            out.weighted_gradient_sup =
                std::max(out.weighted_gradient_sup, std::sqrt(std::max(0.0, T - t)) * std::abs(gradient(t, x)));
        }
    }
    bool all_small = true;
    for (const double t : probe_times) {
        std::vector<double> offs, d2;
        for (const double off : blowup_offsets(blowup)) {
            // Step proportional to the distance from the kink keeps the
            // relative truncation error of the second difference uniform.
            const double x = blowup.kink + off;
            const double h = 0.05 * off;
            const double second = (value(t, x + h) - 2.0 * value(t, x) + value(t, x - h)) / (h * h);
            offs.push_back(off);
            d2.push_back(second);
            if (std::abs(second) * h * h > 1e-13 * (1.0 + std::abs(value(t, x)))) {
                all_small = false;
            }
        }
        out.blowup_exponents.push_back(loglog_slope(offs, d2));
    }
    out.second_differences_vanish = all_small;
    if (all_small) {
        std::fill(out.blowup_exponents.begin(), out.blowup_exponents.end(), 0.0);
    }
    out.blowup_exponent = out.blowup_exponents.empty() ? 0.0 : out.blowup_exponents.front();
    return out;
}

void write_field_csv(std::ostream& os, const SpaceTimeField& field) {
    const Grid1D& g = field.grid;
    os << "t,x,v,dvdx\n";
    for (int n = 0; n <= g.nt; ++n) {
        const std::string t = format_double(g.t(n));
        for (int i = 0; i < g.nx; ++i) {
            os << t << ',' << format_double(g.x(i)) << ',' << format_double(field.v(n, i)) << ','
               << format_double(field.dvdx(n, i)) << '\n';
        }
    }
}

SpaceTimeField load_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,x,v,dvdx") {
        throw DomainError("field CSV must start with header t,x,v,dvdx");
    }
    std::vector<double> ts, xs, vs, gs;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        double cols[4];
        for (int c = 0; c < 4; ++c) {
            if (!std::getline(ss, cell, ',')) {
                throw DomainError("field CSV line " + std::to_string(lineno) + ": expected 4 columns");
            }
            try {
                cols[c] = parse_double(cell);
            } catch (const std::invalid_argument&) {
                throw DomainError("field CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        ts.push_back(cols[0]);
        xs.push_back(cols[1]);
        vs.push_back(cols[2]);
        gs.push_back(cols[3]);
    }
    if (ts.empty()) {
        throw DomainError("field CSV has no rows");
    }
    int nx = 0;
    while (nx < static_cast<int>(ts.size()) && ts[static_cast<std::size_t>(nx)] == ts.front()) {
        ++nx;
    }
    if (nx < 3 || ts.size() % static_cast<std::size_t>(nx) != 0) {
        throw DomainError("field CSV rows do not form a rectangular grid");
    }
    SpaceTimeField f;
    f.grid.nx = nx;
    f.grid.nt = static_cast<int>(ts.size() / static_cast<std::size_t>(nx)) - 1;
    f.grid.x_min = xs.front();
    f.grid.x_max = xs[static_cast<std::size_t>(nx) - 1];
    f.grid.t_start = ts.front();
    f.grid.t_end = ts.back();
    f.grid.validate();
    f.values = std::move(vs);
    f.gradient = std::move(gs);
    f.provenance = FieldProvenance::loaded;
    return f;
}

} // namespace hjbv
