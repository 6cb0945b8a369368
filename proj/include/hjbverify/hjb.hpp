#pragma once

#include "hjbverify/problem.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hjbv {

/// Uniform space-time grid [x_min, x_max] x [t_start, t_end] with nx nodes and nt steps.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 1.0;
    int nx = 3;
    int nt = 1;
    double t_start = 0.0;
    double t_end = 1.0;

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double dt() const { return (t_end - t_start) / nt; }
    double x(int i) const { return i == nx - 1 ? x_max : x_min + i * dx(); }
    double t(int n) const { return n == nt ? t_end : t_start + n * dt(); }
    /// dt / dx^2, reported as a stability diagnostic.
    double stability_ratio() const { return dt() / (dx() * dx()); }
    void validate() const;
    /// Twice as fine in both x and t.
    Grid1D refined() const;
};

enum class FieldProvenance { solved, closed_form, loaded };

/// Grid samples of a candidate value function v and its spatial gradient,
/// in the problem's own sense. Row-major by time level, then node.
struct SpaceTimeField {
    Grid1D grid;
    std::vector<double> values;
    std::vector<double> gradient;
    FieldProvenance provenance = FieldProvenance::solved;

    double v(int n, int i) const { return values[static_cast<std::size_t>(n) * grid.nx + i]; }
    double dvdx(int n, int i) const { return gradient[static_cast<std::size_t>(n) * grid.nx + i]; }

    bool covers(double x) const { return x >= grid.x_min && x <= grid.x_max; }
    /// Time level used for t: piecewise constant from the left.
    int time_index(double t) const;
    /// Linear in x on the time level of t; nullopt outside [x_min, x_max].
    std::optional<double> value_at(double t, double x) const;
    std::optional<double> gradient_at(double t, double x) const;
};

/// Central differences in the interior, one-sided at the two edges.
std::vector<double> central_gradient(const std::vector<double>& values, const Grid1D& grid);

SpaceTimeField field_from_closed_form(const Grid1D& grid, const std::function<double(double, double)>& value,
                                      const std::function<double(double, double)>& gradient);

struct DirichletBoundary {
    /// Boundary values in the problem's own sense.
    std::function<double(double t, double x)> value;
};
struct LinearExtrapolation {};
using BoundaryCondition = std::variant<DirichletBoundary, LinearExtrapolation>;

BoundaryCondition dirichlet_from(const SpaceTimeField& field);
BoundaryCondition dirichlet_from(std::function<double(double t, double x)> closed_form);

/// Backward IMEX march for
///   v_t + 1/2 BB^T v_xx + F0 v_x + H0(t, x, v_x) = 0,  v(T) = phi,
/// with diffusion and upwinded drift implicit and H0 explicit (previous level).
SpaceTimeField solve_parabolic(const ControlProblem& problem, const Grid1D& grid, const BoundaryCondition& boundary);

/// Same march on the exit domain (a, b) with v = psi imposed at both edges.
SpaceTimeField solve_exit(const ControlProblem& problem, const Grid1D& grid);

/// Dispatches to solve_exit for problems with a domain, else solve_parabolic.
SpaceTimeField solve(const ControlProblem& problem, const Grid1D& grid, const BoundaryCondition& boundary);

struct ResidualReport {
    double sup_interior_residual = 0.0;
    /// nt x nx, NaN on excluded nodes (and the terminal level, which has no forward difference).
    std::vector<double> residual;
    std::vector<int> excluded_nodes;
    int nx = 0;
    int nt = 0;
};

/// Pointwise HJB residual v_t + 1/2 BB^T v_xx + F0 v_x + H0(v_x) on interior
/// nodes farther than `exclusion_radius` nodes from the edges and from kinks.
ResidualReport residual(const SpaceTimeField& field, const ControlProblem& problem, int exclusion_radius);

struct ApproximationLadder {
    std::vector<SpaceTimeField> levels;
    std::vector<double> value_distances;    // sup |v_l - v_{l+1}| on the coarsest nodes
    std::vector<double> gradient_distances; // same for dv/dx, away from kinks and edges
    std::vector<double> value_ratios;
    bool passed = false;
    bool gradient_proxy_conclusive = false;
    std::vector<std::string> notes;
};

/// Refinement levels halving dx and dt; passes iff value distances decrease
/// strictly and the last ratio is <= 0.75.
ApproximationLadder refine_ladder(const ControlProblem& problem, const Grid1D& base_grid, int levels,
                                  const BoundaryCondition& boundary);
/// Ladder over explicit grids; each must refine the first by integer factors in x and t.
ApproximationLadder refine_ladder(const ControlProblem& problem, const std::vector<Grid1D>& grids,
                                  const BoundaryCondition& boundary);

struct BlowupProbe {
    double kink = 0.0;
    double x_far = 1.0; // probes span [x_far / 100, x_far] to the right of the kink
    int count = 21;
};

struct GradientDiagnostics {
    double weighted_gradient_sup = 0.0; // sup (T - t)^{1/2} |v_x|
    std::vector<double> blowup_exponents; // one per probe time
    double blowup_exponent = 0.0;         // at the first probe time
    bool second_differences_vanish = false;
};

GradientDiagnostics gradient_diagnostics(const SpaceTimeField& field, const std::vector<double>& probe_times,
                                         const std::vector<double>& probe_points, const BlowupProbe& blowup);
GradientDiagnostics gradient_diagnostics(const std::function<double(double, double)>& value,
                                         const std::function<double(double, double)>& gradient, double T,
                                         const std::vector<double>& probe_times,
                                         const std::vector<double>& probe_points, const BlowupProbe& blowup);

/// Field CSV: header t,x,v,dvdx; bit-exact round trip through load_field_csv.
void write_field_csv(std::ostream& os, const SpaceTimeField& field);
SpaceTimeField load_field_csv(std::istream& is);

} // namespace hjbv
