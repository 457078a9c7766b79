#pragma once

#include <functional>
#include <vector>

namespace ordef {

// Uniform discretization of [0, t_max] with n_steps cells.
struct TimeGrid {
    double t_max = 0.0;
    int n_steps = 0;
    double dt = 0.0;

    TimeGrid() = default;
    TimeGrid(double t_max_, int n_steps_);

    int n_nodes() const { return n_steps + 1; }
    double node(int j) const { return dt * j; }

    // Index of the cell containing t, clamped to [0, n_steps - 1].
    int cell_of(double t) const;

    // Nearest node index for a time expected to sit on the grid.
    int node_index(double t, double tol = 1e-9) const;
};

// Cumulative integral F(t_j) of a nonnegative rate, F(0) = 0.
struct IntegratedCurve {
    TimeGrid grid;
    std::vector<double> values;

    // Linear interpolation between nodes; clamps t to [0, t_max].
    double at(double t) const;
};

using RateFn = std::function<double(double)>;
using CurveFn = std::function<double(double)>;

// Trapezoid cumulative integral of f on the grid; exact for piecewise-linear f.
IntegratedCurve integrate_curve(const RateFn& f, const TimeGrid& grid);

// Integral of h(x) against the density exp(-hazard(x)) d(hazard)(x) over [a, b].
// Per-cell mass is taken as the exact survival difference
// exp(-hazard(x_j)) - exp(-hazard(x_{j+1})), with h trapezoid-averaged, so the
// total mass over [0, b] telescopes to 1 - exp(-hazard(b)) exactly.
double density_integral(const IntegratedCurve& hazard, const CurveFn& h,
                        double a, double b);

// Same with the hazard built on the fly from a rate function.
double default_density_integral(const CurveFn& h, const RateFn& lam,
                                double a, double b, const TimeGrid& grid);

// Trapezoid integral of node values v(j) against the default density of the
// hazard over the node range [ja, jb], with exact per-cell survival
// differences.
double node_density_sum(const IntegratedCurve& hazard, int ja, int jb,
                        const std::function<double(int)>& v);

}  // namespace ordef
