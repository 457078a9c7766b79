#include "ordef/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ordef {

TimeGrid::TimeGrid(double t_max_, int n_steps_)
    : t_max(t_max_), n_steps(n_steps_) {
    if (!(t_max_ > 0.0)) {
        throw std::invalid_argument("TimeGrid: t_max must be positive");
    }
    if (n_steps_ <= 0) {
        throw std::invalid_argument("TimeGrid: n_steps must be positive");
    }
    dt = t_max_ / n_steps_;
}

int TimeGrid::cell_of(double t) const {
    int j = static_cast<int>(std::floor(t / dt));
    return std::clamp(j, 0, n_steps - 1);
}

int TimeGrid::node_index(double t, double tol) const {
    int j = static_cast<int>(std::lround(t / dt));
    j = std::clamp(j, 0, n_steps);
    if (std::fabs(node(j) - t) > tol * std::max(1.0, t_max)) {
        throw std::domain_error("TimeGrid: time " + std::to_string(t) +
                                " is not a grid node");
    }
    return j;
}

double IntegratedCurve::at(double t) const {
    if (t <= 0.0) {
        return values.front();
    }
    if (t >= grid.t_max) {
        return values.back();
    }
    int j = grid.cell_of(t);
    double w = (t - grid.node(j)) / grid.dt;
    return values[j] * (1.0 - w) + values[j + 1] * w;
}

IntegratedCurve integrate_curve(const RateFn& f, const TimeGrid& grid) {
    IntegratedCurve out;
    out.grid = grid;
    out.values.resize(grid.n_nodes());
    out.values[0] = 0.0;
    double prev = f(0.0);
    if (prev < 0.0) {
        throw std::domain_error("integrate_curve: negative integrand at node 0");
    }
    for (int j = 1; j <= grid.n_steps; ++j) {
        double cur = f(grid.node(j));
        if (cur < 0.0) {
            throw std::domain_error("integrate_curve: negative integrand at node " +
                                    std::to_string(j));
        }
        out.values[j] = out.values[j - 1] + 0.5 * (prev + cur) * grid.dt;
        prev = cur;
    }
    return out;
}

double density_integral(const IntegratedCurve& hazard, const CurveFn& h,
                        double a, double b) {
    const TimeGrid& grid = hazard.grid;
    if (a > b) {
        throw std::domain_error("density_integral: a > b");
    }
    if (b > grid.t_max * (1.0 + 1e-12)) {
        throw std::domain_error("density_integral: b exceeds t_max");
    }
    b = std::min(b, grid.t_max);
    a = std::max(a, 0.0);
    if (a >= b) {
        return 0.0;
    }

    double total = 0.0;
    int j_lo = grid.cell_of(a);
    int j_hi = grid.cell_of(b * (1.0 - 1e-15));
    double x_prev = a;
    double s_prev = std::exp(-hazard.at(a));
    double h_prev = h(a);
    for (int j = j_lo; j <= j_hi; ++j) {
        double x = std::min(grid.node(j + 1), b);
        if (x <= x_prev) {
            continue;
        }
        double s = std::exp(-hazard.at(x));
        double hv = h(x);
        total += 0.5 * (h_prev + hv) * (s_prev - s);
        x_prev = x;
        s_prev = s;
        h_prev = hv;
    }
    return total;
}

double default_density_integral(const CurveFn& h, const RateFn& lam,
                                double a, double b, const TimeGrid& grid) {
    IntegratedCurve hazard = integrate_curve(lam, grid);
    return density_integral(hazard, h, a, b);
}

double node_density_sum(const IntegratedCurve& hazard, int ja, int jb,
                        const std::function<double(int)>& v) {
    double sum = 0.0;
    if (ja >= jb) {
        return sum;
    }
    double s_prev = std::exp(-hazard.values[ja]);
    double v_prev = v(ja);
    for (int j = ja; j < jb; ++j) {
        double s = std::exp(-hazard.values[j + 1]);
        double vj = v(j + 1);
        sum += 0.5 * (v_prev + vj) * (s_prev - s);
        s_prev = s;
        v_prev = vj;
    }
    return sum;
}

}  // namespace ordef
