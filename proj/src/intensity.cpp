#include "ordef/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ordef {

IntensityModel IntensityModel::constant_per_level(std::vector<double> rates) {
    if (rates.empty()) {
        throw std::invalid_argument("constant_per_level: no rates");
    }
    for (double r : rates) {
        if (r < 0.0) {
            throw std::invalid_argument("constant_per_level: negative rate");
        }
    }
    IntensityModel m;
    m.variant_ = Variant::ConstantPerLevel;
    m.n_levels_ = static_cast<int>(rates.size());
    m.rates_ = std::move(rates);
    return m;
}

IntensityModel IntensityModel::piecewise_constant(
    const TimeGrid& grid, std::vector<std::vector<double>> cells) {
    if (cells.empty()) {
        throw std::invalid_argument("piecewise_constant: no levels");
    }
    for (const auto& level : cells) {
        if (static_cast<int>(level.size()) != grid.n_steps) {
            throw std::invalid_argument(
                "piecewise_constant: cell count must equal grid n_steps");
        }
        for (double r : level) {
            if (r < 0.0) {
                throw std::invalid_argument("piecewise_constant: negative rate");
            }
        }
    }
    IntensityModel m;
    m.variant_ = Variant::PiecewiseConstant;
    m.n_levels_ = static_cast<int>(cells.size());
    m.step_grid_ = grid;
    m.cells_ = std::move(cells);
    return m;
}

IntensityModel IntensityModel::self_exciting(CurveFn mu, double gamma,
                                             int n_levels) {
    if (gamma <= 0.0) {
        throw std::invalid_argument("self_exciting: gamma must be positive");
    }
    if (n_levels < 1) {
        throw std::invalid_argument("self_exciting: n_levels must be >= 1");
    }
    IntensityModel m;
    m.variant_ = Variant::SelfExciting;
    m.n_levels_ = n_levels;
    m.mu_ = std::move(mu);
    m.gamma_ = gamma;
    return m;
}

IntensityModel IntensityModel::self_exciting_factor(double gamma, int n_levels) {
    IntensityModel m = self_exciting(nullptr, gamma, n_levels);
    m.mu_from_factor_ = true;
    return m;
}

IntensityModel IntensityModel::factor_driven(std::vector<LevelFn> fns) {
    if (fns.empty()) {
        throw std::invalid_argument("factor_driven: no levels");
    }
    IntensityModel m;
    m.variant_ = Variant::FactorDriven;
    m.n_levels_ = static_cast<int>(fns.size());
    m.level_fns_ = std::move(fns);
    return m;
}

bool IntensityModel::needs_factor() const {
    return variant_ == Variant::FactorDriven ||
           (variant_ == Variant::SelfExciting && mu_from_factor_);
}

double IntensityModel::level_intensity(int n, double t, const FactorAt* x) const {
    if (n < 1 || n > n_levels_) {
        throw std::domain_error("level_intensity: level " + std::to_string(n) +
                                " out of range 1.." + std::to_string(n_levels_));
    }
    if (needs_factor() && x == nullptr) {
        throw std::domain_error("level_intensity: model requires a factor context");
    }
    double rate = 0.0;
    switch (variant_) {
        case Variant::ConstantPerLevel:
            rate = rates_[n - 1];
            break;
        case Variant::PiecewiseConstant:
            rate = cells_[n - 1][step_grid_.cell_of(t)];
            break;
        case Variant::SelfExciting: {
            double mu = mu_from_factor_ ? (*x)(t) : mu_(t);
            rate = mu + n * std::exp(-gamma_ * t);
            break;
        }
        case Variant::FactorDriven:
            rate = level_fns_[n - 1](t, (*x)(t));
            break;
    }
    if (rate < 0.0) {
        throw std::domain_error("level_intensity: negative rate at level " +
                                std::to_string(n));
    }
    return std::max(rate, kEpsLam);
}

double IntensityModel::shifted_intensity(int n, double t, double tau_prev,
                                         const FactorAt* x) const {
    if (tau_prev < 0.0) {
        throw std::domain_error("shifted_intensity: tau_prev must be >= 0");
    }
    if (t < tau_prev) {
        return 0.0;
    }
    return level_intensity(n, t - tau_prev, x);
}

IntegratedCurve IntensityModel::level_hazard(int n, const FactorAt* x,
                                             const TimeGrid& grid) const {
    return integrate_curve([&](double t) { return level_intensity(n, t, x); },
                           grid);
}

double survival_probability(const IntensityModel& model, int n, double t,
                            double tau_prev, const FactorAt* x,
                            const TimeGrid& grid) {
    double span = t - tau_prev;
    if (span <= 0.0) {
        return 1.0;
    }
    IntegratedCurve hazard = model.level_hazard(n, x, grid);
    return std::exp(-hazard.at(span));
}

JumpRate counting_jump_intensity(const IntensityModel& model, double t,
                                 const std::vector<double>& default_history,
                                 const FactorAt* x) {
    int k = static_cast<int>(default_history.size());
    for (int i = 0; i < k; ++i) {
        if (default_history[i] > t ||
            (i > 0 && default_history[i] <= default_history[i - 1])) {
            throw std::domain_error(
                "counting_jump_intensity: history must be strictly increasing and <= t");
        }
    }
    if (k >= model.n_levels()) {
        return {0.0, true};
    }
    double tau_prev = k == 0 ? 0.0 : default_history.back();
    return {model.shifted_intensity(k + 1, t, tau_prev, x), false};
}

}  // namespace ordef
