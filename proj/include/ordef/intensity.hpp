#pragma once

#include <functional>
#include <vector>

#include "ordef/grid.hpp"

namespace ordef {

// Factor context: value of the driving factor at a given time. Null pointer
// means "no factor available"; models that need one will reject that.
using FactorAt = std::function<double(double)>;

// Floor applied to every evaluated rate so cumulative hazards are strictly
// increasing and hazard inversion is well defined on the whole grid.
inline constexpr double kEpsLam = 1e-8;

// Per-level inter-arrival intensity family. Level n runs on its own clock:
// the n-th inter-arrival hazard at own-clock time t is level n's rate at t,
// with the factor (when present) sampled at that same shifted time.
class IntensityModel {
  public:
    enum class Variant {
        ConstantPerLevel,
        PiecewiseConstant,
        SelfExciting,
        FactorDriven,
    };

    // Rate function of one level: (own-clock time, factor value) -> rate.
    using LevelFn = std::function<double(double, double)>;

    static IntensityModel constant_per_level(std::vector<double> rates);
    // cells[n][j] = rate of level n+1 on grid cell j (right-continuous steps).
    static IntensityModel piecewise_constant(const TimeGrid& grid,
                                             std::vector<std::vector<double>> cells);
    // Rate of level n: mu(t) + n * exp(-gamma * t).
    static IntensityModel self_exciting(CurveFn mu, double gamma, int n_levels);
    // Same but with mu taken from the factor context.
    static IntensityModel self_exciting_factor(double gamma, int n_levels);
    static IntensityModel factor_driven(std::vector<LevelFn> fns);

    Variant variant() const { return variant_; }
    int n_levels() const { return n_levels_; }
    bool needs_factor() const;

    // Rate of level n at own-clock time t.
    double level_intensity(int n, double t, const FactorAt* x = nullptr) const;

    // Rate of the n-th default in calendar time, 0 before tau_prev.
    double shifted_intensity(int n, double t, double tau_prev,
                             const FactorAt* x = nullptr) const;

    // Cumulative hazard of level n on its own clock.
    IntegratedCurve level_hazard(int n, const FactorAt* x,
                                 const TimeGrid& grid) const;

  private:
    IntensityModel() = default;

    Variant variant_ = Variant::ConstantPerLevel;
    int n_levels_ = 0;
    std::vector<double> rates_;                 // ConstantPerLevel
    TimeGrid step_grid_;                        // PiecewiseConstant
    std::vector<std::vector<double>> cells_;    // PiecewiseConstant
    CurveFn mu_;                                // SelfExciting
    double gamma_ = 0.0;                        // SelfExciting
    bool mu_from_factor_ = false;               // SelfExciting
    std::vector<LevelFn> level_fns_;            // FactorDriven
};

// exp(-integral of level n's rate over [0, max(t - tau_prev, 0)]).
double survival_probability(const IntensityModel& model, int n, double t,
                            double tau_prev, const FactorAt* x,
                            const TimeGrid& grid);

struct JumpRate {
    double rate = 0.0;
    bool exhausted = false;
};

// Jump intensity of the default-counting process given the realized defaults.
JumpRate counting_jump_intensity(const IntensityModel& model, double t,
                                 const std::vector<double>& default_history,
                                 const FactorAt* x = nullptr);

}  // namespace ordef
