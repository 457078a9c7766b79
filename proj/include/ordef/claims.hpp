#pragma once

#include "ordef/sublinear.hpp"

namespace ordef {

// Maturity payment read off the factor path; must be non-negative and finite
// on every lattice path.
using PathValue = std::function<double(const Path&)>;

// Recovery paid at the default time, sampled at (calendar time, path). Values
// must stay within the declared bound at every sampled node.
using RecoveryCurve = std::function<double(double time, const Path& path)>;

// Worst-case price at t of `payoff` paid at T on first-level survival
// {tau_1 > T}. Regime 0 carries the closed-form value; regimes with an
// observed default are worthless.
RegimeValue price_survival_first(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const PathValue& payoff, double T, double t,
                                 const TimeGrid& qgrid);

// Worst-case price at t of `payoff` paid at T on second-level survival
// {tau_2 > T}. Regime 0 integrates the first default over (t, T] against the
// second level's residual survival; regime 1 reprices on the second level's
// clock started at the observed first default time; regime 2 is worthless.
RegimeValue price_survival_second(const IntensityModel& model,
                                  const RobustFactorLattice& lat,
                                  const PathValue& payoff, double T, double t,
                                  const TimeGrid& qgrid);

// Worst-case price at t of `recovery` paid at the first default time when it
// lands in (t, s]. Sampled recovery values outside [0, bound] are an error.
RegimeValue price_recovery_first(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const RecoveryCurve& recovery, double t,
                                 double s, double bound, const TimeGrid& qgrid);

// Same for recovery paid at the second default time when it lands in (t, s].
RegimeValue price_recovery_second(const IntensityModel& model,
                                  const RobustFactorLattice& lat,
                                  const RecoveryCurve& recovery, double t,
                                  double s, double bound, const TimeGrid& qgrid);

// Residuals of the two sufficient conditions behind the two-step pricing
// tower, plus the staged-vs-direct gaps of the tower equality itself.
// `interchange` is the worst residual of pulling the conditional evaluator
// through the first-default integral over (s, t]; `additivity` is the worst
// residual of splitting the evaluator over the default windows.
struct TowerReport {
    double interchange = 0.0;
    double additivity = 0.0;
    double staged_min_gap = 0.0;
    double staged_max_gap = 0.0;

    double conditions_residual() const;
    double tower_residual() const;
    bool conditions_hold(double tol = kTolDpp) const;
};

// Tower check at s <= t for the survival claim 1{tau_2 > T} * payoff.
TowerReport check_tower_survival(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const PathValue& payoff, double s, double t,
                                 double T, const TimeGrid& qgrid);

// Tower check at s <= t for the recovery claim 1{tau_2 < T} * Z(tau_2).
TowerReport check_tower_recovery(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const RecoveryCurve& recovery, double s,
                                 double t, double T, double bound,
                                 const TimeGrid& qgrid);

}  // namespace ordef
