#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "ordef/defaults.hpp"

namespace ordef {

// Shared tolerance for deterministic-quadrature comparisons in the
// verification harness.
inline constexpr double kTolDpp = 1e-7;

// Regime-decomposed conditional value at a fixed query time. Evaluation is
// lazy: value(regime) returns one number per factor-prefix class at t and
// rejects regimes inconsistent with t (some u_i > t).
struct RegimeValue {
    double t = 0.0;
    int n_levels = 0;
    std::function<PrefixValues(const Regime&)> value;
};

// Worst-case regime values over the prior family: per regime, the prefactor
// exp(hazard of the next level over the elapsed window) times the robust
// lattice expectation of the residual default integral; the all-defaulted
// regime passes phi through. The lattice must outlive the result.
RegimeValue sublinear_operator(const IntensityModel& model,
                               const RobustFactorLattice& lat,
                               const PayoffDecomposition& phi, double t,
                               int n_levels, const TimeGrid& qgrid);

// Same operator truncated to the first m default levels; phi reads u[0..m-1].
RegimeValue restricted_operator(const IntensityModel& model,
                                const RobustFactorLattice& lat,
                                const PayoffDecomposition& phi, double t, int m,
                                const TimeGrid& qgrid);

struct DppReport {
    double min_gap = 0.0;
    double max_gap = 0.0;            // largest staged advantage seen
    int regime_k = 0;                // arg-min regime
    std::vector<double> regime_u;
    long long prefix = 0;            // arg-min prefix class at s
    std::uint64_t sample_seed = 0;
    long long n_compared = 0;
};

struct DppSampleSpec {
    int max_u_nodes = 64;       // full regime enumeration up to this many nodes
    int n_samples = 32;         // regimes drawn at random beyond that
    std::uint64_t seed = 1;
    bool allow_signed = false;  // signed payoffs: report gaps, don't throw
};

// Staged-vs-direct comparison for two default levels: the t-values are
// re-expanded into a payoff over (u_1, u_2, path) and re-evaluated at s, with
// the inner integrals split exactly at the regime boundaries u_i = t. Reports
// the minimum of (staged - direct) over sampled regimes and prefix classes at
// s, which the weak dynamic programming inequality requires to be >= -tol.
DppReport verify_weak_dpp(const IntensityModel& model,
                          const RobustFactorLattice& lat,
                          const PayoffDecomposition& phi, double s, double t,
                          const TimeGrid& qgrid, const DppSampleSpec& spec = {});

struct CommutationReport {
    // 1-2: pre-t default with second level surviving t (two nestings);
    // 3: both defaults before t; 4: additivity over the three windows;
    // 5: second default inside (s, t] after an observed first; 6: additivity
    // over the second-level windows. Each entry is the worst absolute
    // difference between the two sides over prefix classes (and observed
    // first-default nodes where applicable).
    std::array<double, 6> residuals{};

    double max_residual() const;
};

// Residuals of the six exchange and additivity identities whose joint
// validity upgrades the staged inequality to an equality. Requires a
// two-level model; s and t must be nodes of both grids.
CommutationReport check_commutation_conditions(const IntensityModel& model,
                                               const RobustFactorLattice& lat,
                                               const PayoffDecomposition& phi,
                                               double s, double t,
                                               const TimeGrid& qgrid);

}  // namespace ordef
