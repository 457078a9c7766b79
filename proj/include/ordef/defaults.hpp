#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ordef/grid.hpp"
#include "ordef/intensity.hpp"
#include "ordef/lattice.hpp"

namespace ordef {

// Defaults that never happen on the horizon are recorded at +infinity, so
// survival indicators evaluate true and recovery indicators false.
inline constexpr double kCensoredTime = std::numeric_limits<double>::infinity();

struct DefaultScenario {
    std::vector<double> exp_marks;
    Path factor_path;                  // empty when no lattice is involved
    std::vector<double> inter_arrival; // own-clock times, censored -> +inf
    std::vector<double> default_times; // calendar times, censored -> +inf
    std::vector<bool> censored;

    int defaults_by(double time) const;
};

// Inverts each level's cumulative hazard at its exponential mark, with linear
// interpolation inside the crossing cell. A level whose hazard never reaches
// the mark on the horizon is censored, along with every later level.
DefaultScenario construct_default_times(const IntensityModel& model,
                                        const std::vector<double>& exp_marks,
                                        const FactorAt* x, const TimeGrid& grid);

// Same from precomputed per-level hazards (levels 1..N in order).
DefaultScenario construct_from_hazards(const std::vector<IntegratedCurve>& hazards,
                                       const std::vector<double>& exp_marks);

using ScenarioSink = std::function<void(long long index, const DefaultScenario&)>;

// Draws exponential marks independently of the factor path from the
// counter-based generator keyed by (seed, path index, level); deterministic
// and order-insensitive. lat may be null for factor-free models.
void simulate_scenarios(const IntensityModel& model,
                        const RobustFactorLattice* lat, const KernelPolicy& policy,
                        long long n_paths, std::uint64_t seed,
                        const TimeGrid& grid, const ScenarioSink& sink);

// Payoff as a function of the default-time vector and the factor path; must be
// total on censored (+inf) coordinates.
struct PayoffDecomposition {
    std::function<double(const std::vector<double>& u, const Path& path)> phi;
};

// Observation at the query time: k defaults so far at times u (size k).
struct Regime {
    int k = 0;
    std::vector<double> u;
};

// Rejects regimes with k out of range, the wrong number of observed times, or
// times that are decreasing or beyond the query time.
void validate_regime(const Regime& regime, int n_levels, double t);

// Per-path level hazards on a quadrature grid, built once and shared across
// paths when the model never reads the factor.
struct PathHazards {
    std::vector<Path> paths;
    bool shared = false;
    std::vector<std::vector<IntegratedCurve>> curves;  // [path][level]

    const IntegratedCurve& level(std::size_t path, int n) const {
        return shared ? curves[0][n] : curves[path][n];
    }
};

PathHazards build_path_hazards(const IntensityModel& model,
                               const RobustFactorLattice& lat,
                               const TimeGrid& qgrid, int n_levels);

// Expectation over the residual default levels `level`..N-1 (0-based) of
// 1{next inter-arrival > lo} * phi(u, path), with each level weighted by its
// own default density. Entries u[0..level-1] must be filled; u is scratch
// beyond that. Densities integrate over [lo, t_max] with a censoring tail.
double residual_default_expectation(const std::vector<IntegratedCurve>& hazards,
                                    const PayoffDecomposition& phi,
                                    const Path& path, std::vector<double>& u,
                                    int level, double lo);

// Per-path evaluator of one regime term over the first n_levels_used default
// levels: exp(hazard of level k+1 over the elapsed window) times the residual
// default integral of phi; at k = n_levels_used the payoff passes through.
// The lattice must outlive the returned functional.
PathFunctional regime_path_functional(const IntensityModel& model,
                                      const RobustFactorLattice& lat,
                                      const PayoffDecomposition& phi, double t,
                                      const Regime& regime, const TimeGrid& qgrid,
                                      int n_levels_used);

// Regime term of the conditional expectation under the single prior chosen by
// policy: the same per-path evaluator rolled back linearly to t.
PrefixValues conditional_expectation_fixed_prior(
    const IntensityModel& model, const RobustFactorLattice& lat,
    const KernelPolicy& policy, const PayoffDecomposition& phi, double t,
    const Regime& regime, const TimeGrid& qgrid);

struct InsufficientConditioning : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OracleEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long long kept = 0;
};

inline constexpr long long kMinKept = 200;

// Brute-force check: simulate, keep scenarios matching the regime at t (each
// observed default time within w_match, the same default count, the same
// factor prefix), and average phi over the kept set.
OracleEstimate oracle_conditional_expectation(
    const IntensityModel& model, const RobustFactorLattice& lat,
    const KernelPolicy& policy, const PayoffDecomposition& phi, double t,
    const Regime& regime, long long n_paths, std::uint64_t seed,
    const TimeGrid& qgrid, const Path& target_prefix, double w_match = -1.0,
    long long min_kept = kMinKept);

struct CovarianceEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Sample covariance of paired draws with an influence-function standard error.
CovarianceEstimate covariance_estimate(const std::vector<double>& a,
                                       const std::vector<double>& b);

}  // namespace ordef
