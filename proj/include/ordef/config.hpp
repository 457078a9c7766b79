#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordef/claims.hpp"

namespace ordef {

inline constexpr const char* kEngineVersion = "0.1.0";

// Raised for any malformed or inconsistent configuration; the message names
// the offending field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    double t_max = 2.0;
    int n_steps = 4;
};

struct IntensitySpec {
    // constant | piecewise | self_exciting | factor_linear
    std::string variant = "constant";
    std::vector<double> rates;               // constant: one rate per level
    std::vector<std::vector<double>> cells;  // piecewise: per level, per cell
    double mu_base = 0.5;                    // self_exciting: mu(t) = max(mu_base + mu_slope t, 0)
    double mu_slope = 0.0;
    double gamma = 1.0;
    int n_levels = 2;                        // self_exciting only
    std::vector<double> base;                // factor_linear: base[n] + slope[n] * x
    std::vector<double> slope;
};

struct LatticeSpec {
    // single | binomial | explicit
    std::string variant = "single";
    double value = 1.0;  // single
    double x0 = 1.0;     // binomial
    double up = 1.2;
    double down = 0.85;
    std::vector<double> p_up;
    std::vector<std::vector<double>> states;  // explicit: per slice
    // explicit: [step][kernel][row][next]
    std::vector<std::vector<std::vector<std::vector<double>>>> kernels;
    int initial_state = 0;
};

struct ClaimSpec {
    std::string id;
    // survival_first | survival_second | recovery_first | recovery_second
    std::string kind = "survival_first";
    double maturity = 1.0;  // T for survival legs, window end for recovery legs
    double payoff = 1.0;    // constant maturity payment Y
    double z_base = 1.0;    // recovery curve Z(u) = z_base + z_slope * u
    double z_slope = 0.0;
    double bound = 1.0;     // declared recovery bound
};

struct RegimeSpec {
    int k = 0;
    std::vector<double> u;
};

struct RunSpec {
    std::uint64_t seed = 1;
    long long n_paths = 10000;
    int quad_steps = 10000;
    double tol_dpp = kTolDpp;
    double mc_multiplier = 3.0;
    double s = 0.5;
    double t = 1.0;
    std::vector<RegimeSpec> regimes;  // priced regimes; defaults to regime 0
};

struct ScenarioConfig {
    GridSpec grid;
    IntensitySpec intensity;
    LatticeSpec lattice;
    std::vector<ClaimSpec> claims;
    RunSpec run;
};

// Parses and fully validates a JSON config; every error is reported before
// any computation starts.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

// Canonical (key-sorted) serialization; parse(serialize(c)) == c field-wise.
std::string serialize_config(const ScenarioConfig& cfg);

// 64-bit FNV-1a of the canonical serialization, in hex.
std::string config_hash(const ScenarioConfig& cfg);

int config_n_levels(const ScenarioConfig& cfg);
IntensityModel make_model(const ScenarioConfig& cfg);
RobustFactorLattice make_lattice(const ScenarioConfig& cfg);

// 17 significant digits, enough to make determinism byte-checkable.
std::string format_double(double v);

struct RunManifest {
    std::string config_hash;
    std::string version = kEngineVersion;
    std::uint64_t seed = 0;
    std::string created;  // wall clock; never part of numeric outputs
    std::vector<std::string> outputs;
};

std::string manifest_json(const RunManifest& mf);

}  // namespace ordef
