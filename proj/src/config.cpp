#include "ordef/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ordef {

namespace {

using nlohmann::json;

// Typed field access with a field-path error message; missing keys keep the
// default.
template <typename T>
void read_field(const json& j, const std::string& path, const std::string& key,
                T& out) {
    auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

const json& object_at(const json& j, const std::string& path,
                      const std::string& key) {
    static const json empty = json::object();
    auto it = j.find(key);
    if (it == j.end()) {
        return empty;
    }
    if (!it->is_object()) {
        throw ConfigError(path.empty() ? key + ": expected an object"
                                       : path + "." + key +
                                             ": expected an object");
    }
    return *it;
}

void fail(const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
}

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) {
        fail(field, why);
    }
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void validate(const ScenarioConfig& cfg) {
    require(cfg.grid.t_max > 0.0, "grid.t_max", "must be positive");
    require(cfg.grid.n_steps >= 1, "grid.n_steps", "must be at least 1");

    const IntensitySpec& in = cfg.intensity;
    if (in.variant == "constant") {
        require(!in.rates.empty(), "intensity.rates", "must list one rate per level");
        for (std::size_t i = 0; i < in.rates.size(); ++i) {
            require(in.rates[i] >= 0.0 && std::isfinite(in.rates[i]),
                    "intensity.rates[" + std::to_string(i) + "]",
                    "must be a finite non-negative rate");
        }
    } else if (in.variant == "piecewise") {
        require(!in.cells.empty(), "intensity.cells", "must list one row per level");
        for (std::size_t n = 0; n < in.cells.size(); ++n) {
            std::string field = "intensity.cells[" + std::to_string(n) + "]";
            require(in.cells[n].size() == in.cells[0].size(), field,
                    "all levels need the same number of cells");
            require(!in.cells[n].empty(), field, "needs at least one cell");
            for (double r : in.cells[n]) {
                require(r >= 0.0 && std::isfinite(r), field,
                        "rates must be finite and non-negative");
            }
        }
    } else if (in.variant == "self_exciting") {
        require(in.n_levels >= 1, "intensity.n_levels", "must be at least 1");
        require(in.gamma >= 0.0, "intensity.gamma", "must be non-negative");
        require(in.mu_base >= 0.0, "intensity.mu_base", "must be non-negative");
    } else if (in.variant == "factor_linear") {
        require(!in.base.empty(), "intensity.base", "must list one entry per level");
        require(in.slope.size() == in.base.size(), "intensity.slope",
                "must match intensity.base in length");
    } else {
        fail("intensity.variant", "unknown variant '" + in.variant + "'");
    }
    int n_levels = config_n_levels(cfg);

    const LatticeSpec& la = cfg.lattice;
    if (la.variant == "single") {
        // nothing beyond the shared checks
    } else if (la.variant == "binomial") {
        require(la.x0 > 0.0 && la.up > 0.0 && la.down > 0.0, "lattice.x0",
                "binomial parameters must be positive");
        require(!la.p_up.empty(), "lattice.p_up", "must list at least one kernel");
        for (std::size_t i = 0; i < la.p_up.size(); ++i) {
            require(is_probability(la.p_up[i]),
                    "lattice.p_up[" + std::to_string(i) + "]",
                    "must lie in [0, 1]");
        }
    } else if (la.variant == "explicit") {
        require(static_cast<int>(la.states.size()) == cfg.grid.n_steps + 1,
                "lattice.states", "needs one state list per slice");
        require(static_cast<int>(la.kernels.size()) == cfg.grid.n_steps,
                "lattice.kernels", "needs one kernel list per step");
        for (std::size_t s = 0; s < la.states.size(); ++s) {
            require(!la.states[s].empty(),
                    "lattice.states[" + std::to_string(s) + "]",
                    "needs at least one state");
        }
        for (std::size_t s = 0; s < la.kernels.size(); ++s) {
            std::string step_field = "lattice.kernels[" + std::to_string(s) + "]";
            require(!la.kernels[s].empty(), step_field,
                    "needs at least one kernel");
            for (std::size_t k = 0; k < la.kernels[s].size(); ++k) {
                const auto& rows = la.kernels[s][k];
                std::string kf = step_field + "[" + std::to_string(k) + "]";
                require(rows.size() == la.states[s].size(), kf,
                        "needs one row per state of its slice");
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    std::string rf = kf + "[" + std::to_string(r) + "]";
                    require(rows[r].size() == la.states[s + 1].size(), rf,
                            "needs one entry per state of the next slice");
                    double sum = 0.0;
                    for (double p : rows[r]) {
                        require(is_probability(p), rf, "entries must lie in [0, 1]");
                        sum += p;
                    }
                    require(std::fabs(sum - 1.0) <= 1e-9, rf,
                            "probabilities must sum to 1");
                }
            }
        }
        require(la.initial_state >= 0 &&
                    la.initial_state < static_cast<int>(la.states[0].size()),
                "lattice.initial_state", "out of range");
    } else {
        fail("lattice.variant", "unknown variant '" + la.variant + "'");
    }

    const RunSpec& run = cfg.run;
    require(run.n_paths >= 0, "run.n_paths", "must be non-negative");
    require(run.quad_steps >= 1, "run.quad_steps", "must be at least 1");
    require(run.tol_dpp > 0.0, "run.tol_dpp", "must be positive");
    require(run.mc_multiplier > 0.0, "run.mc_multiplier", "must be positive");
    require(run.s >= 0.0 && run.s <= run.t && run.t <= cfg.grid.t_max, "run.s",
            "times must satisfy 0 <= s <= t <= grid.t_max");
    for (std::size_t i = 0; i < run.regimes.size(); ++i) {
        const RegimeSpec& r = run.regimes[i];
        std::string field = "run.regimes[" + std::to_string(i) + "]";
        require(r.k >= 0 && r.k <= n_levels, field + ".k", "out of range");
        require(static_cast<int>(r.u.size()) == r.k, field + ".u",
                "must list exactly k default times");
        double prev = 0.0;
        for (double u : r.u) {
            require(u >= prev && u <= run.t, field + ".u",
                    "times must be nondecreasing and <= run.t");
            prev = u;
        }
    }

    for (std::size_t i = 0; i < cfg.claims.size(); ++i) {
        const ClaimSpec& c = cfg.claims[i];
        std::string field = "claims[" + std::to_string(i) + "]";
        require(!c.id.empty(), field + ".id", "must be non-empty");
        bool second = c.kind == "survival_second" || c.kind == "recovery_second";
        bool known = second || c.kind == "survival_first" ||
                     c.kind == "recovery_first";
        require(known, field + ".kind", "unknown claim kind '" + c.kind + "'");
        require(!second || n_levels >= 2, field + ".kind",
                "needs a model with at least two levels");
        require(c.maturity >= run.t && c.maturity <= cfg.grid.t_max,
                field + ".maturity", "must lie in [run.t, grid.t_max]");
        require(c.payoff >= 0.0 && std::isfinite(c.payoff), field + ".payoff",
                "must be finite and non-negative");
        require(c.bound >= 0.0, field + ".bound", "must be non-negative");
    }
}

}  // namespace

int config_n_levels(const ScenarioConfig& cfg) {
    const IntensitySpec& in = cfg.intensity;
    if (in.variant == "constant") {
        return static_cast<int>(in.rates.size());
    }
    if (in.variant == "piecewise") {
        return static_cast<int>(in.cells.size());
    }
    if (in.variant == "self_exciting") {
        return in.n_levels;
    }
    return static_cast<int>(in.base.size());
}

ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config: top level must be an object");
    }

    ScenarioConfig cfg;
    const json& grid = object_at(j, "", "grid");
    read_field(grid, "grid", "t_max", cfg.grid.t_max);
    read_field(grid, "grid", "n_steps", cfg.grid.n_steps);

    const json& in = object_at(j, "", "intensity");
    read_field(in, "intensity", "variant", cfg.intensity.variant);
    read_field(in, "intensity", "rates", cfg.intensity.rates);
    read_field(in, "intensity", "cells", cfg.intensity.cells);
    read_field(in, "intensity", "mu_base", cfg.intensity.mu_base);
    read_field(in, "intensity", "mu_slope", cfg.intensity.mu_slope);
    read_field(in, "intensity", "gamma", cfg.intensity.gamma);
    read_field(in, "intensity", "n_levels", cfg.intensity.n_levels);
    read_field(in, "intensity", "base", cfg.intensity.base);
    read_field(in, "intensity", "slope", cfg.intensity.slope);

    const json& la = object_at(j, "", "lattice");
    read_field(la, "lattice", "variant", cfg.lattice.variant);
    read_field(la, "lattice", "value", cfg.lattice.value);
    read_field(la, "lattice", "x0", cfg.lattice.x0);
    read_field(la, "lattice", "up", cfg.lattice.up);
    read_field(la, "lattice", "down", cfg.lattice.down);
    read_field(la, "lattice", "p_up", cfg.lattice.p_up);
    read_field(la, "lattice", "states", cfg.lattice.states);
    read_field(la, "lattice", "kernels", cfg.lattice.kernels);
    read_field(la, "lattice", "initial_state", cfg.lattice.initial_state);

    auto claims_it = j.find("claims");
    if (claims_it != j.end()) {
        if (!claims_it->is_array()) {
            throw ConfigError("claims: expected an array");
        }
        for (std::size_t i = 0; i < claims_it->size(); ++i) {
            const json& c = (*claims_it)[i];
            std::string path = "claims[" + std::to_string(i) + "]";
            if (!c.is_object()) {
                throw ConfigError(path + ": expected an object");
            }
            ClaimSpec spec;
            read_field(c, path, "id", spec.id);
            read_field(c, path, "kind", spec.kind);
            read_field(c, path, "maturity", spec.maturity);
            read_field(c, path, "payoff", spec.payoff);
            read_field(c, path, "z_base", spec.z_base);
            read_field(c, path, "z_slope", spec.z_slope);
            read_field(c, path, "bound", spec.bound);
            cfg.claims.push_back(std::move(spec));
        }
    }

    const json& run = object_at(j, "", "run");
    read_field(run, "run", "seed", cfg.run.seed);
    read_field(run, "run", "n_paths", cfg.run.n_paths);
    read_field(run, "run", "quad_steps", cfg.run.quad_steps);
    read_field(run, "run", "tol_dpp", cfg.run.tol_dpp);
    read_field(run, "run", "mc_multiplier", cfg.run.mc_multiplier);
    read_field(run, "run", "s", cfg.run.s);
    read_field(run, "run", "t", cfg.run.t);
    auto regimes_it = run.find("regimes");
    if (regimes_it != run.end()) {
        if (!regimes_it->is_array()) {
            throw ConfigError("run.regimes: expected an array");
        }
        for (std::size_t i = 0; i < regimes_it->size(); ++i) {
            const json& r = (*regimes_it)[i];
            std::string path = "run.regimes[" + std::to_string(i) + "]";
            if (!r.is_object()) {
                throw ConfigError(path + ": expected an object");
            }
            RegimeSpec spec;
            read_field(r, path, "k", spec.k);
            read_field(r, path, "u", spec.u);
            cfg.run.regimes.push_back(std::move(spec));
        }
    }

    validate(cfg);
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
    json j;
    j["grid"] = {{"t_max", cfg.grid.t_max}, {"n_steps", cfg.grid.n_steps}};
    j["intensity"] = {{"variant", cfg.intensity.variant},
                      {"rates", cfg.intensity.rates},
                      {"cells", cfg.intensity.cells},
                      {"mu_base", cfg.intensity.mu_base},
                      {"mu_slope", cfg.intensity.mu_slope},
                      {"gamma", cfg.intensity.gamma},
                      {"n_levels", cfg.intensity.n_levels},
                      {"base", cfg.intensity.base},
                      {"slope", cfg.intensity.slope}};
    j["lattice"] = {{"variant", cfg.lattice.variant},
                    {"value", cfg.lattice.value},
                    {"x0", cfg.lattice.x0},
                    {"up", cfg.lattice.up},
                    {"down", cfg.lattice.down},
                    {"p_up", cfg.lattice.p_up},
                    {"states", cfg.lattice.states},
                    {"kernels", cfg.lattice.kernels},
                    {"initial_state", cfg.lattice.initial_state}};
    j["claims"] = json::array();
    for (const ClaimSpec& c : cfg.claims) {
        j["claims"].push_back({{"id", c.id},
                               {"kind", c.kind},
                               {"maturity", c.maturity},
                               {"payoff", c.payoff},
                               {"z_base", c.z_base},
                               {"z_slope", c.z_slope},
                               {"bound", c.bound}});
    }
    json regimes = json::array();
    for (const RegimeSpec& r : cfg.run.regimes) {
        regimes.push_back({{"k", r.k}, {"u", r.u}});
    }
    j["run"] = {{"seed", cfg.run.seed},
                {"n_paths", cfg.run.n_paths},
                {"quad_steps", cfg.run.quad_steps},
                {"tol_dpp", cfg.run.tol_dpp},
                {"mc_multiplier", cfg.run.mc_multiplier},
                {"s", cfg.run.s},
                {"t", cfg.run.t},
                {"regimes", regimes}};
    return j.dump(2);
}

std::string config_hash(const ScenarioConfig& cfg) {
    std::string text = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

IntensityModel make_model(const ScenarioConfig& cfg) {
    const IntensitySpec& in = cfg.intensity;
    if (in.variant == "constant") {
        return IntensityModel::constant_per_level(in.rates);
    }
    if (in.variant == "piecewise") {
        TimeGrid step_grid(cfg.grid.t_max, static_cast<int>(in.cells[0].size()));
        return IntensityModel::piecewise_constant(step_grid, in.cells);
    }
    if (in.variant == "self_exciting") {
        double mu_base = in.mu_base;
        double mu_slope = in.mu_slope;
        CurveFn mu = [mu_base, mu_slope](double t) {
            return std::max(mu_base + mu_slope * t, 0.0);
        };
        return IntensityModel::self_exciting(mu, in.gamma, in.n_levels);
    }
    std::vector<IntensityModel::LevelFn> fns;
    for (std::size_t n = 0; n < in.base.size(); ++n) {
        double a = in.base[n];
        double b = in.slope[n];
        fns.push_back([a, b](double, double x) { return a + b * x; });
    }
    return IntensityModel::factor_driven(std::move(fns));
}

RobustFactorLattice make_lattice(const ScenarioConfig& cfg) {
    TimeGrid grid(cfg.grid.t_max, cfg.grid.n_steps);
    const LatticeSpec& la = cfg.lattice;
    if (la.variant == "single") {
        return RobustFactorLattice::single_state(grid, la.value);
    }
    if (la.variant == "binomial") {
        return RobustFactorLattice::binomial(grid, la.x0, la.up, la.down,
                                             la.p_up);
    }
    RobustFactorLattice lat;
    lat.grid = grid;
    lat.states = la.states;
    lat.initial_state = la.initial_state;
    for (const auto& step : la.kernels) {
        std::vector<Kernel> ks;
        for (const auto& rows : step) {
            ks.push_back(Kernel{rows});
        }
        lat.kernels.push_back(std::move(ks));
    }
    lat.validate();
    return lat;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string manifest_json(const RunManifest& mf) {
    json j;
    j["config_hash"] = mf.config_hash;
    j["version"] = mf.version;
    j["seed"] = mf.seed;
    j["created"] = mf.created;
    j["outputs"] = mf.outputs;
    return j.dump(2);
}

}  // namespace ordef
