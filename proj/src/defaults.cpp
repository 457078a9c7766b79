#include "ordef/defaults.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ordef/rng.hpp"

namespace ordef {

int DefaultScenario::defaults_by(double time) const {
    int count = 0;
    for (double tau : default_times) {
        if (tau <= time) {
            ++count;
        }
    }
    return count;
}

DefaultScenario construct_from_hazards(const std::vector<IntegratedCurve>& hazards,
                                       const std::vector<double>& exp_marks) {
    if (hazards.size() != exp_marks.size()) {
        throw std::invalid_argument("construct_from_hazards: level count mismatch");
    }
    int n_levels = static_cast<int>(hazards.size());
    DefaultScenario out;
    out.exp_marks = exp_marks;
    out.inter_arrival.assign(n_levels, kCensoredTime);
    out.default_times.assign(n_levels, kCensoredTime);
    out.censored.assign(n_levels, true);
    double calendar = 0.0;
    for (int n = 0; n < n_levels; ++n) {
        double mark = exp_marks[n];
        if (!(mark > 0.0)) {
            throw std::domain_error("construct_from_hazards: marks must be positive");
        }
        const IntegratedCurve& hz = hazards[n];
        if (hz.values.back() < mark) {
            break;  // this and all later levels censored
        }
        auto it = std::lower_bound(hz.values.begin(), hz.values.end(), mark);
        int j = static_cast<int>(it - hz.values.begin());
        double tilde;
        if (j == 0) {
            tilde = 0.0;
        } else {
            double lo = hz.values[j - 1];
            double hi = hz.values[j];
            double w = hi > lo ? (mark - lo) / (hi - lo) : 1.0;
            tilde = hz.grid.node(j - 1) + w * hz.grid.dt;
        }
        calendar += tilde;
        out.inter_arrival[n] = tilde;
        out.default_times[n] = calendar;
        out.censored[n] = false;
    }
    return out;
}

DefaultScenario construct_default_times(const IntensityModel& model,
                                        const std::vector<double>& exp_marks,
                                        const FactorAt* x, const TimeGrid& grid) {
    std::vector<IntegratedCurve> hazards;
    hazards.reserve(exp_marks.size());
    for (int n = 1; n <= static_cast<int>(exp_marks.size()); ++n) {
        hazards.push_back(model.level_hazard(n, x, grid));
    }
    return construct_from_hazards(hazards, exp_marks);
}

void simulate_scenarios(const IntensityModel& model,
                        const RobustFactorLattice* lat, const KernelPolicy& policy,
                        long long n_paths, std::uint64_t seed,
                        const TimeGrid& grid, const ScenarioSink& sink) {
    if (n_paths < 0) {
        throw std::invalid_argument("simulate_scenarios: n_paths must be >= 0");
    }
    int n_levels = model.n_levels();

    // Hazards are path-independent for factor-free models; build them once.
    std::vector<IntegratedCurve> shared_hazards;
    if (!model.needs_factor()) {
        for (int n = 1; n <= n_levels; ++n) {
            shared_hazards.push_back(model.level_hazard(n, nullptr, grid));
        }
    }

    std::vector<double> marks(n_levels);
    for (long long i = 0; i < n_paths; ++i) {
        for (int n = 0; n < n_levels; ++n) {
            marks[n] = unit_exponential(seed, kStreamMarks,
                                        static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(n));
        }
        DefaultScenario sc;
        if (lat != nullptr) {
            Path p = sample_path(*lat, policy, seed, static_cast<std::uint64_t>(i));
            if (model.needs_factor()) {
                FactorAt x = path_factor(*lat, p);
                sc = construct_default_times(model, marks, &x, grid);
            } else {
                sc = construct_from_hazards(shared_hazards, marks);
            }
            sc.factor_path = std::move(p);
        } else {
            sc = construct_from_hazards(shared_hazards, marks);
        }
        sink(i, sc);
    }
}

double residual_default_expectation(const std::vector<IntegratedCurve>& hazards,
                                    const PayoffDecomposition& phi,
                                    const Path& path, std::vector<double>& u,
                                    int level, double lo) {
    int n_levels = static_cast<int>(hazards.size());
    if (level == n_levels) {
        return phi.phi(u, path);
    }
    const IntegratedCurve& hz = hazards[level];
    const TimeGrid& grid = hz.grid;
    double t_max = grid.t_max;
    double base = level == 0 ? 0.0 : u[level - 1];
    lo = std::max(lo, 0.0);

    // censoring tail: this level and every later one never default
    for (int l = level; l < n_levels; ++l) {
        u[l] = kCensoredTime;
    }
    double tail_value = phi.phi(u, path);
    double value = std::exp(-hz.at(t_max)) * tail_value;

    if (lo < t_max) {
        auto eval = [&](double x) {
            u[level] = base + x;
            return residual_default_expectation(hazards, phi, path, u, level + 1,
                                                0.0);
        };
        int j_lo = grid.cell_of(lo);
        double x_prev = lo;
        double s_prev = std::exp(-hz.at(lo));
        double g_prev = eval(lo);
        for (int j = j_lo; j < grid.n_steps; ++j) {
            double xx = grid.node(j + 1);
            if (xx <= x_prev) {
                continue;
            }
            double s = std::exp(-hz.values[j + 1]);
            double g = eval(xx);
            value += 0.5 * (g_prev + g) * (s_prev - s);
            x_prev = xx;
            s_prev = s;
            g_prev = g;
        }
    }
    return value;
}

void validate_regime(const Regime& regime, int n_levels, double t) {
    if (regime.k < 0 || regime.k > n_levels) {
        throw std::domain_error("regime: k out of range");
    }
    if (static_cast<int>(regime.u.size()) != regime.k) {
        throw std::domain_error("regime: u must list exactly k default times");
    }
    double prev = 0.0;
    for (double ui : regime.u) {
        if (ui < prev || ui > t) {
            throw std::domain_error(
                "regime: observed default times must be nondecreasing and <= t");
        }
        prev = ui;
    }
}

PathHazards build_path_hazards(const IntensityModel& model,
                               const RobustFactorLattice& lat,
                               const TimeGrid& qgrid, int n_levels) {
    if (n_levels < 1 || n_levels > model.n_levels()) {
        throw std::domain_error("build_path_hazards: level count out of range");
    }
    PathHazards d;
    d.paths = enumerate_paths(lat);
    d.shared = !model.needs_factor();
    auto levels = [&](const FactorAt* x) {
        std::vector<IntegratedCurve> hz;
        for (int n = 1; n <= n_levels; ++n) {
            hz.push_back(model.level_hazard(n, x, qgrid));
        }
        return hz;
    };
    if (d.shared) {
        d.curves.push_back(levels(nullptr));
    } else {
        for (const Path& p : d.paths) {
            FactorAt x = path_factor(lat, p);
            d.curves.push_back(levels(&x));
        }
    }
    return d;
}

PathFunctional regime_path_functional(const IntensityModel& model,
                                      const RobustFactorLattice& lat,
                                      const PayoffDecomposition& phi, double t,
                                      const Regime& regime, const TimeGrid& qgrid,
                                      int n_levels_used) {
    if (n_levels_used < 1 || n_levels_used > model.n_levels()) {
        throw std::domain_error("regime_path_functional: level count out of range");
    }
    validate_regime(regime, n_levels_used, t);
    if (std::fabs(qgrid.t_max - lat.grid.t_max) > 1e-12) {
        throw std::invalid_argument(
            "regime_path_functional: quadrature and lattice horizons differ");
    }
    int k = regime.k;
    double u_prev = k == 0 ? 0.0 : regime.u[k - 1];

    bool needs_factor = model.needs_factor();
    std::vector<IntegratedCurve> shared_hazards;
    if (!needs_factor) {
        for (int n = 1; n <= n_levels_used; ++n) {
            shared_hazards.push_back(model.level_hazard(n, nullptr, qgrid));
        }
    }

    const RobustFactorLattice* lat_p = &lat;
    PathFunctional f;
    f.eval = [model, lat_p, phi, regime, qgrid, n_levels_used, k, t, u_prev,
              needs_factor,
              shared_hazards = std::move(shared_hazards)](const Path& p) {
        const std::vector<IntegratedCurve>* hazards = &shared_hazards;
        std::vector<IntegratedCurve> own;
        if (needs_factor) {
            FactorAt x = path_factor(*lat_p, p);
            for (int n = 1; n <= n_levels_used; ++n) {
                own.push_back(model.level_hazard(n, &x, qgrid));
            }
            hazards = &own;
        }
        std::vector<double> u(n_levels_used, kCensoredTime);
        std::copy(regime.u.begin(), regime.u.end(), u.begin());
        if (k == n_levels_used) {
            return phi.phi(u, p);
        }
        double lo = t - u_prev;
        double inner = residual_default_expectation(*hazards, phi, p, u, k, lo);
        return std::exp((*hazards)[k].at(lo)) * inner;
    };
    return f;
}

PrefixValues conditional_expectation_fixed_prior(
    const IntensityModel& model, const RobustFactorLattice& lat,
    const KernelPolicy& policy, const PayoffDecomposition& phi, double t,
    const Regime& regime, const TimeGrid& qgrid) {
    PathFunctional f = regime_path_functional(model, lat, phi, t, regime, qgrid,
                                              model.n_levels());
    return linear_conditional_expectation(lat, f, policy, lat.grid.node_index(t));
}

OracleEstimate oracle_conditional_expectation(
    const IntensityModel& model, const RobustFactorLattice& lat,
    const KernelPolicy& policy, const PayoffDecomposition& phi, double t,
    const Regime& regime, long long n_paths, std::uint64_t seed,
    const TimeGrid& qgrid, const Path& target_prefix, double w_match,
    long long min_kept) {
    int n_levels = model.n_levels();
    validate_regime(regime, n_levels, t);
    if (w_match < 0.0) {
        w_match = qgrid.dt;
    }
    int t_slice = lat.grid.node_index(t);
    long long target_id = prefix_id(lat, target_prefix, t_slice);

    double sum = 0.0;
    double sum_sq = 0.0;
    long long kept = 0;
    simulate_scenarios(
        model, &lat, policy, n_paths, seed, qgrid,
        [&](long long, const DefaultScenario& sc) {
            if (sc.defaults_by(t) != regime.k) {
                return;
            }
            for (int i = 0; i < regime.k; ++i) {
                if (std::fabs(sc.default_times[i] - regime.u[i]) > w_match) {
                    return;
                }
            }
            if (prefix_id(lat, sc.factor_path, t_slice) != target_id) {
                return;
            }
            double y = phi.phi(sc.default_times, sc.factor_path);
            sum += y;
            sum_sq += y * y;
            ++kept;
        });
    if (kept < min_kept) {
        throw InsufficientConditioning(
            "oracle_conditional_expectation: only " + std::to_string(kept) +
            " of " + std::to_string(n_paths) + " scenarios matched the regime");
    }
    OracleEstimate out;
    out.kept = kept;
    out.mean = sum / static_cast<double>(kept);
    double var = std::max(0.0, sum_sq / static_cast<double>(kept) - out.mean * out.mean);
    out.std_error = std::sqrt(var / static_cast<double>(kept));
    return out;
}

CovarianceEstimate covariance_estimate(const std::vector<double>& a,
                                       const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("covariance_estimate: need paired samples");
    }
    double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0;
    double var_inf = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
    }
    cov /= n;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double inf = (a[i] - ma) * (b[i] - mb) - cov;
        var_inf += inf * inf;
    }
    var_inf /= n;
    CovarianceEstimate out;
    out.value = cov;
    out.std_error = std::sqrt(var_inf / n);
    return out;
}

}  // namespace ordef
