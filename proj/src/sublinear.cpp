#include "ordef/sublinear.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "ordef/rng.hpp"

namespace ordef {

namespace {

// Memoized robust t-values of the two-level operator at grid regimes.
struct TValueCache {
    const IntensityModel& model;
    const RobustFactorLattice& lat;
    const PayoffDecomposition& phi;
    double t;
    const TimeGrid& qgrid;
    int t_slice;

    std::optional<PrefixValues> a0;
    std::unordered_map<long long, PrefixValues> b;
    std::unordered_map<long long, PrefixValues> c;

    PrefixValues eval(const Regime& r) {
        PathFunctional f = regime_path_functional(model, lat, phi, t, r, qgrid, 2);
        return conditional_sublinear_expectation(lat, f, t_slice);
    }

    const PrefixValues& A0() {
        if (!a0) {
            a0 = eval(Regime{0, {}});
        }
        return *a0;
    }
    const PrefixValues& B(int j1) {
        auto it = b.find(j1);
        if (it == b.end()) {
            it = b.emplace(j1, eval(Regime{1, {qgrid.node(j1)}})).first;
        }
        return it->second;
    }
    const PrefixValues& C(int j1, int j2) {
        long long key = static_cast<long long>(j1) * 1000000 + j2;
        auto it = c.find(key);
        if (it == c.end()) {
            it = c.emplace(key, eval(Regime{2, {qgrid.node(j1), qgrid.node(j2)}}))
                     .first;
        }
        return it->second;
    }
};

double max_abs_diff(const PrefixValues& a, const PrefixValues& b) {
    double m = 0.0;
    for (std::size_t w = 0; w < a.values.size(); ++w) {
        m = std::max(m, std::fabs(a.values[w] - b.values[w]));
    }
    return m;
}

}  // namespace

RegimeValue sublinear_operator(const IntensityModel& model,
                               const RobustFactorLattice& lat,
                               const PayoffDecomposition& phi, double t,
                               int n_levels, const TimeGrid& qgrid) {
    if (n_levels < 1 || n_levels > model.n_levels()) {
        throw std::domain_error("sublinear_operator: level count out of range");
    }
    int t_slice = lat.grid.node_index(t);
    const RobustFactorLattice* lat_p = &lat;
    RegimeValue rv;
    rv.t = t;
    rv.n_levels = n_levels;
    rv.value = [model, lat_p, phi, t, n_levels, qgrid, t_slice](const Regime& r) {
        if (n_levels - r.k > 3) {
            throw std::domain_error(
                "sublinear_operator: residual dimension above 3 is not supported");
        }
        PathFunctional f =
            regime_path_functional(model, *lat_p, phi, t, r, qgrid, n_levels);
        return conditional_sublinear_expectation(*lat_p, f, t_slice);
    };
    return rv;
}

RegimeValue restricted_operator(const IntensityModel& model,
                                const RobustFactorLattice& lat,
                                const PayoffDecomposition& phi, double t, int m,
                                const TimeGrid& qgrid) {
    return sublinear_operator(model, lat, phi, t, m, qgrid);
}

DppReport verify_weak_dpp(const IntensityModel& model,
                          const RobustFactorLattice& lat,
                          const PayoffDecomposition& phi, double s, double t,
                          const TimeGrid& qgrid, const DppSampleSpec& spec) {
    if (model.n_levels() < 2) {
        throw std::domain_error("verify_weak_dpp: needs a two-level model");
    }
    if (s > t) {
        throw std::invalid_argument("verify_weak_dpp: requires s <= t");
    }
    int s_slice = lat.grid.node_index(s);
    int js = qgrid.node_index(s);
    int jt = qgrid.node_index(t);

    PayoffDecomposition wrapped;
    {
        auto inner = phi.phi;
        bool allow = spec.allow_signed;
        wrapped.phi = [inner, allow](const std::vector<double>& u, const Path& p) {
            double v = inner(u, p);
            if (!allow && v < 0.0) {
                throw std::domain_error(
                    "verify_weak_dpp: payoff must be non-negative");
            }
            return v;
        };
    }

    int t_slice = lat.grid.node_index(t);
    TValueCache cache{model, lat, wrapped, t, qgrid, t_slice, {}, {}, {}};
    PathHazards d = build_path_hazards(model, lat, qgrid, 2);
    int n_paths = static_cast<int>(d.paths.size());
    RegimeValue direct = sublinear_operator(model, lat, wrapped, s, 2, qgrid);

    // Staged values at s: the t-values are re-expanded with the residual
    // integrals split exactly at the regime boundary u_i = t, so the staged
    // quadrature composes the same cell sums as the direct one.
    auto staged_regime0 = [&]() {
        std::vector<double> term(n_paths);
        for (int i = 0; i < n_paths; ++i) {
            const Path& p = d.paths[i];
            const IntegratedCurve& h1 = d.level(i, 0);
            const IntegratedCurve& h2 = d.level(i, 1);
            auto first_level = [&](int j) {
                double inner_c = node_density_sum(h2, 0, jt - j, [&](int jy) {
                    return cache.C(j, j + jy).at(lat, p);
                });
                double survive_t = std::exp(-h2.values[jt - j]);
                return inner_c + survive_t * cache.B(j).at(lat, p);
            };
            double v = node_density_sum(h1, js, jt, first_level) +
                       std::exp(-h1.values[jt]) * cache.A0().at(lat, p);
            term[i] = std::exp(h1.values[js]) * v;
        }
        return robust_rollback(lat, std::move(term), s_slice);
    };

    auto staged_regime1 = [&](int j1) {
        std::vector<double> term(n_paths);
        for (int i = 0; i < n_paths; ++i) {
            const Path& p = d.paths[i];
            const IntegratedCurve& h2 = d.level(i, 1);
            double inner_c = node_density_sum(h2, js - j1, jt - j1, [&](int jy) {
                return cache.C(j1, j1 + jy).at(lat, p);
            });
            double v = inner_c +
                       std::exp(-h2.values[jt - j1]) * cache.B(j1).at(lat, p);
            term[i] = std::exp(h2.values[js - j1]) * v;
        }
        return robust_rollback(lat, std::move(term), s_slice);
    };

    auto staged_regime2 = [&](int j1, int j2) {
        std::vector<double> term(n_paths);
        for (int i = 0; i < n_paths; ++i) {
            term[i] = cache.C(j1, j2).at(lat, d.paths[i]);
        }
        return robust_rollback(lat, std::move(term), s_slice);
    };

    // Regimes compared at s: all of them when the node count is small, a
    // seeded draw otherwise.
    std::vector<int> u1_nodes;
    std::vector<std::pair<int, int>> u2_nodes;
    if (js <= spec.max_u_nodes) {
        for (int j1 = 1; j1 <= js; ++j1) {
            u1_nodes.push_back(j1);
            for (int j2 = j1; j2 <= js; ++j2) {
                u2_nodes.emplace_back(j1, j2);
            }
        }
    } else {
        for (int i = 0; i < spec.n_samples; ++i) {
            auto draw = [&](std::uint64_t which) {
                double u = uniform01(spec.seed, kStreamConfig, i, which);
                return 1 + std::min(js - 1, static_cast<int>(u * js));
            };
            u1_nodes.push_back(draw(0));
            int a = draw(1);
            int b2 = draw(2);
            u2_nodes.emplace_back(std::min(a, b2), std::max(a, b2));
        }
    }

    DppReport report;
    report.sample_seed = spec.seed;
    bool first = true;
    auto compare = [&](const PrefixValues& lhs, const PrefixValues& rhs, int k,
                       std::vector<double> u) {
        for (std::size_t w = 0; w < lhs.values.size(); ++w) {
            double gap = lhs.values[w] - rhs.values[w];
            ++report.n_compared;
            if (first || gap > report.max_gap) {
                report.max_gap = gap;
            }
            if (first || gap < report.min_gap) {
                first = false;
                report.min_gap = gap;
                report.regime_k = k;
                report.regime_u = u;
                report.prefix = static_cast<long long>(w);
            }
        }
    };

    compare(staged_regime0(), direct.value(Regime{0, {}}), 0, {});
    for (int j1 : u1_nodes) {
        double u1 = qgrid.node(j1);
        compare(staged_regime1(j1), direct.value(Regime{1, {u1}}), 1, {u1});
    }
    for (auto [j1, j2] : u2_nodes) {
        double u1 = qgrid.node(j1);
        double u2 = qgrid.node(j2);
        compare(staged_regime2(j1, j2), direct.value(Regime{2, {u1, u2}}), 2,
                {u1, u2});
    }
    return report;
}

double CommutationReport::max_residual() const {
    double m = 0.0;
    for (double r : residuals) {
        m = std::max(m, r);
    }
    return m;
}

CommutationReport check_commutation_conditions(const IntensityModel& model,
                                               const RobustFactorLattice& lat,
                                               const PayoffDecomposition& phi,
                                               double s, double t,
                                               const TimeGrid& qgrid) {
    if (model.n_levels() < 2) {
        throw std::domain_error(
            "check_commutation_conditions: needs a two-level model");
    }
    if (s > t) {
        throw std::invalid_argument("check_commutation_conditions: requires s <= t");
    }
    int t_slice = lat.grid.node_index(t);
    int js = qgrid.node_index(s);
    int jt = qgrid.node_index(t);
    int jn = qgrid.n_steps;

    PathHazards d = build_path_hazards(model, lat, qgrid, 2);
    int n_paths = static_cast<int>(d.paths.size());

    // One representative path per prefix class at t; default densities over
    // [0, t] agree within a class, so its weights stand in for the class.
    long long n_prefix = lat.prefix_count(t_slice);
    std::vector<int> rep(n_prefix, -1);
    for (int i = 0; i < n_paths; ++i) {
        long long pid = prefix_id(lat, d.paths[i], t_slice);
        if (rep[pid] < 0) {
            rep[pid] = i;
        }
    }

    auto phi_at = [&](int i, double u1, double u2) {
        return phi.phi({u1, u2}, d.paths[i]);
    };

    auto rollback = [&](const std::function<double(int)>& term) {
        std::vector<double> values(n_paths);
        for (int i = 0; i < n_paths; ++i) {
            values[i] = term(i);
        }
        return robust_rollback(lat, std::move(values), t_slice);
    };

    // Robust t-value of the payoff pinned at a pair of default nodes.
    std::unordered_map<long long, PrefixValues> pinned;
    auto pinned_value = [&](int j1, int j2) -> const PrefixValues& {
        long long key = static_cast<long long>(j1) * 1000000 + j2;
        auto it = pinned.find(key);
        if (it == pinned.end()) {
            double u1 = qgrid.node(j1);
            double u2 = qgrid.node(j2);
            it = pinned
                     .emplace(key, rollback([&](int i) { return phi_at(i, u1, u2); }))
                     .first;
        }
        return it->second;
    };

    // Second-level window value after a first default at node j: the mass on
    // {second inter-arrival > t - u_1}, censoring included.
    auto tail_integral = [&](int i, int j) {
        double u1 = qgrid.node(j);
        const IntegratedCurve& h2 = d.level(i, 1);
        double v = node_density_sum(h2, jt - j, jn, [&](int jy) {
            return phi_at(i, u1, u1 + qgrid.node(jy));
        });
        return v + std::exp(-h2.values[jn]) * phi.phi({u1, kCensoredTime},
                                                      d.paths[i]);
    };
    std::vector<std::vector<double>> g(jt + 1, std::vector<double>(n_paths));
    for (int j = 0; j <= jt; ++j) {
        for (int i = 0; i < n_paths; ++i) {
            g[j][i] = tail_integral(i, j);
        }
    }

    CommutationReport report;

    // Conditions 1 and 2: first default in (s, t], second level surviving t.
    // Both sides integrate the same x nodes; the left side integrates robust
    // t-values against the class-representative density, the right side takes
    // the robust value of the per-path integral.
    {
        std::vector<PrefixValues> v1(jt + 1);
        std::vector<PrefixValues> v2(jt + 1);
        for (int j = js; j <= jt; ++j) {
            v1[j] = rollback([&](int i) {
                return std::exp(-d.level(i, 1).values[jt - j]) * g[j][i];
            });
            v2[j] = rollback([&](int i) { return g[j][i]; });
        }
        for (int cond = 0; cond < 2; ++cond) {
            const std::vector<PrefixValues>& v = cond == 0 ? v1 : v2;
            PrefixValues lhs;
            lhs.slice = t_slice;
            lhs.values.resize(n_prefix);
            for (long long w = 0; w < n_prefix; ++w) {
                lhs.values[w] = node_density_sum(
                    d.level(rep[w], 0), js, jt, [&](int j) { return v[j].values[w]; });
            }
            PrefixValues rhs = rollback([&](int i) {
                return node_density_sum(d.level(i, 0), js, jt, [&](int j) {
                    double x = cond == 0 ? std::exp(-d.level(i, 1).values[jt - j]) : 1.0;
                    return x * g[j][i];
                });
            });
            report.residuals[cond] = max_abs_diff(lhs, rhs);
        }
    }

    // Per-path double integral over both defaults landing in (s, t] x (0, t].
    auto both_before_t = [&](int i) {
        return node_density_sum(d.level(i, 0), js, jt, [&](int j) {
            double u1 = qgrid.node(j);
            return node_density_sum(d.level(i, 1), 0, jt - j, [&](int jy) {
                return phi_at(i, u1, u1 + qgrid.node(jy));
            });
        });
    };

    // Condition 3: the same double integral with robust t-values inside.
    {
        PrefixValues lhs;
        lhs.slice = t_slice;
        lhs.values.resize(n_prefix);
        for (long long w = 0; w < n_prefix; ++w) {
            const IntegratedCurve& h1 = d.level(rep[w], 0);
            const IntegratedCurve& h2 = d.level(rep[w], 1);
            lhs.values[w] = node_density_sum(h1, js, jt, [&](int j) {
                return node_density_sum(h2, 0, jt - j, [&](int jy) {
                    return pinned_value(j, j + jy).values[w];
                });
            });
        }
        PrefixValues rhs = rollback(both_before_t);
        report.residuals[2] = max_abs_diff(lhs, rhs);
    }

    // Condition 4: additivity of the robust value over the three windows
    // (first default after t; first in (s, t] with the second surviving t;
    // both in (s, t]).
    {
        PrefixValues rb1 = rollback([&](int i) {
            std::vector<IntegratedCurve> hazards{d.level(i, 0), d.level(i, 1)};
            std::vector<double> u(2, kCensoredTime);
            return residual_default_expectation(hazards, phi, d.paths[i], u, 0, t);
        });
        PrefixValues rb2 = rollback([&](int i) {
            return node_density_sum(d.level(i, 0), js, jt,
                                    [&](int j) { return g[j][i]; });
        });
        PrefixValues rb3 = rollback(both_before_t);
        PrefixValues rb_sum = rollback([&](int i) {
            std::vector<IntegratedCurve> hazards{d.level(i, 0), d.level(i, 1)};
            std::vector<double> u(2, kCensoredTime);
            double t1 =
                residual_default_expectation(hazards, phi, d.paths[i], u, 0, t);
            double t2 = node_density_sum(d.level(i, 0), js, jt,
                                         [&](int j) { return g[j][i]; });
            return t1 + t2 + both_before_t(i);
        });
        double m = 0.0;
        for (long long w = 0; w < n_prefix; ++w) {
            m = std::max(m, std::fabs(rb1.values[w] + rb2.values[w] +
                                      rb3.values[w] - rb_sum.values[w]));
        }
        report.residuals[3] = m;
    }

    // Conditions 5 and 6: observed first default at a node in (0, s], second
    // level landing in (s, t] (exchange), plus additivity with the window
    // surviving t.
    {
        double m5 = 0.0;
        double m6 = 0.0;
        for (int j1 = 1; j1 <= js; ++j1) {
            double u1 = qgrid.node(j1);
            auto window = [&](int i) {
                return node_density_sum(d.level(i, 1), js - j1, jt - j1, [&](int jy) {
                    return phi_at(i, u1, u1 + qgrid.node(jy));
                });
            };
            PrefixValues lhs;
            lhs.slice = t_slice;
            lhs.values.resize(n_prefix);
            for (long long w = 0; w < n_prefix; ++w) {
                lhs.values[w] = node_density_sum(
                    d.level(rep[w], 1), js - j1, jt - j1, [&](int jy) {
                        return pinned_value(j1, j1 + jy).values[w];
                    });
            }
            PrefixValues rhs = rollback(window);
            m5 = std::max(m5, max_abs_diff(lhs, rhs));

            PrefixValues rb_u1 = rollback([&](int i) { return g[j1][i]; });
            PrefixValues rb_sum = rollback(
                [&](int i) { return g[j1][i] + window(i); });
            for (long long w = 0; w < n_prefix; ++w) {
                m6 = std::max(m6, std::fabs(rb_u1.values[w] + rhs.values[w] -
                                            rb_sum.values[w]));
            }
        }
        report.residuals[4] = m5;
        report.residuals[5] = m6;
    }

    return report;
}

}  // namespace ordef
