#include "ordef/claims.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace ordef {

namespace {

std::vector<double> checked_payoffs(const PathValue& payoff,
                                    const std::vector<Path>& paths) {
    std::vector<double> ys(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        double y = payoff(paths[i]);
        if (!std::isfinite(y) || y < 0.0) {
            throw std::domain_error(
                "claims: maturity payoff must be non-negative and finite");
        }
        ys[i] = y;
    }
    return ys;
}

double checked_recovery(const RecoveryCurve& recovery, double time,
                        const Path& p, double bound) {
    double z = recovery(time, p);
    if (!(z >= 0.0) || z > bound) {
        throw std::domain_error("claims: recovery value outside [0, bound]");
    }
    return z;
}

PrefixValues zero_values(const RobustFactorLattice& lat, int t_slice) {
    PrefixValues v;
    v.slice = t_slice;
    v.values.assign(lat.prefix_count(t_slice), 0.0);
    return v;
}

void check_window(double t, double s, double bound, const TimeGrid& qgrid,
                  const char* who) {
    if (t > s) {
        throw std::domain_error(std::string(who) +
                                ": window end before its start");
    }
    if (!(bound >= 0.0)) {
        throw std::invalid_argument(std::string(who) +
                                    ": declared bound must be non-negative");
    }
    qgrid.node_index(t);
    qgrid.node_index(s);
}

}  // namespace

RegimeValue price_survival_first(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const PathValue& payoff, double T, double t,
                                 const TimeGrid& qgrid) {
    if (t > T) {
        throw std::domain_error(
            "price_survival_first: query time after maturity");
    }
    int t_slice = lat.grid.node_index(t);
    int jt = qgrid.node_index(t);
    int jT = qgrid.node_index(T);
    PathHazards d = build_path_hazards(model, lat, qgrid, 1);
    std::vector<double> term = checked_payoffs(payoff, d.paths);
    for (std::size_t i = 0; i < d.paths.size(); ++i) {
        const IntegratedCurve& h1 = d.level(i, 0);
        term[i] *= std::exp(-(h1.values[jT] - h1.values[jt]));
    }
    PrefixValues alive = robust_rollback(lat, std::move(term), t_slice);
    PrefixValues zeros = zero_values(lat, t_slice);

    RegimeValue rv;
    rv.t = t;
    rv.n_levels = model.n_levels();
    int n_levels = model.n_levels();
    rv.value = [alive, zeros, n_levels, t](const Regime& r) {
        validate_regime(r, n_levels, t);
        return r.k == 0 ? alive : zeros;
    };
    return rv;
}

RegimeValue price_survival_second(const IntensityModel& model,
                                  const RobustFactorLattice& lat,
                                  const PathValue& payoff, double T, double t,
                                  const TimeGrid& qgrid) {
    if (model.n_levels() < 2) {
        throw std::domain_error(
            "price_survival_second: needs a two-level model");
    }
    if (t > T) {
        throw std::domain_error(
            "price_survival_second: query time after maturity");
    }
    int t_slice = lat.grid.node_index(t);
    int jt = qgrid.node_index(t);
    int jT = qgrid.node_index(T);
    auto d = std::make_shared<PathHazards>(build_path_hazards(model, lat, qgrid, 2));
    auto ys = std::make_shared<std::vector<double>>(
        checked_payoffs(payoff, d->paths));

    std::vector<double> term(d->paths.size());
    for (std::size_t i = 0; i < d->paths.size(); ++i) {
        const IntegratedCurve& h1 = d->level(i, 0);
        const IntegratedCurve& h2 = d->level(i, 1);
        double first_in_window =
            std::exp(h1.values[jt]) *
            node_density_sum(h1, jt, jT, [&](int j) {
                return std::exp(-h2.values[jT - j]);
            });
        double first_after = std::exp(-(h1.values[jT] - h1.values[jt]));
        term[i] = (*ys)[i] * (first_in_window + first_after);
    }
    PrefixValues alive = robust_rollback(lat, std::move(term), t_slice);
    PrefixValues zeros = zero_values(lat, t_slice);

    const RobustFactorLattice* lat_p = &lat;
    RegimeValue rv;
    rv.t = t;
    rv.n_levels = 2;
    rv.value = [alive, zeros, d, ys, lat_p, t_slice, t, T](const Regime& r) {
        validate_regime(r, 2, t);
        if (r.k == 0) {
            return alive;
        }
        if (r.k == 2) {
            return zeros;
        }
        double u1 = r.u[0];
        std::vector<double> v(d->paths.size());
        for (std::size_t i = 0; i < d->paths.size(); ++i) {
            const IntegratedCurve& h2 = d->level(i, 1);
            v[i] = (*ys)[i] * std::exp(-(h2.at(T - u1) - h2.at(t - u1)));
        }
        return robust_rollback(*lat_p, std::move(v), t_slice);
    };
    return rv;
}

RegimeValue price_recovery_first(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const RecoveryCurve& recovery, double t,
                                 double s, double bound,
                                 const TimeGrid& qgrid) {
    check_window(t, s, bound, qgrid, "price_recovery_first");
    int t_slice = lat.grid.node_index(t);
    int jt = qgrid.node_index(t);
    int js = qgrid.node_index(s);
    PathHazards d = build_path_hazards(model, lat, qgrid, 1);
    std::vector<double> term(d.paths.size());
    for (std::size_t i = 0; i < d.paths.size(); ++i) {
        const IntegratedCurve& h1 = d.level(i, 0);
        const Path& p = d.paths[i];
        term[i] = std::exp(h1.values[jt]) *
                  node_density_sum(h1, jt, js, [&](int j) {
                      return checked_recovery(recovery, qgrid.node(j), p, bound);
                  });
    }
    PrefixValues alive = robust_rollback(lat, std::move(term), t_slice);
    PrefixValues zeros = zero_values(lat, t_slice);

    RegimeValue rv;
    rv.t = t;
    rv.n_levels = model.n_levels();
    int n_levels = model.n_levels();
    rv.value = [alive, zeros, n_levels, t](const Regime& r) {
        validate_regime(r, n_levels, t);
        return r.k == 0 ? alive : zeros;
    };
    return rv;
}

RegimeValue price_recovery_second(const IntensityModel& model,
                                  const RobustFactorLattice& lat,
                                  const RecoveryCurve& recovery, double t,
                                  double s, double bound,
                                  const TimeGrid& qgrid) {
    if (model.n_levels() < 2) {
        throw std::domain_error(
            "price_recovery_second: needs a two-level model");
    }
    check_window(t, s, bound, qgrid, "price_recovery_second");
    int t_slice = lat.grid.node_index(t);
    int jt = qgrid.node_index(t);
    int js = qgrid.node_index(s);
    auto d = std::make_shared<PathHazards>(build_path_hazards(model, lat, qgrid, 2));

    std::vector<double> term(d->paths.size());
    for (std::size_t i = 0; i < d->paths.size(); ++i) {
        const IntegratedCurve& h1 = d->level(i, 0);
        const IntegratedCurve& h2 = d->level(i, 1);
        const Path& p = d->paths[i];
        auto second_in_window = [&](int j) {
            return node_density_sum(h2, 0, js - j, [&](int jx) {
                return checked_recovery(recovery, qgrid.node(j + jx), p, bound);
            });
        };
        term[i] = std::exp(h1.values[jt]) *
                  node_density_sum(h1, jt, js, second_in_window);
    }
    PrefixValues alive = robust_rollback(lat, std::move(term), t_slice);
    PrefixValues zeros = zero_values(lat, t_slice);

    const RobustFactorLattice* lat_p = &lat;
    RegimeValue rv;
    rv.t = t;
    rv.n_levels = 2;
    rv.value = [alive, zeros, d, lat_p, recovery, bound, t_slice, t,
                s](const Regime& r) {
        validate_regime(r, 2, t);
        if (r.k == 0) {
            return alive;
        }
        if (r.k == 2) {
            return zeros;
        }
        double u1 = r.u[0];
        std::vector<double> v(d->paths.size());
        for (std::size_t i = 0; i < d->paths.size(); ++i) {
            const IntegratedCurve& h2 = d->level(i, 1);
            const Path& p = d->paths[i];
            auto z = [&](double x) {
                return checked_recovery(recovery, u1 + x, p, bound);
            };
            v[i] = std::exp(h2.at(t - u1)) *
                   density_integral(h2, z, t - u1, s - u1);
        }
        return robust_rollback(*lat_p, std::move(v), t_slice);
    };
    return rv;
}

double TowerReport::conditions_residual() const {
    return std::max(interchange, additivity);
}

double TowerReport::tower_residual() const {
    return std::max(std::fabs(staged_min_gap), std::fabs(staged_max_gap));
}

bool TowerReport::conditions_hold(double tol) const {
    return interchange <= tol && additivity <= tol;
}

namespace {

// Shared frame for the two tower checks: enumerated paths with their hazards,
// one representative path per prefix class at t, and a rollback helper.
struct TowerFrame {
    PathHazards d;
    int n_paths = 0;
    long long n_prefix = 0;
    std::vector<int> rep;
    int t_slice = 0;
    const RobustFactorLattice* lat = nullptr;

    PrefixValues rollback(const std::function<double(int)>& term) const {
        std::vector<double> values(n_paths);
        for (int i = 0; i < n_paths; ++i) {
            values[i] = term(i);
        }
        return robust_rollback(*lat, std::move(values), t_slice);
    }
};

TowerFrame build_tower_frame(const IntensityModel& model,
                             const RobustFactorLattice& lat, double s, double t,
                             double T, const TimeGrid& qgrid, const char* who) {
    if (model.n_levels() < 2) {
        throw std::domain_error(std::string(who) + ": needs a two-level model");
    }
    if (s > t || t > T) {
        throw std::invalid_argument(std::string(who) + ": requires s <= t <= T");
    }
    qgrid.node_index(s);
    qgrid.node_index(t);
    qgrid.node_index(T);
    TowerFrame fr;
    fr.lat = &lat;
    fr.t_slice = lat.grid.node_index(t);
    fr.d = build_path_hazards(model, lat, qgrid, 2);
    fr.n_paths = static_cast<int>(fr.d.paths.size());
    fr.n_prefix = lat.prefix_count(fr.t_slice);
    fr.rep.assign(fr.n_prefix, -1);
    for (int i = 0; i < fr.n_paths; ++i) {
        long long pid = prefix_id(lat, fr.d.paths[i], fr.t_slice);
        if (fr.rep[pid] < 0) {
            fr.rep[pid] = i;
        }
    }
    return fr;
}

// Residual of pulling the conditional evaluator through the first-default
// integral over (s, t]: the left side integrates per-node robust values
// against the class-representative density, the right side takes the robust
// value of the per-path integral.
double interchange_residual(const TowerFrame& fr, int js, int jt,
                            const std::function<double(int, int)>& inner) {
    std::vector<PrefixValues> v(jt + 1);
    for (int j = js; j <= jt; ++j) {
        v[j] = fr.rollback([&](int i) { return inner(i, j); });
    }
    PrefixValues rhs = fr.rollback([&](int i) {
        return node_density_sum(fr.d.level(i, 0), js, jt,
                                [&](int j) { return inner(i, j); });
    });
    double m = 0.0;
    for (long long w = 0; w < fr.n_prefix; ++w) {
        double lhs = node_density_sum(fr.d.level(fr.rep[w], 0), js, jt,
                                      [&](int j) { return v[j].values[w]; });
        m = std::max(m, std::fabs(lhs - rhs.values[w]));
    }
    return m;
}

// Residual of splitting the evaluator over two default windows.
double additivity_residual(const TowerFrame& fr,
                           const std::function<double(int)>& a,
                           const std::function<double(int)>& b) {
    PrefixValues ra = fr.rollback(a);
    PrefixValues rb = fr.rollback(b);
    PrefixValues rs = fr.rollback([&](int i) { return a(i) + b(i); });
    double m = 0.0;
    for (long long w = 0; w < fr.n_prefix; ++w) {
        m = std::max(m, std::fabs(ra.values[w] + rb.values[w] - rs.values[w]));
    }
    return m;
}

void assert_tower(const TowerReport& report, const char* who) {
    if (report.conditions_hold() && report.tower_residual() > kTolDpp) {
        throw std::runtime_error(
            std::string(who) +
            ": tower equality violated although its sufficient conditions hold");
    }
}

}  // namespace

TowerReport check_tower_survival(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const PathValue& payoff, double s, double t,
                                 double T, const TimeGrid& qgrid) {
    TowerFrame fr =
        build_tower_frame(model, lat, s, t, T, qgrid, "check_tower_survival");
    int js = qgrid.node_index(s);
    int jt = qgrid.node_index(t);
    int jT = qgrid.node_index(T);
    std::vector<double> ys = checked_payoffs(payoff, fr.d.paths);

    TowerReport report;
    report.interchange =
        interchange_residual(fr, js, jt, [&](int i, int j) {
            return ys[i] * std::exp(-fr.d.level(i, 1).values[jT - j]);
        });

    // Value of {tau_2 > T} split as first default after t plus first default
    // in (s, t] with the second level surviving, against the combined window.
    auto post_t = [&](int i) {
        const IntegratedCurve& h1 = fr.d.level(i, 0);
        const IntegratedCurve& h2 = fr.d.level(i, 1);
        double in_window = node_density_sum(h1, jt, jT, [&](int j) {
            return std::exp(-h2.values[jT - j]);
        });
        return ys[i] * (in_window + std::exp(-h1.values[jT]));
    };
    auto straddle = [&](int i) {
        const IntegratedCurve& h1 = fr.d.level(i, 0);
        const IntegratedCurve& h2 = fr.d.level(i, 1);
        return ys[i] * node_density_sum(h1, js, jt, [&](int j) {
                   return std::exp(-h2.values[jT - j]);
               });
    };
    report.additivity = additivity_residual(fr, post_t, straddle);

    PayoffDecomposition phi;
    phi.phi = [payoff, T](const std::vector<double>& u, const Path& p) {
        return u[1] > T ? payoff(p) : 0.0;
    };
    DppReport dpp = verify_weak_dpp(model, lat, phi, s, t, qgrid);
    report.staged_min_gap = dpp.min_gap;
    report.staged_max_gap = dpp.max_gap;
    assert_tower(report, "check_tower_survival");
    return report;
}

TowerReport check_tower_recovery(const IntensityModel& model,
                                 const RobustFactorLattice& lat,
                                 const RecoveryCurve& recovery, double s,
                                 double t, double T, double bound,
                                 const TimeGrid& qgrid) {
    TowerFrame fr =
        build_tower_frame(model, lat, s, t, T, qgrid, "check_tower_recovery");
    if (!(bound >= 0.0)) {
        throw std::invalid_argument(
            "check_tower_recovery: declared bound must be non-negative");
    }
    int js = qgrid.node_index(s);
    int jt = qgrid.node_index(t);
    int jT = qgrid.node_index(T);

    auto zval = [&](int i, int node) {
        return checked_recovery(recovery, qgrid.node(node), fr.d.paths[i],
                                bound);
    };
    // Recovery on a second default in (t, T] after a first default at node j.
    auto straddle_inner = [&](int i, int j) {
        return node_density_sum(fr.d.level(i, 1), jt - j, jT - j,
                                [&](int jv) { return zval(i, j + jv); });
    };

    TowerReport report;
    report.interchange = interchange_residual(fr, js, jt, straddle_inner);

    auto post_t = [&](int i) {
        return node_density_sum(fr.d.level(i, 0), jt, jT, [&](int j) {
            return node_density_sum(fr.d.level(i, 1), 0, jT - j,
                                    [&](int jv) { return zval(i, j + jv); });
        });
    };
    auto straddle = [&](int i) {
        return node_density_sum(fr.d.level(i, 0), js, jt,
                                [&](int j) { return straddle_inner(i, j); });
    };
    report.additivity = additivity_residual(fr, post_t, straddle);

    PayoffDecomposition phi;
    phi.phi = [recovery, T, bound](const std::vector<double>& u, const Path& p) {
        return u[1] < T ? checked_recovery(recovery, u[1], p, bound) : 0.0;
    };
    DppReport dpp = verify_weak_dpp(model, lat, phi, s, t, qgrid);
    report.staged_min_gap = dpp.min_gap;
    report.staged_max_gap = dpp.max_gap;
    assert_tower(report, "check_tower_recovery");
    return report;
}

}  // namespace ordef
