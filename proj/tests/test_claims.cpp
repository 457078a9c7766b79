#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ordef/claims.hpp"

using namespace ordef;

namespace {

const TimeGrid kLatGrid(2.0, 4);
const TimeGrid kQGrid(2.0, 40);
const TimeGrid kFineGrid(2.0, 4000);

IntensityModel factor_model() {
    return IntensityModel::factor_driven(
        {[](double, double x) { return 0.5 + 0.4 * x; },
         [](double, double x) { return 0.9 + 0.3 * x; }});
}

RobustFactorLattice trivial_lattice() {
    return RobustFactorLattice::single_state(kLatGrid, 1.0);
}

RobustFactorLattice one_kernel_lattice() {
    return RobustFactorLattice::binomial(kLatGrid, 1.0, 1.25, 0.8, {0.35});
}

RobustFactorLattice two_kernel_lattice() {
    return RobustFactorLattice::binomial(kLatGrid, 1.0, 1.25, 0.8, {0.35, 0.75});
}

double terminal_factor(const RobustFactorLattice& lat, const Path& p) {
    return lat.state_value(lat.grid.n_steps, p.back());
}

PathValue unit_payoff() {
    return [](const Path&) { return 1.0; };
}

RecoveryCurve unit_recovery() {
    return [](double, const Path&) { return 1.0; };
}

void check_all_close(const PrefixValues& a, const PrefixValues& b, double tol) {
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t w = 0; w < a.values.size(); ++w) {
        CHECK(a.values[w] == doctest::Approx(b.values[w]).epsilon(tol));
    }
}

}  // namespace

TEST_CASE("first-level survival prices the exponential tail") {
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0});
    RegimeValue rv = price_survival_first(m, lat, unit_payoff(), 1.0, 0.0, kQGrid);
    CHECK(rv.value(Regime{0, {}}).values[0] ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(rv.value(Regime{1, {0.0}}).values[0] == 0.0);

    RegimeValue at_maturity =
        price_survival_first(m, lat, unit_payoff(), 1.0, 1.0, kQGrid);
    CHECK(at_maturity.value(Regime{0, {}}).values[0] ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("first-level survival equals the lattice expectation of the "
          "discounted payoff") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    double t = 0.5;
    double T = 1.5;
    PathValue payoff = [&lat](const Path& p) {
        return 1.0 + 0.5 * terminal_factor(lat, p);
    };
    RegimeValue rv = price_survival_first(m, lat, payoff, T, t, kQGrid);

    PathFunctional f;
    f.eval = [&](const Path& p) {
        FactorAt x = path_factor(lat, p);
        IntegratedCurve h1 = m.level_hazard(1, &x, kQGrid);
        return payoff(p) * std::exp(-(h1.at(T) - h1.at(t)));
    };
    PrefixValues direct =
        conditional_sublinear_expectation(lat, f, lat.grid.node_index(t));
    check_all_close(rv.value(Regime{0, {}}), direct, 1e-9);
}

TEST_CASE("second-level survival prices the hypoexponential tail") {
    TimeGrid qgrid(2.0, 10000);
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});
    RegimeValue rv = price_survival_second(m, lat, unit_payoff(), 1.0, 0.0, qgrid);
    double hypo = 2.0 * std::exp(-1.0) - std::exp(-2.0);
    CHECK(rv.value(Regime{0, {}}).values[0] ==
          doctest::Approx(hypo).epsilon(1e-6));
    CHECK(rv.value(Regime{2, {0.0, 0.0}}).values[0] == 0.0);
}

TEST_CASE("second-level survival restarts the clock at the observed first "
          "default") {
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});
    double t = 0.5;
    double T = 1.0;
    RegimeValue rv = price_survival_second(m, lat, unit_payoff(), T, t, kQGrid);
    // first default observed exactly at t: the second clock starts fresh
    CHECK(rv.value(Regime{1, {t}}).values[0] ==
          doctest::Approx(std::exp(-2.0 * (T - t))).epsilon(1e-12));
    // earlier first default: part of the second clock has already run
    double u1 = 0.25;
    CHECK(rv.value(Regime{1, {u1}}).values[0] ==
          doctest::Approx(std::exp(-2.0 * (T - t))).epsilon(1e-12));
}

TEST_CASE("second-level survival matches simulated frequencies") {
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});
    RobustFactorLattice lat = trivial_lattice();
    RegimeValue rv =
        price_survival_second(m, lat, unit_payoff(), 1.0, 0.0, kFineGrid);
    double price = rv.value(Regime{0, {}}).values[0];

    long long n = 20000;
    long long survived = 0;
    simulate_scenarios(m, nullptr, constant_policy(0), n, 20240817,
                       TimeGrid(2.0, 2000),
                       [&](long long, const DefaultScenario& sc) {
                           if (sc.default_times[1] > 1.0) {
                               ++survived;
                           }
                       });
    double p_hat = static_cast<double>(survived) / static_cast<double>(n);
    double se = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
    CHECK(std::fabs(p_hat - price) <= 3.0 * se);
}

TEST_CASE("first-default recovery prices the default-time distribution") {
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0});

    RegimeValue flat =
        price_recovery_first(m, lat, unit_recovery(), 0.0, 1.0, 1.0, kQGrid);
    CHECK(flat.value(Regime{0, {}}).values[0] ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK(flat.value(Regime{1, {0.0}}).values[0] == 0.0);

    RecoveryCurve zero = [](double, const Path&) { return 0.0; };
    RegimeValue none =
        price_recovery_first(m, lat, zero, 0.0, 1.0, 1.0, kQGrid);
    CHECK(none.value(Regime{0, {}}).values[0] == 0.0);

    // Z_u = u integrates to 1 - 2/e by parts
    RecoveryCurve linear = [](double u, const Path&) { return u; };
    RegimeValue ramp =
        price_recovery_first(m, lat, linear, 0.0, 1.0, 2.0, kFineGrid);
    CHECK(ramp.value(Regime{0, {}}).values[0] ==
          doctest::Approx(1.0 - 2.0 * std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("second-default recovery prices the hypoexponential complement") {
    TimeGrid qgrid(2.0, 2000);
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});
    RegimeValue rv =
        price_recovery_second(m, lat, unit_recovery(), 0.0, 1.0, 1.0, qgrid);
    double hypo = 2.0 * std::exp(-1.0) - std::exp(-2.0);
    CHECK(rv.value(Regime{0, {}}).values[0] ==
          doctest::Approx(1.0 - hypo).epsilon(1e-6));

    // observed first default at t: fresh exponential clock for the second
    double t = 0.5;
    RegimeValue shifted =
        price_recovery_second(m, lat, unit_recovery(), t, 1.0, 1.0, kQGrid);
    CHECK(shifted.value(Regime{1, {t}}).values[0] ==
          doctest::Approx(1.0 - std::exp(-2.0 * 0.5)).epsilon(1e-9));
}

TEST_CASE("survival and recovery of the second default add up to one") {
    TimeGrid qgrid(2.0, 400);
    IntensityModel m = factor_model();

    // single prior: per path the two quadratures telescope to the same total
    // mass, so the rolled-back values sum to one exactly
    RobustFactorLattice lat = one_kernel_lattice();
    PrefixValues s0 = price_survival_second(m, lat, unit_payoff(), 1.0, 0.0,
                                            qgrid).value(Regime{0, {}});
    PrefixValues r0 = price_recovery_second(m, lat, unit_recovery(), 0.0, 1.0,
                                            1.0, qgrid).value(Regime{0, {}});
    for (std::size_t w = 0; w < s0.values.size(); ++w) {
        CHECK(s0.values[w] + r0.values[w] ==
              doctest::Approx(1.0).epsilon(1e-12));
    }

    // several priors: each worst case is at least the shared total, so the
    // sum dominates one
    RobustFactorLattice big = two_kernel_lattice();
    PrefixValues s2 = price_survival_second(m, big, unit_payoff(), 1.0, 0.0,
                                            qgrid).value(Regime{0, {}});
    PrefixValues r2 = price_recovery_second(m, big, unit_recovery(), 0.0, 1.0,
                                            1.0, qgrid).value(Regime{0, {}});
    for (std::size_t w = 0; w < s2.values.size(); ++w) {
        CHECK(s2.values[w] + r2.values[w] >= 1.0 - 1e-12);
    }
}

TEST_CASE("second-default recovery matches simulated payout averages") {
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});
    RobustFactorLattice lat = trivial_lattice();
    RecoveryCurve curve = [](double u, const Path&) { return std::exp(-u); };
    RegimeValue rv =
        price_recovery_second(m, lat, curve, 0.0, 1.0, 1.0, kFineGrid);
    double price = rv.value(Regime{0, {}}).values[0];

    long long n = 20000;
    double sum = 0.0;
    double sum_sq = 0.0;
    simulate_scenarios(m, nullptr, constant_policy(0), n, 911,
                       TimeGrid(2.0, 2000),
                       [&](long long, const DefaultScenario& sc) {
                           double u2 = sc.default_times[1];
                           double z = u2 <= 1.0 ? std::exp(-u2) : 0.0;
                           sum += z;
                           sum_sq += z * z;
                       });
    double mean = sum / static_cast<double>(n);
    double var = sum_sq / static_cast<double>(n) - mean * mean;
    double se = std::sqrt(var / static_cast<double>(n));
    CHECK(std::fabs(mean - price) <= 3.0 * se);
}

TEST_CASE("claims reject invalid inputs") {
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel m = IntensityModel::constant_per_level({1.0, 2.0});

    CHECK_THROWS_AS(price_survival_first(m, lat, unit_payoff(), 0.5, 1.0, kQGrid),
                    std::domain_error);
    CHECK_THROWS_AS(
        price_recovery_first(m, lat, unit_recovery(), 1.0, 0.5, 1.0, kQGrid),
        std::domain_error);

    // recovery sampled outside its declared bound
    RecoveryCurve toobig = [](double, const Path&) { return 2.0; };
    CHECK_THROWS_AS(
        price_recovery_first(m, lat, toobig, 0.0, 1.0, 1.0, kQGrid),
        std::domain_error);
    RecoveryCurve negative = [](double, const Path&) { return -0.1; };
    CHECK_THROWS_AS(
        price_recovery_second(m, lat, negative, 0.0, 1.0, 1.0, kQGrid),
        std::domain_error);

    // signed maturity payoff
    PathValue signed_payoff = [](const Path&) { return -1.0; };
    CHECK_THROWS_AS(
        price_survival_second(m, lat, signed_payoff, 1.0, 0.5, kQGrid),
        std::domain_error);

    // regime inconsistent with the query time
    RegimeValue rv = price_survival_second(m, lat, unit_payoff(), 1.5, 1.0, kQGrid);
    CHECK_THROWS_AS(rv.value(Regime{1, {1.5}}), std::domain_error);

    IntensityModel single = IntensityModel::constant_per_level({1.0});
    CHECK_THROWS_AS(
        price_survival_second(single, lat, unit_payoff(), 1.0, 0.0, kQGrid),
        std::domain_error);
}

TEST_CASE("enlarging the prior family never lowers a worst-case price") {
    RobustFactorLattice small = one_kernel_lattice();
    RobustFactorLattice big = two_kernel_lattice();
    IntensityModel m = factor_model();
    PathValue payoff = [&big](const Path& p) {
        return 1.0 + 0.5 * terminal_factor(big, p);
    };
    RecoveryCurve curve = [](double u, const Path&) {
        return 0.4 + 0.2 * std::cos(u);
    };

    PrefixValues s1 =
        price_survival_second(m, small, payoff, 1.5, 0.5, kQGrid).value(Regime{0, {}});
    PrefixValues s2 =
        price_survival_second(m, big, payoff, 1.5, 0.5, kQGrid).value(Regime{0, {}});
    PrefixValues r1 =
        price_recovery_second(m, small, curve, 0.5, 1.5, 1.0, kQGrid).value(Regime{0, {}});
    PrefixValues r2 =
        price_recovery_second(m, big, curve, 0.5, 1.5, 1.0, kQGrid).value(Regime{0, {}});
    REQUIRE(s1.values.size() == s2.values.size());
    for (std::size_t w = 0; w < s1.values.size(); ++w) {
        CHECK(s2.values[w] >= s1.values[w] - 1e-12);
        CHECK(r2.values[w] >= r1.values[w] - 1e-12);
    }
}

TEST_CASE("an immediate second level collapses to the first-level price") {
    RobustFactorLattice lat = trivial_lattice();
    IntensityModel both = IntensityModel::constant_per_level({1.0, 1e4});
    IntensityModel first = IntensityModel::constant_per_level({1.0});
    RegimeValue second =
        price_survival_second(both, lat, unit_payoff(), 1.0, 0.0, kFineGrid);
    RegimeValue base =
        price_survival_first(first, lat, unit_payoff(), 1.0, 0.0, kFineGrid);
    CHECK(second.value(Regime{0, {}}).values[0] ==
          doctest::Approx(base.value(Regime{0, {}}).values[0]).epsilon(1e-3));
}

TEST_CASE("prices stay within the payoff bounds") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    double bound = 1.0;
    RecoveryCurve curve = [&lat](double u, const Path& p) {
        return 0.3 + 0.2 * std::sin(u) + 0.1 * terminal_factor(lat, p) / 2.5;
    };
    for (const RegimeValue& rv :
         {price_recovery_first(m, lat, curve, 0.5, 1.5, bound, kQGrid),
          price_recovery_second(m, lat, curve, 0.5, 1.5, bound, kQGrid)}) {
        for (double v : rv.value(Regime{0, {}}).values) {
            CHECK(v >= 0.0);
            CHECK(v <= bound + 1e-12);
        }
    }
}

TEST_CASE("survival tower holds when the maturity precedes the window sum") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    double s = 0.5;
    double t = 1.0;
    double T = 1.5;  // T <= t + s
    TowerReport report =
        check_tower_survival(m, lat, unit_payoff(), s, t, T, kQGrid);
    CHECK(report.interchange <= kTolDpp);
    CHECK(report.additivity <= kTolDpp);
    CHECK(report.tower_residual() <= kTolDpp);
}

TEST_CASE("path-dependent survival payoffs keep the interchange but not the "
          "split") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    PathValue payoff = [&lat](const Path& p) {
        return 1.0 + 0.4 * terminal_factor(lat, p);
    };
    TowerReport report =
        check_tower_survival(m, lat, payoff, 0.5, 1.0, 1.5, kQGrid);
    CHECK(report.interchange <= kTolDpp);
    // the split condition has no general proof; record it without asserting
    CHECK(report.additivity >= 0.0);
    MESSAGE("path-dependent additivity residual: " << report.additivity
                                                   << ", tower residual: "
                                                   << report.tower_residual());
}

TEST_CASE("recovery tower holds for deterministic curves inside the window "
          "sum") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    RecoveryCurve curve = [](double u, const Path&) {
        return 0.5 + 0.2 * std::cos(u);
    };
    TowerReport report =
        check_tower_recovery(m, lat, curve, 0.5, 1.0, 1.5, 1.0, kQGrid);
    CHECK(report.interchange <= kTolDpp);
    CHECK(report.additivity <= kTolDpp);
    CHECK(report.tower_residual() <= kTolDpp);
}

TEST_CASE("singleton priors satisfy both towers for any claim") {
    RobustFactorLattice lat = one_kernel_lattice();
    IntensityModel m = factor_model();
    PathValue payoff = [&lat](const Path& p) {
        return 0.8 + 0.3 * terminal_factor(lat, p);
    };
    RecoveryCurve curve = [&lat](double u, const Path& p) {
        return 0.3 + 0.2 * std::sin(u) + 0.1 * terminal_factor(lat, p) / 2.5;
    };
    TowerReport surv = check_tower_survival(m, lat, payoff, 0.5, 1.0, 1.75, kQGrid);
    TowerReport reco =
        check_tower_recovery(m, lat, curve, 0.5, 1.0, 1.75, 1.0, kQGrid);
    CHECK(surv.tower_residual() <= 1e-9);
    CHECK(reco.tower_residual() <= 1e-9);
}

TEST_CASE("recovery tower beyond the window sum is reported, not asserted") {
    RobustFactorLattice lat = two_kernel_lattice();
    IntensityModel m = factor_model();
    RecoveryCurve curve = [](double u, const Path&) {
        return 0.4 + 0.3 * std::sin(2.0 * u);
    };
    double s = 0.5;
    double t = 1.0;
    double T = 2.0;  // T > t + s: the conditions may fail
    TowerReport report = check_tower_recovery(m, lat, curve, s, t, T, 1.0, kQGrid);
    CHECK(report.conditions_residual() >= 0.0);
    MESSAGE("exploratory residuals: interchange "
            << report.interchange << ", additivity " << report.additivity
            << ", tower " << report.tower_residual());
}
