#include "ordef/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ordef/rng.hpp"

namespace ordef {

void RobustFactorLattice::validate() const {
    int n = grid.n_steps;
    if (static_cast<int>(states.size()) != n + 1) {
        throw std::invalid_argument("lattice: states must have one list per slice");
    }
    if (static_cast<int>(kernels.size()) != n) {
        throw std::invalid_argument("lattice: kernels must have one set per step");
    }
    for (int j = 0; j <= n; ++j) {
        if (states[j].empty()) {
            throw std::invalid_argument("lattice: empty state list at slice " +
                                        std::to_string(j));
        }
    }
    if (initial_state < 0 || initial_state >= static_cast<int>(states[0].size())) {
        throw std::invalid_argument("lattice: initial_state out of range");
    }
    for (int j = 0; j < n; ++j) {
        if (kernels[j].empty()) {
            throw std::invalid_argument("lattice: empty kernel set at step " +
                                        std::to_string(j));
        }
        for (const Kernel& k : kernels[j]) {
            if (k.rows.size() != states[j].size()) {
                throw std::invalid_argument("lattice: kernel row count mismatch at step " +
                                            std::to_string(j));
            }
            for (const auto& row : k.rows) {
                if (row.size() != states[j + 1].size()) {
                    throw std::invalid_argument(
                        "lattice: kernel column count mismatch at step " +
                        std::to_string(j));
                }
                double sum = 0.0;
                for (double p : row) {
                    if (p < 0.0) {
                        throw std::invalid_argument("lattice: negative kernel entry");
                    }
                    sum += p;
                }
                if (std::fabs(sum - 1.0) > 1e-12) {
                    throw std::invalid_argument(
                        "lattice: kernel row does not sum to 1 at step " +
                        std::to_string(j));
                }
            }
        }
    }
}

long long RobustFactorLattice::path_count() const {
    return prefix_count(grid.n_steps);
}

long long RobustFactorLattice::prefix_count(int slice) const {
    long long count = 1;
    for (int j = 1; j <= slice; ++j) {
        count *= static_cast<long long>(states[j].size());
    }
    return count;
}

RobustFactorLattice RobustFactorLattice::single_state(const TimeGrid& grid,
                                                      double value) {
    RobustFactorLattice lat;
    lat.grid = grid;
    lat.states.assign(grid.n_steps + 1, {value});
    Kernel identity;
    identity.rows = {{1.0}};
    lat.kernels.assign(grid.n_steps, {identity});
    return lat;
}

RobustFactorLattice RobustFactorLattice::binomial(const TimeGrid& grid, double x0,
                                                  double up, double down,
                                                  std::vector<double> p_up_set) {
    if (p_up_set.empty()) {
        throw std::invalid_argument("binomial lattice: empty p_up set");
    }
    RobustFactorLattice lat;
    lat.grid = grid;
    lat.states.resize(grid.n_steps + 1);
    for (int j = 0; j <= grid.n_steps; ++j) {
        lat.states[j].resize(j + 1);
        for (int i = 0; i <= j; ++i) {
            // i down-moves, j - i up-moves; states ascending in value
            lat.states[j][i] =
                x0 * std::pow(down, j - i) * std::pow(up, i);
        }
    }
    lat.kernels.resize(grid.n_steps);
    for (int j = 0; j < grid.n_steps; ++j) {
        for (double p : p_up_set) {
            if (p < 0.0 || p > 1.0) {
                throw std::invalid_argument("binomial lattice: p_up outside [0,1]");
            }
            Kernel k;
            k.rows.assign(j + 1, std::vector<double>(j + 2, 0.0));
            for (int i = 0; i <= j; ++i) {
                k.rows[i][i] = 1.0 - p;
                k.rows[i][i + 1] = p;
            }
            lat.kernels[j].push_back(std::move(k));
        }
    }
    return lat;
}

FactorAt path_factor(const RobustFactorLattice& lat, const Path& p) {
    return [&lat, p](double t) {
        int slice = static_cast<int>(std::floor(t / lat.grid.dt + 1e-12));
        slice = std::clamp(slice, 0, lat.grid.n_steps);
        return lat.states[slice][p[slice]];
    };
}

long long prefix_id(const RobustFactorLattice& lat, const Path& p, int slice) {
    long long id = 0;
    for (int j = 1; j <= slice; ++j) {
        id = id * static_cast<long long>(lat.states[j].size()) + p[j];
    }
    return id;
}

std::vector<Path> enumerate_paths(const RobustFactorLattice& lat) {
    int n = lat.grid.n_steps;
    long long total = lat.path_count();
    if (total > kPathEnumCap) {
        throw CapacityError("enumerate_paths: path count " + std::to_string(total) +
                            " exceeds cap " + std::to_string(kPathEnumCap));
    }
    std::vector<Path> out;
    out.reserve(static_cast<std::size_t>(total));
    Path p(n + 1, 0);
    p[0] = lat.initial_state;
    while (true) {
        out.push_back(p);
        int j = n;
        for (; j >= 1; --j) {
            if (++p[j] < static_cast<int>(lat.states[j].size())) {
                break;
            }
            p[j] = 0;
        }
        if (j == 0) {
            break;
        }
    }
    return out;
}

static std::vector<double> evaluate_terminal(const RobustFactorLattice& lat,
                                             const PathFunctional& f) {
    long long total = lat.path_count();
    if (total > kPathEnumCap) {
        throw CapacityError(
            "conditional expectation: path count " + std::to_string(total) +
            " exceeds cap " + std::to_string(kPathEnumCap) +
            "; supply a Markov reduction");
    }
    int n = lat.grid.n_steps;
    std::vector<double> vals(static_cast<std::size_t>(total));
    Path p(n + 1, 0);
    p[0] = lat.initial_state;
    for (long long i = 0;; ++i) {
        vals[static_cast<std::size_t>(i)] = f.eval(p);
        int j = n;
        for (; j >= 1; --j) {
            if (++p[j] < static_cast<int>(lat.states[j].size())) {
                break;
            }
            p[j] = 0;
        }
        if (j == 0) {
            break;
        }
    }
    return vals;
}

PrefixValues robust_rollback(const RobustFactorLattice& lat,
                             std::vector<double> terminal_values, int t_slice) {
    int n = lat.grid.n_steps;
    if (t_slice < 0 || t_slice > n) {
        throw std::domain_error("robust_rollback: slice out of range");
    }
    std::vector<double> vals = std::move(terminal_values);
    for (int j = n - 1; j >= t_slice; --j) {
        long long n_prefix = lat.prefix_count(j);
        int s_here = static_cast<int>(lat.states[j].size());
        int s_next = static_cast<int>(lat.states[j + 1].size());
        std::vector<double> next(static_cast<std::size_t>(n_prefix));
        for (long long q = 0; q < n_prefix; ++q) {
            int st = j == 0 ? lat.initial_state : static_cast<int>(q % s_here);
            double best = -std::numeric_limits<double>::infinity();
            for (const Kernel& k : lat.kernels[j]) {
                const std::vector<double>& row = k.rows[st];
                double acc = 0.0;
                for (int s2 = 0; s2 < s_next; ++s2) {
                    acc += row[s2] * vals[static_cast<std::size_t>(q * s_next + s2)];
                }
                if (acc > best) {
                    best = acc;
                }
            }
            next[static_cast<std::size_t>(q)] = best;
        }
        vals = std::move(next);
    }
    PrefixValues out;
    out.slice = t_slice;
    out.values = std::move(vals);
    return out;
}

PrefixValues linear_rollback(const RobustFactorLattice& lat,
                             std::vector<double> terminal_values,
                             const KernelPolicy& policy, int t_slice) {
    int n = lat.grid.n_steps;
    if (t_slice < 0 || t_slice > n) {
        throw std::domain_error("linear_rollback: slice out of range");
    }
    std::vector<double> vals = std::move(terminal_values);
    for (int j = n - 1; j >= t_slice; --j) {
        long long n_prefix = lat.prefix_count(j);
        int s_here = static_cast<int>(lat.states[j].size());
        int s_next = static_cast<int>(lat.states[j + 1].size());
        std::vector<double> next(static_cast<std::size_t>(n_prefix));
        for (long long q = 0; q < n_prefix; ++q) {
            int st = j == 0 ? lat.initial_state : static_cast<int>(q % s_here);
            int ki = policy(j, q, st);
            if (ki < 0 || ki >= static_cast<int>(lat.kernels[j].size())) {
                throw std::domain_error("linear_rollback: invalid kernel index");
            }
            const std::vector<double>& row = lat.kernels[j][ki].rows[st];
            double acc = 0.0;
            for (int s2 = 0; s2 < s_next; ++s2) {
                acc += row[s2] * vals[static_cast<std::size_t>(q * s_next + s2)];
            }
            next[static_cast<std::size_t>(q)] = acc;
        }
        vals = std::move(next);
    }
    PrefixValues out;
    out.slice = t_slice;
    out.values = std::move(vals);
    return out;
}

PrefixValues conditional_sublinear_expectation(const RobustFactorLattice& lat,
                                               const PathFunctional& f,
                                               int t_slice) {
    return robust_rollback(lat, evaluate_terminal(lat, f), t_slice);
}

PrefixValues linear_conditional_expectation(const RobustFactorLattice& lat,
                                            const PathFunctional& f,
                                            const KernelPolicy& policy,
                                            int t_slice) {
    return linear_rollback(lat, evaluate_terminal(lat, f), policy, t_slice);
}

double AugValues::at(const MarkovReduction& red, const Path& p, int slice_) const {
    int aug = red.init_aug;
    for (int j = 1; j <= slice_; ++j) {
        aug = red.step(j - 1, aug, p[j]);
    }
    return values[aug];
}

AugValues conditional_sublinear_expectation_markov(const RobustFactorLattice& lat,
                                                   const MarkovReduction& red,
                                                   int t_slice) {
    int n = lat.grid.n_steps;
    if (t_slice < 0 || t_slice > n) {
        throw std::domain_error("markov expectation: slice out of range");
    }
    // Forward reachability of augmented states per slice.
    std::vector<std::vector<char>> reach(n + 1,
                                         std::vector<char>(red.n_aug, 0));
    reach[0][red.init_aug] = 1;
    for (int j = 0; j < n; ++j) {
        int s_next = static_cast<int>(lat.states[j + 1].size());
        for (int a = 0; a < red.n_aug; ++a) {
            if (!reach[j][a]) {
                continue;
            }
            for (int s2 = 0; s2 < s_next; ++s2) {
                reach[j + 1][red.step(j, a, s2)] = 1;
            }
        }
    }
    std::vector<double> vals(red.n_aug, 0.0);
    for (int a = 0; a < red.n_aug; ++a) {
        if (reach[n][a]) {
            vals[a] = red.terminal(a);
        }
    }
    for (int j = n - 1; j >= t_slice; --j) {
        int s_next = static_cast<int>(lat.states[j + 1].size());
        std::vector<double> next(red.n_aug, 0.0);
        for (int a = 0; a < red.n_aug; ++a) {
            if (!reach[j][a]) {
                continue;
            }
            int st = red.lattice_state(a);
            double best = -std::numeric_limits<double>::infinity();
            for (const Kernel& k : lat.kernels[j]) {
                const std::vector<double>& row = k.rows[st];
                double acc = 0.0;
                for (int s2 = 0; s2 < s_next; ++s2) {
                    acc += row[s2] * vals[red.step(j, a, s2)];
                }
                if (acc > best) {
                    best = acc;
                }
            }
            next[a] = best;
        }
        vals = std::move(next);
    }
    AugValues out;
    out.slice = t_slice;
    out.values = std::move(vals);
    out.reachable = reach[t_slice];
    return out;
}

double verify_tower_property(const RobustFactorLattice& lat,
                             const PathFunctional& f, int s_slice, int t_slice) {
    if (s_slice > t_slice) {
        throw std::domain_error("verify_tower_property: need s <= t");
    }
    PrefixValues at_t = conditional_sublinear_expectation(lat, f, t_slice);
    PathFunctional g;
    g.eval = [&](const Path& p) { return at_t.at(lat, p); };
    PrefixValues nested = conditional_sublinear_expectation(lat, g, s_slice);
    PrefixValues direct = conditional_sublinear_expectation(lat, f, s_slice);
    double worst = 0.0;
    for (std::size_t i = 0; i < direct.values.size(); ++i) {
        worst = std::max(worst, std::fabs(direct.values[i] - nested.values[i]));
    }
    return worst;
}

Path sample_path(const RobustFactorLattice& lat, const KernelPolicy& policy,
                 std::uint64_t seed, std::uint64_t path_index) {
    int n = lat.grid.n_steps;
    Path p(n + 1, 0);
    p[0] = lat.initial_state;
    long long prefix = 0;
    for (int j = 0; j < n; ++j) {
        int st = p[j];
        int ki = policy(j, prefix, st);
        if (ki < 0 || ki >= static_cast<int>(lat.kernels[j].size())) {
            throw std::domain_error("sample_path: invalid kernel index");
        }
        const std::vector<double>& row = lat.kernels[j][ki].rows[st];
        double u = uniform01(seed, kStreamFactor, path_index, static_cast<std::uint64_t>(j));
        double acc = 0.0;
        int next = static_cast<int>(row.size()) - 1;
        for (int s2 = 0; s2 < static_cast<int>(row.size()); ++s2) {
            acc += row[s2];
            if (u <= acc) {
                next = s2;
                break;
            }
        }
        p[j + 1] = next;
        prefix = prefix * static_cast<long long>(row.size()) + next;
    }
    return p;
}

HazardReduction make_hazard_reduction(const RobustFactorLattice& lat,
                                      const IntensityModel& model, int level,
                                      const std::function<double(double)>& g,
                                      int n_bins) {
    if (n_bins < 1) {
        throw std::invalid_argument("make_hazard_reduction: n_bins must be >= 1");
    }
    int n = lat.grid.n_steps;

    // Trapezoid hazard increment of one step, matching integrate_curve along
    // a piecewise-constant right-continuous factor path. Captures copies so
    // the reduction stays valid independently of the inputs' lifetimes.
    auto increment = [states = lat.states, grid = lat.grid, model,
                      level](int step, int state_here, int state_next) {
        double x0 = states[step][state_here];
        double x1 = states[step + 1][state_next];
        FactorAt lo = [x0](double) { return x0; };
        FactorAt hi = [x1](double) { return x1; };
        double r0 = model.level_intensity(level, grid.node(step), &lo);
        double r1 = model.level_intensity(level, grid.node(step + 1), &hi);
        return 0.5 * (r0 + r1) * grid.dt;
    };

    // Upper bound of the reachable cumulative hazard; bins cover [0, h_max]
    // because intermediate accumulations start at zero.
    double h_max = 0.0;
    for (int j = 0; j < n; ++j) {
        double inc_max = -std::numeric_limits<double>::infinity();
        for (int s0 = 0; s0 < static_cast<int>(lat.states[j].size()); ++s0) {
            for (int s1 = 0; s1 < static_cast<int>(lat.states[j + 1].size()); ++s1) {
                inc_max = std::max(inc_max, increment(j, s0, s1));
            }
        }
        h_max += inc_max;
    }
    double width = h_max > 0.0 && n_bins > 1 ? h_max / (n_bins - 1) : 0.0;

    int max_states = 0;
    for (const auto& slice : lat.states) {
        max_states = std::max(max_states, static_cast<int>(slice.size()));
    }

    auto bin_of = [width, n_bins](double h) {
        if (width <= 0.0) {
            return 0;
        }
        int b = static_cast<int>(std::lround(h / width));
        return std::clamp(b, 0, n_bins - 1);
    };
    auto hazard_of = [width](int b) { return b * width; };

    HazardReduction out;
    out.bin_width = width;
    MarkovReduction red;
    red.n_aug = n_bins * max_states;
    red.init_aug = 0 * max_states + lat.initial_state;
    red.step = [=](int slice, int aug, int next_state) {
        int b = aug / max_states;
        int st = aug % max_states;
        double h = hazard_of(b) + increment(slice, st, next_state);
        return bin_of(h) * max_states + next_state;
    };
    red.lattice_state = [max_states](int aug) { return aug % max_states; };
    red.terminal = [=](int aug) { return g(hazard_of(aug / max_states)); };
    out.reduction = std::move(red);
    return out;
}

}  // namespace ordef
