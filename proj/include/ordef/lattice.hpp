#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ordef/grid.hpp"
#include "ordef/intensity.hpp"

namespace ordef {

// State-index sequence over the lattice slices, path[0] = initial state.
using Path = std::vector<int>;

// One transition kernel for a step: rows[state][next] with rows summing to 1.
struct Kernel {
    std::vector<std::vector<double>> rows;
};

// Kernel index chosen at a given node: step, path-prefix class at that step,
// and current state. Prefix-dependent choices realize every measurable prior.
using KernelPolicy = std::function<int(int step, long long prefix, int state)>;

inline KernelPolicy constant_policy(int kernel_index) {
    return [kernel_index](int, long long, int) { return kernel_index; };
}

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Controlled Markov chain for the factor: per-slice state values and a finite
// kernel set per step. The prior family is every measurable per-node kernel
// choice, so worst-case conditional expectations are exact by backward
// induction and pasting holds by construction.
struct RobustFactorLattice {
    TimeGrid grid;
    std::vector<std::vector<double>> states;   // per slice 0..n_steps
    std::vector<std::vector<Kernel>> kernels;  // per step 0..n_steps-1
    int initial_state = 0;

    void validate() const;
    int n_slices() const { return grid.n_steps + 1; }
    long long path_count() const;
    long long prefix_count(int slice) const;
    double state_value(int slice, int state) const {
        return states[slice][state];
    }

    // Single state per slice with one identity kernel: a deterministic factor.
    static RobustFactorLattice single_state(const TimeGrid& grid, double value);

    // Recombining multiplicative binomial lattice; one kernel per p in p_up_set.
    static RobustFactorLattice binomial(const TimeGrid& grid, double x0,
                                        double up, double down,
                                        std::vector<double> p_up_set);
};

inline constexpr long long kPathEnumCap = 1LL << 20;
inline constexpr int kDefaultHazardBins = 64;

// Factor value along a path: piecewise-constant, right-continuous in time.
FactorAt path_factor(const RobustFactorLattice& lat, const Path& p);

// Prefix id at a slice: mixed-radix index over states at slices 1..slice.
long long prefix_id(const RobustFactorLattice& lat, const Path& p, int slice);

// All full paths in prefix-id order.
std::vector<Path> enumerate_paths(const RobustFactorLattice& lat);

// Finite-state reduction of a path functional: aug state walks forward with
// the path and the value is read off the terminal aug state.
struct MarkovReduction {
    int n_aug = 0;
    int init_aug = 0;
    std::function<int(int slice, int aug, int next_state)> step;
    std::function<int(int aug)> lattice_state;  // state index at current slice
    std::function<double(int aug)> terminal;
};

struct PathFunctional {
    std::function<double(const Path&)> eval;
    std::optional<MarkovReduction> reduction;
};

// Worst-case (sup over kernels) conditional expectations at a slice, one value
// per path-prefix class.
struct PrefixValues {
    int slice = 0;
    std::vector<double> values;

    double at(const RobustFactorLattice& lat, const Path& p) const {
        return values[prefix_id(lat, p, slice)];
    }
};

// Backward induction from the terminal slice down to t_slice; at each node the
// kernel-expectation is maximized, ties broken by lowest kernel index.
PrefixValues conditional_sublinear_expectation(const RobustFactorLattice& lat,
                                               const PathFunctional& f,
                                               int t_slice);

// Same rollback from precomputed terminal values (indexed by full-path id).
PrefixValues robust_rollback(const RobustFactorLattice& lat,
                             std::vector<double> terminal_values, int t_slice);

// Linear rollback under a single kernel policy.
PrefixValues linear_rollback(const RobustFactorLattice& lat,
                             std::vector<double> terminal_values,
                             const KernelPolicy& policy, int t_slice);

PrefixValues linear_conditional_expectation(const RobustFactorLattice& lat,
                                            const PathFunctional& f,
                                            const KernelPolicy& policy,
                                            int t_slice);

// Markov-mode evaluation for reduced functionals: value per reachable aug
// state at t_slice, keyed through MarkovReduction.
struct AugValues {
    int slice = 0;
    std::vector<double> values;  // indexed by aug id
    std::vector<char> reachable;

    double at(const MarkovReduction& red, const Path& p, int slice_) const;
};

AugValues conditional_sublinear_expectation_markov(const RobustFactorLattice& lat,
                                                   const MarkovReduction& red,
                                                   int t_slice);

// max over prefix classes of |E_s(f) - E_s(E_t(f))|.
double verify_tower_property(const RobustFactorLattice& lat,
                             const PathFunctional& f, int s_slice, int t_slice);

// Deterministic path draw under a fixed policy; splittable by path_index.
Path sample_path(const RobustFactorLattice& lat, const KernelPolicy& policy,
                 std::uint64_t seed, std::uint64_t path_index = 0);

// Reduction for functionals of the cumulative hazard of one level along the
// path: g(integral of the level rate over [0, t_max]), hazard binned uniformly.
struct HazardReduction {
    MarkovReduction reduction;
    double bin_width = 0.0;  // reported discretization step of the hazard
};

HazardReduction make_hazard_reduction(const RobustFactorLattice& lat,
                                      const IntensityModel& model, int level,
                                      const std::function<double(double)>& g,
                                      int n_bins = kDefaultHazardBins);

}  // namespace ordef
