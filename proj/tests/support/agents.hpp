#pragma once

// Synthetic ground-truth agents shared by the fitter, analysis and acceptance
// tests.

#include "brt/random.hpp"
#include "brt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace agents {

struct Case {
    brt::ExperimentDesign design;
    brt::DecompositionModel agent;
};

inline brt::ExperimentDesign cells_design(int stimuli, std::vector<double> durations, long per_cell)
{
    brt::ExperimentDesign d;
    d.mode = brt::ExperimentDesign::Mode::cells;
    d.trials_per_cell = per_cell;
    for (int i = 1; i <= stimuli; ++i) d.stimuli.push_back({i, 1.0});
    d.durations = durations;
    d.duration_weights.assign(durations.size(), 1.0);
    return d;
}

// Utilities uniform in [-2, 2], full-support prior with weights in [0.5, 1.5].
inline Case recovery_case(std::uint64_t seed, int stimuli = 5, std::vector<double> betas = {1.0, 2.2, 4.5},
                          long per_cell = 10000)
{
    std::vector<double> durations;
    for (std::size_t r = 0; r < betas.size(); ++r) durations.push_back(1.25 * std::pow(2.0, static_cast<double>(r)));
    Case c{cells_design(stimuli, durations, per_cell), {}};
    brt::Rng rng(seed);
    std::vector<std::vector<double>> u(static_cast<std::size_t>(stimuli), std::vector<double>(8));
    for (auto& row : u) {
        for (double& v : row) v = rng.uniform(-2.0, 2.0);
    }
    std::vector<double> w(8);
    for (double& v : w) v = rng.uniform(0.5, 1.5);
    c.agent = brt::make_agent(c.design, u, betas, brt::ChoiceDistribution::from_weights(w));
    return c;
}

// Prior weights 2^(k) over a seeded permutation of k = 3,2,1,0,0,0,0,0:
// KL(prior || uniform) is about 0.59 bits.
inline Case skewed_case(std::uint64_t seed, long per_cell = 2000)
{
    Case c{cells_design(4, {1.25, 2.5, 5.0}, per_cell), {}};
    brt::Rng rng(seed);
    std::vector<double> w{8, 4, 2, 1, 1, 1, 1, 1};
    for (std::size_t i = w.size() - 1; i > 0; --i) std::swap(w[i], w[rng.below(i + 1)]);
    std::vector<std::vector<double>> u(4, std::vector<double>(8));
    for (auto& row : u) {
        for (double& v : row) v = rng.uniform(-1.0, 1.0);
    }
    c.agent = brt::make_agent(c.design, u, {1.0, 1.6, 2.4}, brt::ChoiceDistribution::from_weights(w));
    return c;
}

inline double kl_to_uniform_bits(const brt::ChoiceDistribution& p)
{
    double s = 0.0;
    const double u = 1.0 / static_cast<double>(p.size());
    for (double v : p.values()) {
        if (v > 0) s += v * std::log2(v / u);
    }
    return s;
}

} // namespace agents
