#pragma once

// Synthetic bounded-rational subjects: experiment designs, ground-truth
// agents, trial sampling and infinite-data tables.

#include "brt/empirical.hpp"
#include "brt/fitter.hpp"
#include "brt/puzzle.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace brt {

inline constexpr const char* kDesignSchema = "brt.design/1";

struct StimulusWeight {
    int id = 0;
    double weight = 1.0;

    friend bool operator==(const StimulusWeight&, const StimulusWeight&) = default;
};

struct ExperimentDesign {
    enum class Mode {
        blocks, // training blocks then test blocks with one control per block
        cells,  // exactly trials_per_cell test trials for every (x, r)
    };

    Mode mode = Mode::blocks;
    std::vector<StimulusWeight> stimuli; // trained (regular) stimuli
    std::optional<int> control_stimulus;
    std::vector<double> durations{1.25, 2.5, 5.0};
    std::vector<double> duration_weights{1.0, 1.0, 1.0};
    long trials_per_cell = 0;

    int training_blocks = 5;
    int training_block_size = 18;
    double training_duration = 10.0;
    int test_blocks = 15;
    int test_block_size = 18; // regular trials per test block
    int controls_per_block = 1;

    double inter_trial_min = 0.5;
    double inter_trial_max = 1.5;
    std::int64_t start_timestamp_ms = 1'700'000'000'000;

    // Trained ids followed by the control id, if any.
    std::vector<int> all_stimuli() const;
    // Test-phase P(x, r) over all_stimuli() x durations, flattened x-major.
    std::vector<double> context() const;
    long test_trials() const;
    long training_trials() const;
    // Throws ValidationError naming the offending field.
    void validate() const;

    friend bool operator==(const ExperimentDesign&, const ExperimentDesign&) = default;
};

// Default blocked protocol over a puzzle fixture: trained puzzles at their fixture
// weights, the control once per block, 90 training and 285 test trials.
ExperimentDesign default_design(const PuzzleFixture& fixture);

std::string design_to_json(const ExperimentDesign& design);
ExperimentDesign design_from_json(const std::string& text);
ExperimentDesign load_design(const std::filesystem::path& path);

// Per-choice offsets d(y), added to every U_x(y), such that the test-phase
// choice marginal sum_{x,r} P(x,r) Q(y|x,r) equals `prior`. The fitter takes
// its prior from that marginal, so only agents satisfying this are exactly
// recoverable. d minimizes the convex function
//   sum_{x,r} P(x,r) log Z_{x,r}(d) / beta(r) - sum_y prior(y) d(y).
// context is flattened x-major over utilities.size() x betas.size().
std::vector<double> marginal_matching_offsets(const std::vector<std::vector<double>>& utilities,
                                              const std::vector<double>& betas, const std::vector<double>& context,
                                              const ChoiceDistribution& prior, double tolerance = 1e-14);

// Agent over the design's test grid (plus `extra_durations`, e.g. the
// training duration). Utilities are shifted by marginal_matching_offsets so
// that `prior` is the marginal of the agent's own test-phase choices, then the
// gauge is fixed at the smallest test duration with beta0 = 1.
DecompositionModel make_agent(const ExperimentDesign& design, std::vector<std::vector<double>> utilities,
                              std::vector<double> test_betas, const ChoiceDistribution& prior,
                              std::vector<double> extra_durations = {}, std::vector<double> extra_betas = {});

// Default synthetic subject for a fixture: beta linear in log duration,
// trained utilities peaked at each solution, a flat control utility.
DecompositionModel default_agent(const PuzzleFixture& fixture, const ExperimentDesign& design,
                                 std::uint64_t seed);

// I.i.d. choices from the agent's Gibbs posterior per trial. Success flags come
// from the fixture when one is given, otherwise they are false.
// Throws ConfigError if the agent does not cover a design stimulus/duration.
std::vector<TrialRecord> sample_trials(const DecompositionModel& agent, const ExperimentDesign& design,
                                       std::uint64_t seed, const std::string& subject = "s01",
                                       const PuzzleFixture* fixture = nullptr);

// Duration labels a trial file for this design declares.
std::vector<double> declared_durations(const ExperimentDesign& design);

// Table whose conditionals are the agent's posteriors and whose P(x,r) is the
// design's, with no sampling or smoothing.
EmpiricalTable analytic_table(const DecompositionModel& agent, const ExperimentDesign& design);

} // namespace brt
