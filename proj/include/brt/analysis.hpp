#pragma once

// Performance of a fitted decomposition as a function of the inverse
// temperature: expected utility, stimulus/choice mutual information (decision
// bandwidth) and the expected fraction of correct choices.

#include "brt/fitter.hpp"
#include "brt/puzzle.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace brt {

inline constexpr const char* kCurveSchema = "brt.curve/1";
// Stand-in for beta -> infinity.
inline constexpr double kAsymptoteBeta = 1e6;

struct PerformancePoint {
    double beta = 0.0;
    double expected_utility = 0.0;
    double mutual_information_bits = 0.0;
    double percent_correct = 0.0; // fraction in [0, 1]
};

using SolutionMap = std::map<int, Assignment>;

SolutionMap solutions_from_fixture(const PuzzleFixture& fixture);

struct CurveConfig {
    std::vector<double> beta_grid;             // strictly increasing, nonnegative
    std::vector<double> stimulus_distribution; // over model.stimuli; empty: use the model's P(x)
    bool include_control = false;
    std::optional<int> control_stimulus;

    void validate() const; // throws ConfigError
};

// {"beta_grid": [...]} or {"beta_min", "beta_max", "points"}, optional
// "stimulus_distribution" and "include_control". Throws ConfigError.
CurveConfig curve_config_from_json(const std::string& text);

// {0} followed by `points` log-spaced values from lo to hi.
std::vector<double> default_beta_grid(double lo = 1e-2, double hi = 1e3, int points = 60);

// EU_beta = sum_{x,y} P(x) Q_beta(y|x) U_x(y).
double expected_utility_at(const DecompositionModel& model, std::span<const double> stimulus_probs, double beta);

// I_beta = sum_{x,y} P(x) Q_beta(y|x) log2(Q_beta(y|x) / Q_beta(y)), in bits.
double mutual_information_at(const DecompositionModel& model, std::span<const double> stimulus_probs, double beta);

// sum_x P(x) Q_beta(y*(x)|x). Throws ConfigError when a stimulus with P(x) > 0
// has no solution entry.
double percent_correct_at(const DecompositionModel& model, std::span<const double> stimulus_probs,
                          const SolutionMap& solutions, double beta);

PerformancePoint performance_at(const DecompositionModel& model, std::span<const double> stimulus_probs,
                                const SolutionMap& solutions, double beta);

struct Curve {
    std::vector<PerformancePoint> points;
    PerformancePoint asymptote;
    std::vector<double> stimulus_distribution; // P(x) actually used
    double stimulus_entropy_bits = 0.0;
};

// P(x) a sweep uses: the configured or fitted distribution, with the control
// stimulus zeroed unless included, renormalized.
std::vector<double> effective_stimulus_distribution(const DecompositionModel& model, const CurveConfig& config);

Curve sweep(const DecompositionModel& model, const CurveConfig& config, const SolutionMap& solutions);

// Tab-separated rows: beta, expected_utility, mutual_information_bits,
// percent_correct. Comment lines carry the schema, H(X) and the asymptote.
void write_curve(std::ostream& out, const Curve& curve);

} // namespace brt
