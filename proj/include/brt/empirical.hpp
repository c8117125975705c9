#pragma once

// Trial ingestion and the add-one smoothed empirical distributions
// P(x,r,y), P(x,r), P(x), P(y) and P(y|x,r).

#include "brt/core_model.hpp"
#include "brt/error.hpp"
#include "brt/puzzle.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace brt {

inline constexpr const char* kTrialSchema = "brt.trials/1";
inline constexpr const char* kTableSchema = "brt.table/1";

enum class Phase { training, test };
enum class PhaseFilter { training, test, all };

std::string to_string(Phase phase);

struct TrialRecord {
    std::string subject;
    Phase phase = Phase::test;
    int stimulus = 0;
    double duration = 0.0; // seconds; must be one of the declared labels
    int choice = 0;        // Assignment index 0..7
    bool success = false;
    int block = 0;
    int trial = 0; // position within the block
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// A parsed trial file: declared duration labels plus records.
struct TrialLog {
    std::vector<double> durations;
    std::vector<TrialRecord> records;
    std::vector<std::string> warnings;
};

struct FieldError {
    std::size_t line = 0; // 1-based; 0 when not applicable
    std::string field;
    std::string message;

    std::string str() const;
};

// Carries every per-line problem found while loading.
class TrialFormatError : public ValidationError {
public:
    explicit TrialFormatError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const noexcept { return errors_; }

private:
    std::vector<FieldError> errors_;
};

// Converts one JSON record. Field problems are appended to `errors`
// (with line = 0) and std::nullopt is returned.
std::optional<TrialRecord> parse_trial_record(const nlohmann::json& j, std::span<const double> durations,
                                              std::vector<FieldError>& errors);
nlohmann::json trial_record_to_json(const TrialRecord& record);

std::string trial_header_line(std::span<const double> durations);
std::string trial_record_line(const TrialRecord& record);

// Line-delimited records behind a schema header line. An empty stream gives an
// empty log. With a fixture, success flags are recomputed and mismatches are
// reported as warnings. Throws TrialFormatError listing every bad line.
TrialLog load_trials(std::istream& in, const PuzzleFixture* fixture = nullptr);
TrialLog load_trials_file(const std::filesystem::path& path, const PuzzleFixture* fixture = nullptr);
void write_trials(std::ostream& out, std::span<const double> durations, std::span<const TrialRecord> records);

// Dense table over X x R x Y. Immutable after construction.
class EmpiricalTable {
public:
    // joint(x,r,y) = (counts + 1) / sum(counts + 1) over the full grid.
    static EmpiricalTable from_counts(std::vector<int> stimuli, std::vector<double> durations,
                                      std::size_t num_choices, std::vector<std::int64_t> counts);

    // Infinite-data table: P(x,r) and P(y|x,r) are taken as given and the joint
    // is their product. No counts, no smoothing.
    static EmpiricalTable from_conditionals(std::vector<int> stimuli, std::vector<double> durations,
                                            std::vector<double> context,
                                            std::vector<ChoiceDistribution> conditionals);

    const std::vector<int>& stimuli() const noexcept { return stimuli_; }
    const std::vector<double>& durations() const noexcept { return durations_; }
    std::size_t num_stimuli() const noexcept { return stimuli_.size(); }
    std::size_t num_durations() const noexcept { return durations_.size(); }
    std::size_t num_choices() const noexcept { return num_choices_; }
    bool smoothed() const noexcept { return smoothed_; }

    std::optional<std::size_t> stimulus_index(int id) const;
    std::optional<std::size_t> duration_index(double label) const;

    // Index arguments are positions in stimuli()/durations().
    std::int64_t count(std::size_t xi, std::size_t ri, std::size_t y) const;
    double joint(std::size_t xi, std::size_t ri, std::size_t y) const;
    double context(std::size_t xi, std::size_t ri) const { return context_[xi * durations_.size() + ri]; }
    const ChoiceDistribution& conditional(std::size_t xi, std::size_t ri) const
    {
        return conditionals_[xi * durations_.size() + ri];
    }
    const ChoiceDistribution& prior() const noexcept { return prior_; }
    const std::vector<double>& stimulus_marginal() const noexcept { return stimulus_marginal_; }
    std::int64_t total_count() const noexcept;

    const std::vector<std::int64_t>& counts() const noexcept { return counts_; }
    const std::vector<double>& joint_values() const noexcept { return joint_; }

    friend bool operator==(const EmpiricalTable&, const EmpiricalTable&) = default;

private:
    EmpiricalTable(std::vector<int> stimuli, std::vector<double> durations, std::size_t num_choices);
    void derive_marginals();

    std::vector<int> stimuli_;
    std::vector<double> durations_;
    std::size_t num_choices_ = 0;
    bool smoothed_ = false;
    std::vector<std::int64_t> counts_;
    std::vector<double> joint_;
    std::vector<double> context_;
    std::vector<ChoiceDistribution> conditionals_;
    ChoiceDistribution prior_{std::vector<double>{1.0}};
    std::vector<double> stimulus_marginal_;
};

// Counts the trials that pass the phase filter and fall on the X x R grid,
// then smooths. Trials for stimuli outside X are skipped, which is how the
// control puzzle is excluded when desired. Throws ConfigError on an empty grid.
EmpiricalTable build_table(std::span<const TrialRecord> trials, PhaseFilter filter,
                           std::vector<int> stimuli, std::vector<double> durations,
                           std::size_t num_choices = kNumAssignments);

// P(y|x,r) by stimulus id and duration label. Throws ConfigError off-grid.
const ChoiceDistribution& conditional(const EmpiricalTable& table, int stimulus, double duration);
const ChoiceDistribution& prior(const EmpiricalTable& table);

// Shannon entropy in bits, 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

std::string table_to_json(const EmpiricalTable& table);
EmpiricalTable table_from_json(const std::string& text);

} // namespace brt
