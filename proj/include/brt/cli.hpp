#pragma once

// Command implementations behind the `brt` executable. Each command writes its
// outputs plus a run manifest and returns the manifest.

#include "brt/empirical.hpp"
#include "brt/fitter.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace brt {

inline constexpr const char* kManifestSchema = "brt.manifest/1";
inline constexpr const char* kFitSummarySchema = "brt.fit-summary/1";
inline constexpr const char* kClauseCasesSchema = "brt.clause-cases/1";
inline constexpr const char* kConfigDirVariable = "BRT_CONFIG_DIR";

struct RunManifest {
    std::string command;
    std::optional<std::filesystem::path> config;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    std::optional<std::uint64_t> seed;
    std::string version;
    std::int64_t started_ms = 0;
    std::int64_t finished_ms = 0;
    nlohmann::json parameters = nlohmann::json::object();

    nlohmann::json to_json() const;
};

// <file>.manifest.json next to a file, manifest.json inside a directory.
std::filesystem::path manifest_path(const std::filesystem::path& output);

// Explicit path if it exists; a relative explicit path is also tried under
// $BRT_CONFIG_DIR; with no explicit path, $BRT_CONFIG_DIR/<default_name> if
// present. Throws ConfigError for an explicit path found nowhere.
std::optional<std::filesystem::path> resolve_config(const std::optional<std::filesystem::path>& explicit_path,
                                                    const std::string& default_name);

struct GenPuzzlesOptions {
    int count = 5;
    std::uint64_t seed = 1;
    std::filesystem::path out;
};
RunManifest cmd_gen_puzzles(const GenPuzzlesOptions& options);

struct MakeDesignOptions {
    std::filesystem::path puzzles;
    std::optional<long> trials_per_cell; // switches to the cells layout
    std::filesystem::path out;
};
RunManifest cmd_make_design(const MakeDesignOptions& options);

struct MakeAgentOptions {
    std::filesystem::path puzzles;
    std::filesystem::path design;
    std::uint64_t seed = 1;
    std::filesystem::path out;
};
RunManifest cmd_make_agent(const MakeAgentOptions& options);

struct SimulateOptions {
    std::filesystem::path design;
    std::optional<std::filesystem::path> agent;   // default: a fresh default agent per subject
    std::optional<std::filesystem::path> puzzles; // success flags; required without an agent
    std::uint64_t seed = 1;
    int subjects = 1;
    // A trial file for one subject; a directory of s01.trials.jsonl, ... otherwise.
    std::filesystem::path out;
};
RunManifest cmd_simulate(const SimulateOptions& options);

// Fitting grid for a trial log: stimuli from the fixture (or the records) and
// the declared durations that occur in the filtered records.
EmpiricalTable table_for_fit(const TrialLog& log, PhaseFilter phase, const PuzzleFixture* fixture,
                             bool exclude_control);

struct FitOptions {
    std::vector<std::filesystem::path> trials;
    ModelKind kind = ModelKind::gibbs;
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> puzzles;
    PhaseFilter phase = PhaseFilter::test;
    bool exclude_control = false;
    // A model file for one input; a directory with <subject>.model.json files
    // and summary.json for several.
    std::filesystem::path out;
};
RunManifest cmd_fit(const FitOptions& options);

// Mean and sample standard deviation of final J, betas and utilities over
// models sharing one grid.
nlohmann::json fit_summary(const std::vector<std::string>& names, const std::vector<FitResult>& fits);

struct AnalyzeOptions {
    std::filesystem::path model;
    std::filesystem::path puzzles;
    std::optional<std::filesystem::path> config;
    std::optional<double> beta_min;
    std::optional<double> beta_max;
    std::optional<int> points;
    std::optional<bool> include_control;
    std::filesystem::path out;
};
RunManifest cmd_analyze(const AnalyzeOptions& options);

struct ClauseCasesOptions {
    std::filesystem::path out;
};
// Every clause of the family against every assignment, for cross-checking
// other implementations of clause satisfaction.
RunManifest cmd_clause_cases(const ClauseCasesOptions& options);
std::string clause_cases_json();

struct CollectOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path puzzles;
    std::optional<std::filesystem::path> design; // declares the duration labels
    std::optional<std::filesystem::path> static_dir;
    std::filesystem::path out;
};
// Runs until interrupted; rethrows an append failure.
void cmd_collect(const CollectOptions& options);

} // namespace brt
