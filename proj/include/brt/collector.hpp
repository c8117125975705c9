#pragma once

// HTTP collector for trial uploads from the browser task.
//
//   POST /api/trials   {"schema":"brt.trials/1","records":[...]}
//   GET  /api/puzzles  the puzzle fixture
//   GET  /api/health   {"schema":"brt.health/1","status":"ok","version":...}

#include "brt/empirical.hpp"
#include "brt/puzzle.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace brt {

inline constexpr const char* kCollectResultSchema = "brt.collect-result/1";
inline constexpr const char* kHealthSchema = "brt.health/1";

struct RecordRejection {
    std::size_t index = 0; // position in the posted batch
    std::vector<FieldError> errors;
};

struct BatchResult {
    std::size_t accepted = 0;
    std::vector<RecordRejection> rejections;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// Validates posted batches and appends accepted records to a trial file.
// Safe to call from several threads; each batch is written and flushed as one
// unit under a single lock.
class Collector {
public:
    // Opens `out` for appending. An existing trial file must declare the same
    // durations; its records seed the duplicate check. A new file gets a header.
    Collector(PuzzleFixture fixture, std::vector<double> durations, const std::filesystem::path& out);
    // Same, over a caller-owned stream (assumed empty).
    Collector(PuzzleFixture fixture, std::vector<double> durations, std::ostream& out);

    // Throws ValidationError for a malformed envelope and IoError when the
    // append fails; in the latter case the collector refuses further batches.
    BatchResult submit(const nlohmann::json& body);

    const PuzzleFixture& fixture() const noexcept { return fixture_; }
    const std::vector<double>& durations() const noexcept { return durations_; }
    bool failed() const;

private:
    using Key = std::tuple<std::string, int, int>; // subject, block, trial

    PuzzleFixture fixture_;
    std::vector<double> durations_;
    std::unique_ptr<std::ostream> owned_;
    std::ostream* out_ = nullptr;
    mutable std::mutex mutex_;
    std::set<Key> seen_;
    bool failed_ = false;
};

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::optional<std::filesystem::path> static_dir;
};

// Blocking HTTP front end. `on_bound` receives the actual port once listening.
// Returns when stop() is called or after an append failure, which is rethrown.
class CollectorServer {
public:
    CollectorServer(Collector& collector, ServeOptions options);
    ~CollectorServer();

    void run(const std::function<void(int)>& on_bound = {});
    // Blocks until run() is accepting connections.
    void wait_until_ready() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace brt
