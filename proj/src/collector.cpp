#include "brt/collector.hpp"

#include "brt/error.hpp"
#include "brt/version.hpp"

#include <httplib.h>

#include <algorithm>
#include <exception>
#include <fstream>

namespace brt {

using nlohmann::json;

json BatchResult::to_json() const
{
    json rej = json::array();
    for (const auto& r : rejections) {
        json errs = json::array();
        for (const auto& e : r.errors) errs.push_back({{"field", e.field}, {"message", e.message}});
        rej.push_back({{"index", r.index}, {"errors", errs}});
    }
    return json{{"schema", kCollectResultSchema},
                {"accepted", accepted},
                {"rejected", rejections.size()},
                {"rejections", rej},
                {"warnings", warnings}};
}

Collector::Collector(PuzzleFixture fixture, std::vector<double> durations, const std::filesystem::path& out)
    : fixture_(std::move(fixture)), durations_(std::move(durations))
{
    fixture_.validate();
    std::error_code ec;
    const bool existing = std::filesystem::is_regular_file(out, ec) && std::filesystem::file_size(out, ec) > 0;
    if (existing) {
        const TrialLog log = load_trials_file(out, &fixture_);
        if (log.durations != durations_) {
            throw ValidationError("existing trial file " + out.string() + " declares different durations");
        }
        for (const auto& r : log.records) seen_.emplace(r.subject, r.block, r.trial);
    }
    auto file = std::make_unique<std::ofstream>(out, std::ios::app | std::ios::binary);
    if (!*file) throw IoError("cannot open " + out.string() + " for appending");
    owned_ = std::move(file);
    out_ = owned_.get();
    if (!existing) {
        *out_ << trial_header_line(durations_) << '\n';
        out_->flush();
        if (!*out_) throw IoError("cannot write trial header to " + out.string());
    }
}

Collector::Collector(PuzzleFixture fixture, std::vector<double> durations, std::ostream& out)
    : fixture_(std::move(fixture)), durations_(std::move(durations)), out_(&out)
{
    fixture_.validate();
    *out_ << trial_header_line(durations_) << '\n';
    out_->flush();
    if (!*out_) throw IoError("cannot write trial header");
}

bool Collector::failed() const
{
    std::lock_guard lock(mutex_);
    return failed_;
}

BatchResult Collector::submit(const json& body)
{
    if (!body.is_object()) throw ValidationError("request body must be a JSON object");
    if (body.value("schema", "") != kTrialSchema) {
        throw ValidationError(std::string("request schema must be ") + kTrialSchema);
    }
    const auto it = body.find("records");
    if (it == body.end() || !it->is_array()) throw ValidationError("request needs a records array");

    BatchResult result;
    std::vector<TrialRecord> parsed(it->size());
    std::vector<bool> valid(it->size(), false);
    for (std::size_t i = 0; i < it->size(); ++i) {
        std::vector<FieldError> errors;
        auto rec = parse_trial_record((*it)[i], durations_, errors);
        if (rec) {
            if (const PuzzleEntry* p = fixture_.find(rec->stimulus)) {
                const bool solved = count_satisfied(p->formula, Assignment(rec->choice)) == kNumClauses;
                if (solved != rec->success) {
                    result.warnings.push_back("record " + std::to_string(i) + ": success flag recomputed");
                    rec->success = solved;
                }
            } else {
                errors.push_back({0, "stimulus", "unknown stimulus " + std::to_string(rec->stimulus)});
            }
        }
        if (errors.empty()) {
            parsed[i] = std::move(*rec);
            valid[i] = true;
        } else {
            result.rejections.push_back({i, std::move(errors)});
        }
    }

    std::string chunk;
    std::lock_guard lock(mutex_);
    if (failed_) throw IoError("collector output failed earlier; not accepting records");
    std::vector<Key> added;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (!valid[i]) continue;
        const auto& r = parsed[i];
        Key key{r.subject, r.block, r.trial};
        if (seen_.contains(key)) {
            result.rejections.push_back(
                {i, {{0, "trial", "duplicate record for subject " + r.subject + ", block " + std::to_string(r.block) +
                                      ", trial " + std::to_string(r.trial)}}});
            continue;
        }
        seen_.insert(key);
        added.push_back(std::move(key));
        chunk += trial_record_line(r);
        chunk += '\n';
        ++result.accepted;
    }
    std::sort(result.rejections.begin(), result.rejections.end(),
              [](const RecordRejection& a, const RecordRejection& b) { return a.index < b.index; });
    if (!chunk.empty()) {
        out_->write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
        out_->flush();
        if (!*out_) {
            failed_ = true;
            for (const auto& k : added) seen_.erase(k);
            throw IoError("appending trial records failed");
        }
    }
    return result;
}

// --- HTTP -------------------------------------------------------------------

struct CollectorServer::Impl {
    Collector& collector;
    ServeOptions options;
    httplib::Server server;
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    Impl(Collector& c, ServeOptions o) : collector(c), options(std::move(o)) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json error_body(const std::string& message)
{
    return json{{"schema", kCollectResultSchema}, {"error", message}};
}

} // namespace

CollectorServer::CollectorServer(Collector& collector, ServeOptions options)
    : impl_(std::make_unique<Impl>(collector, std::move(options)))
{
    Impl& im = *impl_;
    const std::string puzzles = fixture_to_json(im.collector.fixture());

    im.server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json{{"schema", kHealthSchema}, {"status", "ok"}, {"version", kVersion}});
    });
    im.server.Get("/api/puzzles", [puzzles](const httplib::Request&, httplib::Response& res) {
        res.set_content(puzzles, "application/json");
    });
    im.server.Post("/api/trials", [&im](const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::parse_error&) {
            send_json(res, 400, error_body("request body is not valid JSON"));
            return;
        }
        try {
            send_json(res, 200, im.collector.submit(body).to_json());
        } catch (const ValidationError& e) {
            send_json(res, 400, error_body(e.what()));
        } catch (const IoError& e) {
            send_json(res, 500, error_body(e.what()));
            {
                std::lock_guard lock(im.fatal_mutex);
                if (!im.fatal) im.fatal = std::current_exception();
            }
            im.server.stop();
        }
    });
    if (im.options.static_dir) {
        if (!im.server.set_mount_point("/", im.options.static_dir->string())) {
            throw ConfigError("static directory " + im.options.static_dir->string() + " does not exist");
        }
    }
}

CollectorServer::~CollectorServer() = default;

void CollectorServer::run(const std::function<void(int)>& on_bound)
{
    Impl& im = *impl_;
    int port = im.options.port;
    if (port == 0) {
        port = im.server.bind_to_any_port(im.options.host);
    } else if (!im.server.bind_to_port(im.options.host, port)) {
        port = -1;
    }
    if (port < 0) {
        throw IoError("cannot bind " + im.options.host + ":" + std::to_string(im.options.port));
    }
    if (on_bound) on_bound(port);
    im.server.listen_after_bind();
    std::lock_guard lock(im.fatal_mutex);
    if (im.fatal) std::rethrow_exception(im.fatal);
}

void CollectorServer::wait_until_ready() const
{
    impl_->server.wait_until_ready();
}

void CollectorServer::stop()
{
    impl_->server.stop();
}

} // namespace brt
