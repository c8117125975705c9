#include "brt/cli.hpp"

#include "brt/analysis.hpp"
#include "brt/collector.hpp"
#include "brt/error.hpp"
#include "brt/random.hpp"
#include "brt/simulator.hpp"
#include "brt/version.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace brt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

RunManifest start_manifest(const std::string& command)
{
    RunManifest m;
    m.command = command;
    m.version = kVersion;
    m.started_ms = now_ms();
    return m;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write " + path.string());
}

void finish(RunManifest& m, const fs::path& primary_output)
{
    m.finished_ms = now_ms();
    write_text(manifest_path(primary_output), m.to_json().dump(1) + "\n");
}

std::string subject_name(int index)
{
    std::string digits = std::to_string(index + 1);
    if (digits.size() < 2) digits.insert(0, "0");
    return "s" + digits;
}

// "s01.trials.jsonl" -> "s01"
std::string file_label(const fs::path& path)
{
    const std::string name = path.filename().string();
    return name.substr(0, name.find('.'));
}

json mean_std(const std::vector<double>& v)
{
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return json{{"mean", mean}, {"std", sd}};
}

} // namespace

json RunManifest::to_json() const
{
    auto paths = [](const std::vector<fs::path>& ps) {
        json a = json::array();
        for (const auto& p : ps) a.push_back(p.string());
        return a;
    };
    return json{{"schema", kManifestSchema},
                {"command", command},
                {"config", config ? json(config->string()) : json(nullptr)},
                {"inputs", paths(inputs)},
                {"outputs", paths(outputs)},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"version", version},
                {"started_ms", started_ms},
                {"finished_ms", finished_ms},
                {"parameters", parameters}};
}

fs::path manifest_path(const fs::path& output)
{
    std::error_code ec;
    if (fs::is_directory(output, ec)) return output / "manifest.json";
    fs::path p = output;
    p += ".manifest.json";
    return p;
}

std::optional<fs::path> resolve_config(const std::optional<fs::path>& explicit_path, const std::string& default_name)
{
    const char* dir = std::getenv(kConfigDirVariable);
    std::error_code ec;
    if (explicit_path) {
        if (fs::exists(*explicit_path, ec)) return *explicit_path;
        if (dir && explicit_path->is_relative()) {
            const fs::path candidate = fs::path(dir) / *explicit_path;
            if (fs::exists(candidate, ec)) return candidate;
        }
        throw ConfigError("config file " + explicit_path->string() + " not found");
    }
    if (dir) {
        const fs::path candidate = fs::path(dir) / default_name;
        if (fs::exists(candidate, ec)) return candidate;
    }
    return std::nullopt;
}

// --- gen-puzzles, make-design, make-agent -----------------------------------

RunManifest cmd_gen_puzzles(const GenPuzzlesOptions& o)
{
    RunManifest m = start_manifest("gen-puzzles");
    m.seed = o.seed;
    m.parameters = {{"count", o.count}};
    const PuzzleFixture fixture = generate_stimulus_set(o.count, o.seed);
    fixture.validate();
    write_text(o.out, fixture_to_json(fixture));
    m.outputs = {o.out};
    finish(m, o.out);
    return m;
}

RunManifest cmd_make_design(const MakeDesignOptions& o)
{
    RunManifest m = start_manifest("make-design");
    m.inputs = {o.puzzles};
    ExperimentDesign design = default_design(load_fixture(o.puzzles));
    if (o.trials_per_cell) {
        design.mode = ExperimentDesign::Mode::cells;
        design.trials_per_cell = *o.trials_per_cell;
        m.parameters["trials_per_cell"] = *o.trials_per_cell;
    }
    design.validate();
    write_text(o.out, design_to_json(design));
    m.outputs = {o.out};
    finish(m, o.out);
    return m;
}

RunManifest cmd_make_agent(const MakeAgentOptions& o)
{
    RunManifest m = start_manifest("make-agent");
    m.seed = o.seed;
    m.inputs = {o.puzzles, o.design};
    const PuzzleFixture fixture = load_fixture(o.puzzles);
    const ExperimentDesign design = load_design(o.design);
    write_text(o.out, model_to_json(default_agent(fixture, design, o.seed)));
    m.outputs = {o.out};
    finish(m, o.out);
    return m;
}

// --- simulate ---------------------------------------------------------------

RunManifest cmd_simulate(const SimulateOptions& o)
{
    RunManifest m = start_manifest("simulate");
    m.seed = o.seed;
    m.parameters = {{"subjects", o.subjects}};
    if (o.subjects < 1) throw ConfigError("simulate: --subjects must be at least 1");
    if (!o.agent && !o.puzzles) throw ConfigError("simulate: need --agent or --puzzles for the default agent");

    const ExperimentDesign design = load_design(o.design);
    m.inputs.push_back(o.design);
    std::optional<PuzzleFixture> fixture;
    if (o.puzzles) {
        fixture = load_fixture(*o.puzzles);
        m.inputs.push_back(*o.puzzles);
    }
    std::optional<DecompositionModel> shared_agent;
    if (o.agent) {
        shared_agent = load_model(*o.agent);
        m.inputs.push_back(*o.agent);
    }

    const auto durations = declared_durations(design);
    const bool many = o.subjects > 1;
    if (many) fs::create_directories(o.out);
    for (int i = 0; i < o.subjects; ++i) {
        const std::uint64_t agent_seed = mix_seed(o.seed, 2 * static_cast<std::uint64_t>(i) + 1);
        const std::uint64_t sample_seed = mix_seed(o.seed, 2 * static_cast<std::uint64_t>(i));
        const DecompositionModel agent = shared_agent ? *shared_agent : default_agent(*fixture, design, agent_seed);
        const std::string subject = subject_name(i);
        const auto records = sample_trials(agent, design, sample_seed, subject, fixture ? &*fixture : nullptr);
        std::ostringstream text;
        write_trials(text, durations, records);
        const fs::path path = many ? o.out / (subject + ".trials.jsonl") : o.out;
        write_text(path, text.str());
        m.outputs.push_back(path);
    }
    finish(m, o.out);
    return m;
}

// --- fit --------------------------------------------------------------------

EmpiricalTable table_for_fit(const TrialLog& log, PhaseFilter phase, const PuzzleFixture* fixture,
                             bool exclude_control)
{
    auto keep = [phase](const TrialRecord& r) {
        return phase == PhaseFilter::all || (phase == PhaseFilter::test) == (r.phase == Phase::test);
    };
    std::optional<int> control;
    if (exclude_control) {
        if (!fixture) throw ConfigError("excluding the control stimulus needs the puzzle fixture");
        control = fixture->control_id();
    }

    std::vector<int> stimuli;
    std::set<double> used_durations;
    if (fixture) stimuli = fixture->ids();
    std::set<int> seen;
    for (const auto& r : log.records) {
        if (!keep(r)) continue;
        used_durations.insert(r.duration);
        if (!fixture) seen.insert(r.stimulus);
    }
    if (!fixture) stimuli.assign(seen.begin(), seen.end());
    if (control) std::erase(stimuli, *control);

    std::vector<double> durations;
    for (double d : log.durations) {
        if (used_durations.contains(d)) durations.push_back(d);
    }
    if (stimuli.empty() || durations.empty()) throw ValidationError("no trials left to fit after phase filtering");
    return build_table(log.records, phase, stimuli, durations);
}

json fit_summary(const std::vector<std::string>& names, const std::vector<FitResult>& fits)
{
    if (fits.empty()) throw ConfigError("fit summary needs at least one model");
    const DecompositionModel& first = fits.front().model;
    for (const auto& f : fits) {
        if (f.model.durations != first.durations || f.model.stimuli != first.stimuli ||
            f.model.kind != first.kind) {
            throw ValidationError("models in a summary must share stimuli, durations and kind");
        }
    }
    auto column = [&](auto get) {
        std::vector<double> v;
        for (const auto& f : fits) v.push_back(get(f));
        return mean_std(v);
    };

    json subjects = json::array();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        subjects.push_back({{"name", names[i]},
                            {"final_j_bits", fits[i].report.final_j_bits},
                            {"converged", fits[i].report.converged},
                            {"iterations", fits[i].report.iterations}});
    }
    json betas = json::array();
    for (std::size_t r = 0; r < first.durations.size(); ++r) {
        json e = column([r](const FitResult& f) { return f.model.betas[r]; });
        e["duration"] = first.durations[r];
        betas.push_back(e);
    }
    json utilities = json::array();
    for (std::size_t x = 0; x < first.stimuli.size(); ++x) {
        json per_choice = json::array();
        for (std::size_t y = 0; y < first.num_choices(); ++y) {
            per_choice.push_back(column([x, y](const FitResult& f) { return f.model.utilities[x][y]; }));
        }
        utilities.push_back({{"stimulus", first.stimuli[x]}, {"choices", per_choice}});
    }
    return json{{"schema", kFitSummarySchema},
                {"kind", to_string(first.kind)},
                {"count", fits.size()},
                {"subjects", subjects},
                {"final_j_bits", column([](const FitResult& f) { return f.report.final_j_bits; })},
                {"betas", betas},
                {"utilities", utilities}};
}

RunManifest cmd_fit(const FitOptions& o)
{
    RunManifest m = start_manifest("fit");
    if (o.trials.empty()) throw ConfigError("fit: no trial files given");
    FitConfig config;
    if (const auto path = resolve_config(o.config, "fit.json")) {
        config = fit_config_from_json(read_text(*path));
        m.config = *path;
    }
    config.validate();
    m.seed = config.seed;
    m.parameters = {{"kind", to_string(o.kind)},
                    {"phase", o.phase == PhaseFilter::test       ? "test"
                              : o.phase == PhaseFilter::training ? "training"
                                                                 : "all"},
                    {"exclude_control", o.exclude_control},
                    {"fit_config", json::parse(fit_config_to_json(config))}};

    std::optional<PuzzleFixture> fixture;
    if (o.puzzles) {
        fixture = load_fixture(*o.puzzles);
        m.inputs.push_back(*o.puzzles);
    }
    const PuzzleFixture* fx = fixture ? &*fixture : nullptr;

    const bool many = o.trials.size() > 1;
    std::vector<std::string> names;
    std::vector<FitResult> fits;
    std::set<std::string> used_names;
    for (const auto& path : o.trials) {
        m.inputs.push_back(path);
        const TrialLog log = load_trials_file(path, fx);
        const EmpiricalTable table = table_for_fit(log, o.phase, fx, o.exclude_control);
        FitResult result = fit(table, config, o.kind);
        const std::string name = file_label(path);
        if (many) {
            if (!used_names.insert(name).second) throw ConfigError("fit: two inputs share the name " + name);
            const fs::path out = o.out / (name + ".model.json");
            write_text(out, model_to_json(result.model, &result.report));
            m.outputs.push_back(out);
        } else {
            write_text(o.out, model_to_json(result.model, &result.report));
            m.outputs.push_back(o.out);
        }
        names.push_back(name);
        fits.push_back(std::move(result));
    }
    if (many) {
        const fs::path out = o.out / "summary.json";
        write_text(out, fit_summary(names, fits).dump(1) + "\n");
        m.outputs.push_back(out);
    }
    finish(m, o.out);
    return m;
}

// --- analyze ----------------------------------------------------------------

RunManifest cmd_analyze(const AnalyzeOptions& o)
{
    RunManifest m = start_manifest("analyze");
    const DecompositionModel model = load_model(o.model);
    const PuzzleFixture fixture = load_fixture(o.puzzles);
    m.inputs = {o.model, o.puzzles};

    CurveConfig config;
    double lo = 1e-2, hi = 1e3;
    int points = 60;
    if (const auto path = resolve_config(o.config, "curve.json")) {
        config = curve_config_from_json(read_text(*path));
        m.config = *path;
    }
    if (o.beta_min || o.beta_max || o.points || config.beta_grid.empty()) {
        config.beta_grid = default_beta_grid(o.beta_min.value_or(lo), o.beta_max.value_or(hi), o.points.value_or(points));
    }
    if (o.include_control) config.include_control = *o.include_control;
    config.control_stimulus = fixture.control_id();
    config.validate();
    m.parameters = {{"beta_grid_size", config.beta_grid.size()}, {"include_control", config.include_control}};

    const Curve curve = sweep(model, config, solutions_from_fixture(fixture));
    std::ostringstream text;
    write_curve(text, curve);
    write_text(o.out, text.str());
    m.outputs = {o.out};
    finish(m, o.out);
    return m;
}

// --- clause cases -----------------------------------------------------------

std::string clause_cases_json()
{
    json cases = json::array();
    for (const Clause& c : clause_family()) {
        for (int i = 0; i < kNumAssignments; ++i) {
            const Assignment a(i);
            cases.push_back({{"clause",
                              {{c.first.variable, c.first.positive}, {c.second.variable, c.second.positive}}},
                             {"assignment", i},
                             {"bits", a.str()},
                             {"satisfied", clause_satisfied(c, a)}});
        }
    }
    return json{{"schema", kClauseCasesSchema}, {"cases", cases}}.dump(1) + "\n";
}

RunManifest cmd_clause_cases(const ClauseCasesOptions& o)
{
    RunManifest m = start_manifest("clause-cases");
    write_text(o.out, clause_cases_json());
    m.outputs = {o.out};
    finish(m, o.out);
    return m;
}

// --- collect ----------------------------------------------------------------

void cmd_collect(const CollectOptions& o)
{
    RunManifest m = start_manifest("collect");
    PuzzleFixture fixture = load_fixture(o.puzzles);
    m.inputs = {o.puzzles};
    std::vector<double> durations;
    if (o.design) {
        durations = declared_durations(load_design(*o.design));
        m.inputs.push_back(*o.design);
    } else {
        durations = declared_durations(default_design(fixture));
    }
    m.outputs = {o.out};
    m.parameters = {{"host", o.host}, {"port", o.port}};
    if (o.static_dir) m.parameters["static"] = o.static_dir->string();

    Collector collector(std::move(fixture), durations, o.out);
    CollectorServer server(collector, {o.host, o.port, o.static_dir});
    finish(m, o.out);
    server.run([&](int port) {
        std::fprintf(stderr, "collector listening on %s:%d, appending to %s\n", o.host.c_str(), port,
                     o.out.string().c_str());
    });
}

} // namespace brt
