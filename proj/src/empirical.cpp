#include "brt/empirical.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace brt {

using nlohmann::json;

std::string to_string(Phase phase)
{
    return phase == Phase::training ? "training" : "test";
}

std::string FieldError::str() const
{
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!field.empty()) s += "field '" + field + "': ";
    return s + message;
}

namespace {

std::string join_errors(const std::vector<FieldError>& errors)
{
    std::string s = "invalid trial data";
    for (const auto& e : errors) s += "\n  " + e.str();
    return s;
}

bool is_declared(std::span<const double> durations, double d)
{
    return std::find(durations.begin(), durations.end(), d) != durations.end();
}

} // namespace

TrialFormatError::TrialFormatError(std::vector<FieldError> errors)
    : ValidationError(join_errors(errors)), errors_(std::move(errors))
{
}

std::optional<TrialRecord> parse_trial_record(const json& j, std::span<const double> durations,
                                              std::vector<FieldError>& errors)
{
    const std::size_t before = errors.size();
    auto fail = [&errors](const char* field, std::string msg) { errors.push_back({0, field, std::move(msg)}); };

    if (!j.is_object()) {
        fail("", "record is not an object");
        return std::nullopt;
    }
    TrialRecord r;

    auto get_int = [&](const char* field, auto& out) {
        const auto it = j.find(field);
        if (it == j.end()) return fail(field, "missing");
        if (!it->is_number_integer()) return fail(field, "not an integer");
        out = it->template get<std::remove_reference_t<decltype(out)>>();
    };

    if (const auto it = j.find("subject"); it == j.end()) fail("subject", "missing");
    else if (!it->is_string() || it->get<std::string>().empty()) fail("subject", "not a nonempty string");
    else r.subject = it->get<std::string>();

    if (const auto it = j.find("phase"); it == j.end()) fail("phase", "missing");
    else if (*it == "test") r.phase = Phase::test;
    else if (*it == "training") r.phase = Phase::training;
    else fail("phase", "must be \"training\" or \"test\"");

    get_int("stimulus", r.stimulus);

    if (const auto it = j.find("duration"); it == j.end()) fail("duration", "missing");
    else if (!it->is_number()) fail("duration", "not a number");
    else if (r.duration = it->get<double>(); !is_declared(durations, r.duration)) {
        fail("duration", "unknown duration label " + it->dump());
    }

    if (const auto it = j.find("choice"); it == j.end()) fail("choice", "missing");
    else if (!it->is_number_integer()) fail("choice", "not an integer");
    else if (r.choice = it->get<int>(); r.choice < 0 || r.choice >= kNumAssignments) {
        fail("choice", "value " + std::to_string(r.choice) + " outside 0..7");
    }

    if (const auto it = j.find("success"); it == j.end()) fail("success", "missing");
    else if (!it->is_boolean()) fail("success", "not a boolean");
    else r.success = it->get<bool>();

    get_int("block", r.block);
    get_int("trial", r.trial);
    get_int("timestamp", r.timestamp_ms);

    if (errors.size() != before) return std::nullopt;
    return r;
}

json trial_record_to_json(const TrialRecord& r)
{
    // Field order is fixed by nlohmann's sorted object keys.
    return json{{"subject", r.subject},   {"phase", to_string(r.phase)}, {"stimulus", r.stimulus},
                {"duration", r.duration}, {"choice", r.choice},          {"success", r.success},
                {"block", r.block},       {"trial", r.trial},            {"timestamp", r.timestamp_ms}};
}

std::string trial_header_line(std::span<const double> durations)
{
    return json{{"schema", kTrialSchema}, {"durations", std::vector<double>(durations.begin(), durations.end())}}
        .dump();
}

std::string trial_record_line(const TrialRecord& record)
{
    return trial_record_to_json(record).dump();
}

TrialLog load_trials(std::istream& in, const PuzzleFixture* fixture)
{
    TrialLog log;
    std::vector<FieldError> errors;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            errors.push_back({lineno, "", "unparsable line"});
            continue;
        }

        if (!have_header) {
            have_header = true;
            if (!j.is_object() || j.value("schema", "") != kTrialSchema) {
                errors.push_back({lineno, "schema", std::string("expected header with schema ") + kTrialSchema});
                break;
            }
            try {
                log.durations = j.at("durations").get<std::vector<double>>();
            } catch (const json::exception&) {
                errors.push_back({lineno, "durations", "header must list duration labels"});
                break;
            }
            continue;
        }

        std::vector<FieldError> record_errors;
        auto rec = parse_trial_record(j, log.durations, record_errors);
        for (auto& e : record_errors) {
            e.line = lineno;
            errors.push_back(std::move(e));
        }
        if (!rec) continue;

        if (fixture) {
            const PuzzleEntry* p = fixture->find(rec->stimulus);
            if (!p) {
                errors.push_back({lineno, "stimulus", "unknown stimulus " + std::to_string(rec->stimulus)});
                continue;
            }
            const bool solved = count_satisfied(p->formula, Assignment(rec->choice)) == kNumClauses;
            if (solved != rec->success) {
                log.warnings.push_back("line " + std::to_string(lineno) +
                                       ": success flag disagrees with puzzle; recomputed");
                rec->success = solved;
            }
        }
        log.records.push_back(std::move(*rec));
    }

    if (!errors.empty()) throw TrialFormatError(std::move(errors));
    return log;
}

TrialLog load_trials_file(const std::filesystem::path& path, const PuzzleFixture* fixture)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trial file " + path.string());
    return load_trials(in, fixture);
}

void write_trials(std::ostream& out, std::span<const double> durations, std::span<const TrialRecord> records)
{
    out << trial_header_line(durations) << '\n';
    for (const auto& r : records) out << trial_record_line(r) << '\n';
}

// --- EmpiricalTable ---------------------------------------------------------

EmpiricalTable::EmpiricalTable(std::vector<int> stimuli, std::vector<double> durations, std::size_t num_choices)
    : stimuli_(std::move(stimuli)), durations_(std::move(durations)), num_choices_(num_choices)
{
    if (stimuli_.empty() || durations_.empty() || num_choices_ == 0) {
        throw ConfigError("empirical table needs nonempty stimulus, duration and choice sets");
    }
}

EmpiricalTable EmpiricalTable::from_counts(std::vector<int> stimuli, std::vector<double> durations,
                                           std::size_t num_choices, std::vector<std::int64_t> counts)
{
    EmpiricalTable t(std::move(stimuli), std::move(durations), num_choices);
    const std::size_t cells = t.num_stimuli() * t.num_durations() * num_choices;
    if (counts.size() != cells) throw DimensionError("count array does not match the grid");
    for (auto c : counts) {
        if (c < 0) throw ValidationError("negative count");
    }
    t.smoothed_ = true;
    t.counts_ = std::move(counts);

    std::int64_t total = static_cast<std::int64_t>(cells);
    for (auto c : t.counts_) total += c;
    t.joint_.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        t.joint_[i] = static_cast<double>(t.counts_[i] + 1) / static_cast<double>(total);
    }

    const std::size_t nx = t.num_stimuli(), nr = t.num_durations();
    t.context_.assign(nx * nr, 0.0);
    t.conditionals_.reserve(nx * nr);
    for (std::size_t c = 0; c < nx * nr; ++c) {
        double mass = 0.0;
        for (std::size_t y = 0; y < num_choices; ++y) mass += t.joint_[c * num_choices + y];
        t.context_[c] = mass;
        std::vector<double> cond(num_choices);
        std::int64_t row = 0;
        for (std::size_t y = 0; y < num_choices; ++y) row += t.counts_[c * num_choices + y] + 1;
        for (std::size_t y = 0; y < num_choices; ++y) {
            cond[y] = static_cast<double>(t.counts_[c * num_choices + y] + 1) / static_cast<double>(row);
        }
        t.conditionals_.emplace_back(std::move(cond));
    }
    t.derive_marginals();
    return t;
}

EmpiricalTable EmpiricalTable::from_conditionals(std::vector<int> stimuli, std::vector<double> durations,
                                                 std::vector<double> context,
                                                 std::vector<ChoiceDistribution> conditionals)
{
    if (conditionals.empty()) throw ConfigError("no conditionals given");
    EmpiricalTable t(std::move(stimuli), std::move(durations), conditionals.front().size());
    const std::size_t nx = t.num_stimuli(), nr = t.num_durations(), ny = t.num_choices_;
    if (context.size() != nx * nr || conditionals.size() != nx * nr) {
        throw DimensionError("context/conditionals do not match the grid");
    }
    (void)ChoiceDistribution(context); // validates P(x,r)
    t.context_ = std::move(context);
    t.conditionals_ = std::move(conditionals);
    t.joint_.resize(nx * nr * ny);
    for (std::size_t c = 0; c < nx * nr; ++c) {
        if (t.conditionals_[c].size() != ny) throw DimensionError("conditional length mismatch");
        for (std::size_t y = 0; y < ny; ++y) t.joint_[c * ny + y] = t.context_[c] * t.conditionals_[c][y];
    }
    t.derive_marginals();
    return t;
}

void EmpiricalTable::derive_marginals()
{
    const std::size_t nx = num_stimuli(), nr = num_durations(), ny = num_choices_;
    std::vector<double> py(ny, 0.0);
    for (std::size_t c = 0; c < nx * nr; ++c) {
        for (std::size_t y = 0; y < ny; ++y) py[y] += joint_[c * ny + y];
    }
    prior_ = ChoiceDistribution(std::move(py));
    stimulus_marginal_.assign(nx, 0.0);
    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t ri = 0; ri < nr; ++ri) stimulus_marginal_[xi] += context_[xi * nr + ri];
    }
}

std::optional<std::size_t> EmpiricalTable::stimulus_index(int id) const
{
    const auto it = std::find(stimuli_.begin(), stimuli_.end(), id);
    if (it == stimuli_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - stimuli_.begin());
}

std::optional<std::size_t> EmpiricalTable::duration_index(double label) const
{
    const auto it = std::find(durations_.begin(), durations_.end(), label);
    if (it == durations_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - durations_.begin());
}

std::int64_t EmpiricalTable::count(std::size_t xi, std::size_t ri, std::size_t y) const
{
    if (counts_.empty()) return 0;
    return counts_[(xi * durations_.size() + ri) * num_choices_ + y];
}

double EmpiricalTable::joint(std::size_t xi, std::size_t ri, std::size_t y) const
{
    return joint_[(xi * durations_.size() + ri) * num_choices_ + y];
}

std::int64_t EmpiricalTable::total_count() const noexcept
{
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

EmpiricalTable build_table(std::span<const TrialRecord> trials, PhaseFilter filter, std::vector<int> stimuli,
                           std::vector<double> durations, std::size_t num_choices)
{
    if (stimuli.empty() || durations.empty()) throw ConfigError("build_table: X and R must be nonempty");
    const std::size_t nr = durations.size();
    std::vector<std::int64_t> counts(stimuli.size() * nr * num_choices, 0);
    for (const auto& t : trials) {
        if (filter == PhaseFilter::test && t.phase != Phase::test) continue;
        if (filter == PhaseFilter::training && t.phase != Phase::training) continue;
        const auto xit = std::find(stimuli.begin(), stimuli.end(), t.stimulus);
        const auto rit = std::find(durations.begin(), durations.end(), t.duration);
        if (xit == stimuli.end() || rit == durations.end()) continue;
        if (t.choice < 0 || static_cast<std::size_t>(t.choice) >= num_choices) {
            throw ValidationError("build_table: choice outside the choice set");
        }
        const auto xi = static_cast<std::size_t>(xit - stimuli.begin());
        const auto ri = static_cast<std::size_t>(rit - durations.begin());
        ++counts[(xi * nr + ri) * num_choices + static_cast<std::size_t>(t.choice)];
    }
    return EmpiricalTable::from_counts(std::move(stimuli), std::move(durations), num_choices, std::move(counts));
}

const ChoiceDistribution& conditional(const EmpiricalTable& table, int stimulus, double duration)
{
    const auto xi = table.stimulus_index(stimulus);
    const auto ri = table.duration_index(duration);
    if (!xi || !ri) throw ConfigError("conditional: (stimulus, duration) not on the table grid");
    return table.conditional(*xi, *ri);
}

const ChoiceDistribution& prior(const EmpiricalTable& table)
{
    return table.prior();
}

double entropy_bits(std::span<const double> p)
{
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    return h;
}

// --- serialization ------------------------------------------------------------

std::string table_to_json(const EmpiricalTable& t)
{
    json conds = json::array();
    for (std::size_t xi = 0; xi < t.num_stimuli(); ++xi) {
        for (std::size_t ri = 0; ri < t.num_durations(); ++ri) {
            const auto v = t.conditional(xi, ri).values();
            conds.push_back(std::vector<double>(v.begin(), v.end()));
        }
    }
    std::vector<double> context;
    for (std::size_t xi = 0; xi < t.num_stimuli(); ++xi) {
        for (std::size_t ri = 0; ri < t.num_durations(); ++ri) context.push_back(t.context(xi, ri));
    }
    const json j{{"schema", kTableSchema},
                 {"stimuli", t.stimuli()},
                 {"durations", t.durations()},
                 {"choices", t.num_choices()},
                 {"smoothed", t.smoothed()},
                 {"counts", t.counts()},
                 {"context", context},
                 {"conditionals", conds}};
    return j.dump();
}

EmpiricalTable table_from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        if (j.value("schema", "") != kTableSchema) throw ValidationError("table: wrong schema");
        auto stimuli = j.at("stimuli").get<std::vector<int>>();
        auto durations = j.at("durations").get<std::vector<double>>();
        const auto choices = j.at("choices").get<std::size_t>();
        if (j.at("smoothed").get<bool>()) {
            return EmpiricalTable::from_counts(std::move(stimuli), std::move(durations), choices,
                                               j.at("counts").get<std::vector<std::int64_t>>());
        }
        std::vector<ChoiceDistribution> conds;
        for (const auto& c : j.at("conditionals")) conds.emplace_back(c.get<std::vector<double>>());
        return EmpiricalTable::from_conditionals(std::move(stimuli), std::move(durations),
                                                 j.at("context").get<std::vector<double>>(), std::move(conds));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("table: ") + e.what());
    }
}

} // namespace brt
