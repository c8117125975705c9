#include "brt/simulator.hpp"

#include "brt/error.hpp"
#include "brt/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace brt {

using nlohmann::json;

std::vector<int> ExperimentDesign::all_stimuli() const
{
    std::vector<int> ids;
    for (const auto& s : stimuli) ids.push_back(s.id);
    if (control_stimulus) ids.push_back(*control_stimulus);
    return ids;
}

std::vector<double> ExperimentDesign::context() const
{
    const std::vector<int> ids = all_stimuli();
    const std::size_t nr = durations.size();
    std::vector<double> px(ids.size(), 0.0);
    if (mode == Mode::cells) {
        std::fill(px.begin(), px.end(), 1.0 / static_cast<double>(ids.size()));
    } else {
        const double total_w = std::accumulate(stimuli.begin(), stimuli.end(), 0.0,
                                               [](double acc, const StimulusWeight& s) { return acc + s.weight; });
        const double per_block = test_block_size + (control_stimulus ? controls_per_block : 0);
        for (std::size_t i = 0; i < stimuli.size(); ++i) {
            px[i] = (test_block_size / per_block) * stimuli[i].weight / total_w;
        }
        if (control_stimulus) px.back() = controls_per_block / per_block;
    }
    std::vector<double> pr(nr, 1.0 / static_cast<double>(nr));
    if (mode == Mode::blocks) {
        const double w = std::accumulate(duration_weights.begin(), duration_weights.end(), 0.0);
        for (std::size_t r = 0; r < nr; ++r) pr[r] = duration_weights[r] / w;
    }
    std::vector<double> ctx(ids.size() * nr);
    for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t r = 0; r < nr; ++r) ctx[x * nr + r] = px[x] * pr[r];
    }
    return ctx;
}

long ExperimentDesign::test_trials() const
{
    if (mode == Mode::cells) return trials_per_cell * static_cast<long>(all_stimuli().size() * durations.size());
    return static_cast<long>(test_blocks) * (test_block_size + (control_stimulus ? controls_per_block : 0));
}

long ExperimentDesign::training_trials() const
{
    return mode == Mode::cells ? 0 : static_cast<long>(training_blocks) * training_block_size;
}

void ExperimentDesign::validate() const
{
    auto bad = [](const std::string& field, const std::string& why) {
        throw ValidationError("design field '" + field + "': " + why);
    };
    if (stimuli.empty()) bad("stimuli", "at least one stimulus required");
    std::set<int> ids;
    for (const auto& s : stimuli) {
        if (!ids.insert(s.id).second) bad("stimuli", "duplicate id " + std::to_string(s.id));
        if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) bad("stimuli", "weights must be nonnegative");
    }
    if (control_stimulus && ids.count(*control_stimulus)) bad("control_stimulus", "also listed as trained");
    if (durations.empty()) bad("durations", "at least one duration required");
    std::set<double> ds;
    for (double d : durations) {
        if (!(d > 0.0) || !std::isfinite(d)) bad("durations", "must be positive");
        if (!ds.insert(d).second) bad("durations", "duplicate label");
    }
    if (mode == Mode::cells) {
        if (trials_per_cell <= 0) bad("trials_per_cell", "must be positive in cells mode");
        return;
    }
    if (std::accumulate(stimuli.begin(), stimuli.end(), 0.0,
                        [](double a, const StimulusWeight& s) { return a + s.weight; }) <= 0.0) {
        bad("stimuli", "weights sum to zero");
    }
    if (duration_weights.size() != durations.size()) bad("duration_weights", "one weight per duration");
    for (double w : duration_weights) {
        if (!(w >= 0.0)) bad("duration_weights", "must be nonnegative");
    }
    if (std::accumulate(duration_weights.begin(), duration_weights.end(), 0.0) <= 0.0) {
        bad("duration_weights", "sum to zero");
    }
    if (training_blocks < 0 || training_block_size < 0) bad("training", "counts must be nonnegative");
    if (training_blocks > 0 && !(training_duration > 0.0)) bad("training.duration", "must be positive");
    if (test_blocks < 0 || test_block_size < 0 || controls_per_block < 0) bad("test", "counts must be nonnegative");
    if (!(inter_trial_min >= 0.0) || inter_trial_max < inter_trial_min) bad("inter_trial", "need 0 <= min <= max");
}

ExperimentDesign default_design(const PuzzleFixture& fixture)
{
    ExperimentDesign d;
    for (const auto& p : fixture.puzzles) {
        if (p.control) d.control_stimulus = p.formula.id;
        else d.stimuli.push_back({p.formula.id, p.weight});
    }
    d.validate();
    return d;
}

std::string design_to_json(const ExperimentDesign& d)
{
    json stimuli = json::array();
    for (const auto& s : d.stimuli) stimuli.push_back({{"id", s.id}, {"weight", s.weight}});
    json j{{"schema", kDesignSchema},
           {"mode", d.mode == ExperimentDesign::Mode::blocks ? "blocks" : "cells"},
           {"stimuli", stimuli},
           {"control_stimulus", d.control_stimulus ? json(*d.control_stimulus) : json(nullptr)},
           {"durations", d.durations},
           {"duration_weights", d.duration_weights},
           {"trials_per_cell", d.trials_per_cell},
           {"training",
            {{"blocks", d.training_blocks}, {"block_size", d.training_block_size}, {"duration", d.training_duration}}},
           {"test",
            {{"blocks", d.test_blocks}, {"block_size", d.test_block_size}, {"controls_per_block", d.controls_per_block}}},
           {"inter_trial", {d.inter_trial_min, d.inter_trial_max}},
           {"start_timestamp_ms", d.start_timestamp_ms}};
    return j.dump(2);
}

ExperimentDesign design_from_json(const std::string& text)
{
    ExperimentDesign d;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("design file is not valid JSON: ") + e.what());
    }
    std::string field;
    try {
        field = "schema";
        if (j.value("schema", "") != kDesignSchema) {
            throw ValidationError("design field 'schema': expected " + std::string(kDesignSchema));
        }
        field = "mode";
        const std::string mode = j.value("mode", "blocks");
        if (mode == "blocks") d.mode = ExperimentDesign::Mode::blocks;
        else if (mode == "cells") d.mode = ExperimentDesign::Mode::cells;
        else throw ValidationError("design field 'mode': expected blocks or cells");
        field = "stimuli";
        for (const auto& s : j.at("stimuli")) d.stimuli.push_back({s.at("id").get<int>(), s.value("weight", 1.0)});
        field = "control_stimulus";
        if (j.contains("control_stimulus") && !j.at("control_stimulus").is_null()) {
            d.control_stimulus = j.at("control_stimulus").get<int>();
        }
        field = "durations";
        d.durations = j.at("durations").get<std::vector<double>>();
        field = "duration_weights";
        d.duration_weights = j.value("duration_weights", std::vector<double>(d.durations.size(), 1.0));
        field = "trials_per_cell";
        d.trials_per_cell = j.value("trials_per_cell", 0L);
        field = "training";
        if (j.contains("training")) {
            const json& t = j.at("training");
            d.training_blocks = t.value("blocks", d.training_blocks);
            d.training_block_size = t.value("block_size", d.training_block_size);
            d.training_duration = t.value("duration", d.training_duration);
        }
        field = "test";
        if (j.contains("test")) {
            const json& t = j.at("test");
            d.test_blocks = t.value("blocks", d.test_blocks);
            d.test_block_size = t.value("block_size", d.test_block_size);
            d.controls_per_block = t.value("controls_per_block", d.controls_per_block);
        }
        field = "inter_trial";
        if (j.contains("inter_trial")) {
            const auto it = j.at("inter_trial").get<std::vector<double>>();
            if (it.size() != 2) throw ValidationError("design field 'inter_trial': expected [min, max]");
            d.inter_trial_min = it[0];
            d.inter_trial_max = it[1];
        }
        field = "start_timestamp_ms";
        d.start_timestamp_ms = j.value("start_timestamp_ms", d.start_timestamp_ms);
    } catch (const json::exception& e) {
        throw ValidationError("design field '" + field + "': " + e.what());
    }
    d.validate();
    return d;
}

ExperimentDesign load_design(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open design file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return design_from_json(ss.str());
}

std::vector<double> marginal_matching_offsets(const std::vector<std::vector<double>>& utilities,
                                              const std::vector<double>& betas, const std::vector<double>& context,
                                              const ChoiceDistribution& prior, double tolerance)
{
    if (utilities.empty()) throw ConfigError("marginal_matching_offsets: no utilities");
    const std::size_t nx = utilities.size(), nr = betas.size(), ny = prior.size();
    if (context.size() != nx * nr) throw DimensionError("marginal_matching_offsets: context size mismatch");
    for (std::size_t y = 0; y < ny; ++y) {
        if (!(prior[y] > 0.0)) throw DomainError("marginal_matching_offsets: prior needs full support");
    }
    double beta_max = 0.0;
    for (double b : betas) beta_max = std::max(beta_max, b);
    if (!(beta_max > 0.0)) throw DomainError("marginal_matching_offsets: need a positive beta");

    // Mirror-descent steps d += (log prior - log marginal) / beta_max; the
    // fixed point is the unique minimizer of the convex objective above.
    std::vector<double> d(ny, 0.0), shifted(ny), q(ny), marginal(ny);
    for (long it = 0; it < 1'000'000; ++it) {
        std::fill(marginal.begin(), marginal.end(), 0.0);
        for (std::size_t x = 0; x < nx; ++x) {
            for (std::size_t y = 0; y < ny; ++y) shifted[y] = utilities[x][y] + d[y];
            for (std::size_t r = 0; r < nr; ++r) {
                gibbs_posterior_into(prior.values(), shifted, betas[r], q);
                for (std::size_t y = 0; y < ny; ++y) marginal[y] += context[x * nr + r] * q[y];
            }
        }
        double worst = 0.0;
        for (std::size_t y = 0; y < ny; ++y) worst = std::max(worst, std::abs(marginal[y] - prior[y]));
        if (worst < tolerance) return d;
        for (std::size_t y = 0; y < ny; ++y) d[y] += std::log(prior[y] / marginal[y]) / beta_max;
    }
    throw Error("marginal_matching_offsets: no convergence");
}

DecompositionModel make_agent(const ExperimentDesign& design, std::vector<std::vector<double>> utilities,
                              std::vector<double> test_betas, const ChoiceDistribution& prior,
                              std::vector<double> extra_durations, std::vector<double> extra_betas)
{
    design.validate();
    const std::vector<int> ids = design.all_stimuli();
    if (utilities.size() != ids.size()) throw DimensionError("make_agent: one utility table per design stimulus");
    if (test_betas.size() != design.durations.size()) throw DimensionError("make_agent: one beta per duration");
    if (extra_betas.size() != extra_durations.size()) throw DimensionError("make_agent: extra betas mismatch");
    for (const auto& u : utilities) {
        if (u.size() != prior.size()) throw DimensionError("make_agent: utility length differs from prior");
    }

    const auto ctx = design.context();
    const auto offsets = marginal_matching_offsets(utilities, test_betas, ctx, prior);
    for (auto& u : utilities) {
        for (std::size_t y = 0; y < u.size(); ++y) u[y] += offsets[y];
    }

    DecompositionModel agent;
    agent.kind = ModelKind::gibbs;
    agent.prior = prior;
    agent.stimuli = ids;
    agent.durations = design.durations;
    agent.betas = test_betas;
    agent.durations.insert(agent.durations.end(), extra_durations.begin(), extra_durations.end());
    agent.betas.insert(agent.betas.end(), extra_betas.begin(), extra_betas.end());
    agent.utilities = std::move(utilities);
    agent.anchor = static_cast<std::size_t>(
        std::min_element(design.durations.begin(), design.durations.end()) - design.durations.begin());
    agent.beta0 = 1.0;

    std::vector<double> px(ids.size(), 0.0);
    for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t r = 0; r < design.durations.size(); ++r) px[x] += ctx[x * design.durations.size() + r];
    }
    agent.stimulus_marginal = px;
    return project_gauge(agent);
}

DecompositionModel default_agent(const PuzzleFixture& fixture, const ExperimentDesign& design, std::uint64_t seed)
{
    Rng rng(seed);
    const double shortest = *std::min_element(design.durations.begin(), design.durations.end());
    auto beta_at = [shortest](double d) { return 1.0 + 1.5 * std::log2(d / shortest); };

    std::vector<double> test_betas;
    for (double d : design.durations) test_betas.push_back(beta_at(d));

    std::optional<Assignment> dominant;
    double best = -1.0;
    for (const auto& s : design.stimuli) {
        if (s.weight > best) {
            best = s.weight;
            dominant = fixture.at(s.id).solution;
        }
    }

    std::vector<std::vector<double>> utilities;
    for (int id : design.all_stimuli()) {
        const PuzzleEntry& p = fixture.at(id);
        std::vector<double> u(kNumAssignments);
        const bool control = design.control_stimulus && *design.control_stimulus == id;
        for (double& v : u) v = control ? rng.uniform(-0.5, 0.5) : rng.uniform(-1.5, 1.0);
        if (control) {
            // Untrained: habitual pull toward the dominant puzzle's answer.
            if (dominant) u[dominant->index()] += 0.5;
        } else {
            u[p.solution.index()] = 2.0;
        }
        utilities.push_back(std::move(u));
    }

    // Prior choice habits: extra mass on the dominant puzzle's answer and on
    // the all-false / all-true patterns.
    std::vector<double> habit(kNumAssignments, 1.0);
    if (dominant) habit[dominant->index()] += 1.5;
    habit[0] += 0.75;
    habit[kNumAssignments - 1] += 0.75;
    const ChoiceDistribution prior = ChoiceDistribution::from_weights(habit);

    std::vector<double> extra_d, extra_b;
    if (design.mode == ExperimentDesign::Mode::blocks && design.training_blocks > 0 &&
        std::find(design.durations.begin(), design.durations.end(), design.training_duration) ==
            design.durations.end()) {
        extra_d.push_back(design.training_duration);
        extra_b.push_back(beta_at(design.training_duration));
    }
    return make_agent(design, std::move(utilities), std::move(test_betas), prior, std::move(extra_d),
                      std::move(extra_b));
}

std::vector<double> declared_durations(const ExperimentDesign& design)
{
    std::vector<double> out = design.durations;
    if (design.mode == ExperimentDesign::Mode::blocks && design.training_blocks > 0 &&
        std::find(out.begin(), out.end(), design.training_duration) == out.end()) {
        out.push_back(design.training_duration);
    }
    return out;
}

namespace {

class TrialSampler {
public:
    TrialSampler(const DecompositionModel& agent, const ExperimentDesign& design, std::uint64_t seed,
                 std::string subject, const PuzzleFixture* fixture)
        : agent_(agent), design_(design), rng_(seed), subject_(std::move(subject)), fixture_(fixture),
          clock_ms_(static_cast<double>(design.start_timestamp_ms))
    {
    }

    void emit(Phase phase, int stimulus, double duration, int block, int trial)
    {
        const auto xi = agent_.stimulus_index(stimulus);
        const auto ri = agent_.duration_index(duration);
        if (!xi || !ri) {
            throw ConfigError("agent does not cover stimulus " + std::to_string(stimulus) + " at duration " +
                              std::to_string(duration));
        }
        const ChoiceDistribution q = model_posterior(agent_, *xi, *ri);
        TrialRecord r;
        r.subject = subject_;
        r.phase = phase;
        r.stimulus = stimulus;
        r.duration = duration;
        r.choice = static_cast<int>(rng_.categorical(q.values()));
        r.success = fixture_ && count_satisfied(fixture_->at(stimulus).formula, Assignment(r.choice)) == kNumClauses;
        r.block = block;
        r.trial = trial;
        clock_ms_ += 1000.0 * rng_.uniform(design_.inter_trial_min, design_.inter_trial_max);
        r.timestamp_ms = static_cast<std::int64_t>(std::llround(clock_ms_));
        clock_ms_ += 1000.0 * duration;
        out_.push_back(std::move(r));
    }

    Rng& rng() { return rng_; }
    std::vector<TrialRecord> take() { return std::move(out_); }

private:
    const DecompositionModel& agent_;
    const ExperimentDesign& design_;
    Rng rng_;
    std::string subject_;
    const PuzzleFixture* fixture_;
    double clock_ms_;
    std::vector<TrialRecord> out_;
};

} // namespace

std::vector<TrialRecord> sample_trials(const DecompositionModel& agent, const ExperimentDesign& design,
                                       std::uint64_t seed, const std::string& subject, const PuzzleFixture* fixture)
{
    design.validate();
    agent.validate();
    TrialSampler s(agent, design, seed, subject, fixture);

    if (design.mode == ExperimentDesign::Mode::cells) {
        const std::vector<int> ids = design.all_stimuli();
        int block = 0;
        for (int id : ids) {
            for (double d : design.durations) {
                ++block;
                for (long k = 0; k < design.trials_per_cell; ++k) s.emit(Phase::test, id, d, block, static_cast<int>(k + 1));
            }
        }
        return s.take();
    }

    std::vector<double> weights;
    for (const auto& st : design.stimuli) weights.push_back(st.weight);
    int block = 0;
    for (int b = 0; b < design.training_blocks; ++b) {
        ++block;
        for (int k = 0; k < design.training_block_size; ++k) {
            const int id = design.stimuli[s.rng().categorical(weights)].id;
            s.emit(Phase::training, id, design.training_duration, block, k + 1);
        }
    }
    const int controls = design.control_stimulus ? design.controls_per_block : 0;
    for (int b = 0; b < design.test_blocks; ++b) {
        ++block;
        const int size = design.test_block_size + controls;
        // Control trials go to uniformly chosen slots of the block.
        std::vector<bool> is_control(static_cast<std::size_t>(size), false);
        for (int c = 0; c < controls; ++c) {
            std::size_t slot;
            do {
                slot = s.rng().below(static_cast<std::uint64_t>(size));
            } while (is_control[slot]);
            is_control[slot] = true;
        }
        for (int k = 0; k < size; ++k) {
            const int id = is_control[static_cast<std::size_t>(k)] ? *design.control_stimulus
                                                                   : design.stimuli[s.rng().categorical(weights)].id;
            const double d = design.durations[s.rng().categorical(design.duration_weights)];
            s.emit(Phase::test, id, d, block, k + 1);
        }
    }
    return s.take();
}

EmpiricalTable analytic_table(const DecompositionModel& agent, const ExperimentDesign& design)
{
    design.validate();
    agent.validate();
    const std::vector<int> ids = design.all_stimuli();
    std::vector<ChoiceDistribution> conds;
    for (int id : ids) {
        const auto xi = agent.stimulus_index(id);
        if (!xi) throw ConfigError("agent does not cover stimulus " + std::to_string(id));
        for (double d : design.durations) {
            const auto ri = agent.duration_index(d);
            if (!ri) throw ConfigError("agent does not cover duration " + std::to_string(d));
            conds.push_back(model_posterior(agent, *xi, *ri));
        }
    }
    return EmpiricalTable::from_conditionals(ids, design.durations, design.context(), std::move(conds));
}

} // namespace brt
