#include "brt/error.hpp"
#include "brt/simulator.hpp"
#include "support/agents.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace brt;

namespace {

// Flat model over the given grid with utilities 1 at each solution.
DecompositionModel peaked_agent(const PuzzleFixture& fx, std::vector<double> durations, double beta)
{
    DecompositionModel m;
    m.prior = ChoiceDistribution::uniform(8);
    m.durations = durations;
    m.betas.assign(durations.size(), beta);
    m.beta0 = beta > 0 ? beta : 1.0;
    for (const auto& p : fx.puzzles) {
        m.stimuli.push_back(p.formula.id);
        std::vector<double> u(8, 0.0);
        u[static_cast<std::size_t>(p.solution.index())] = 1.0;
        m.utilities.push_back(u);
    }
    return m;
}

// Per-cell choice frequencies of test trials.
std::map<std::pair<int, double>, std::vector<double>> frequencies(const std::vector<TrialRecord>& trials)
{
    std::map<std::pair<int, double>, std::vector<double>> f;
    std::map<std::pair<int, double>, double> n;
    for (const auto& t : trials) {
        auto& v = f[{t.stimulus, t.duration}];
        v.resize(8, 0.0);
        v[static_cast<std::size_t>(t.choice)] += 1.0;
        n[{t.stimulus, t.duration}] += 1.0;
    }
    for (auto& [k, v] : f) {
        for (double& c : v) c /= n[k];
    }
    return f;
}

} // namespace

TEST_CASE("default blocked design")
{
    const auto fx = generate_stimulus_set(5, 1);
    const auto d = default_design(fx);
    CHECK(d.stimuli.size() == 4);
    CHECK(d.control_stimulus == fx.control_id());
    CHECK(d.training_trials() == 90);
    CHECK(d.test_trials() == 285);
    CHECK(declared_durations(d) == std::vector<double>{1.25, 2.5, 5.0, 10.0});

    const auto ctx = d.context();
    const auto ids = d.all_stimuli();
    REQUIRE(ctx.size() == ids.size() * 3);
    double total = 0.0, control = 0.0;
    for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t r = 0; r < 3; ++r) {
            total += ctx[x * 3 + r];
            if (ids[x] == *d.control_stimulus) control += ctx[x * 3 + r];
        }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(control == doctest::Approx(1.0 / 19.0).epsilon(1e-15));

    const auto agent = default_agent(fx, d, 3);
    const auto trials = sample_trials(agent, d, 4, "s07", &fx);
    REQUIRE(trials.size() == 375);
    std::map<int, int> block_sizes, block_controls;
    int training = 0;
    for (const auto& t : trials) {
        CHECK(t.subject == "s07");
        if (t.phase == Phase::training) {
            ++training;
            CHECK(t.duration == 10.0);
            CHECK(t.stimulus != *d.control_stimulus);
            continue;
        }
        CHECK((t.duration == 1.25 || t.duration == 2.5 || t.duration == 5.0));
        ++block_sizes[t.block];
        block_controls[t.block] += t.stimulus == *d.control_stimulus;
    }
    CHECK(training == 90);
    CHECK(block_sizes.size() == 15);
    for (const auto& [b, n] : block_sizes) {
        CHECK(n == 19);
        CHECK(block_controls[b] == 1);
    }
    for (std::size_t i = 1; i < trials.size(); ++i) CHECK(trials[i].timestamp_ms > trials[i - 1].timestamp_ms);
}

TEST_CASE("sampling is deterministic per seed")
{
    const auto fx = generate_stimulus_set(5, 2);
    const auto d = default_design(fx);
    const auto agent = default_agent(fx, d, 1);
    CHECK(sample_trials(agent, d, 9, "s01", &fx) == sample_trials(agent, d, 9, "s01", &fx));
    CHECK_FALSE(sample_trials(agent, d, 9, "s01", &fx) == sample_trials(agent, d, 10, "s01", &fx));
    CHECK(model_to_json(default_agent(fx, d, 5)) == model_to_json(default_agent(fx, d, 5)));
}

TEST_CASE("near-deterministic agent always succeeds")
{
    const auto fx = generate_stimulus_set(5, 3);
    const auto d = default_design(fx);
    const auto agent = peaked_agent(fx, declared_durations(d), 1e6);
    for (const auto& t : sample_trials(agent, d, 1, "s01", &fx)) CHECK(t.success);
}

TEST_CASE("beta zero reproduces the prior per cell")
{
    const auto fx = generate_stimulus_set(3, 4);
    auto d = agents::cells_design(0, {1.25, 5.0}, 100000);
    for (const auto& p : fx.puzzles) d.stimuli.push_back({p.formula.id, 1.0});
    auto agent = peaked_agent(fx, d.durations, 0.0);
    agent.prior = ChoiceDistribution({0.3, 0.05, 0.05, 0.1, 0.2, 0.1, 0.1, 0.1});
    const auto f = frequencies(sample_trials(agent, d, 8));
    CHECK(f.size() == 6);
    for (const auto& [cell, v] : f) {
        for (std::size_t y = 0; y < 8; ++y) CHECK(std::abs(v[y] - agent.prior[y]) < 0.01);
    }
}

TEST_CASE("frequency error shrinks at the Monte-Carlo rate")
{
    const auto c = agents::recovery_case(2, 2, {1.0, 2.0});
    std::vector<double> rms;
    for (long n : {100L, 1000L, 10000L}) {
        auto d = c.design;
        d.trials_per_cell = n;
        double sq = 0.0;
        int terms = 0;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto f = frequencies(sample_trials(c.agent, d, seed));
            for (std::size_t x = 0; x < 2; ++x) {
                for (std::size_t r = 0; r < 2; ++r) {
                    const auto q = model_posterior(c.agent, x, r);
                    const auto& v = f.at({c.agent.stimuli[x], c.agent.durations[r]});
                    for (std::size_t y = 0; y < 8; ++y) {
                        sq += (v[y] - q[y]) * (v[y] - q[y]);
                        ++terms;
                    }
                }
            }
        }
        rms.push_back(std::sqrt(sq / terms));
    }
    const double root10 = std::sqrt(10.0);
    MESSAGE("rms error ratios " << rms[0] / rms[1] << ", " << rms[1] / rms[2]);
    for (int i = 0; i < 2; ++i) {
        CHECK(rms[i] / rms[i + 1] > root10 / 2);
        CHECK(rms[i] / rms[i + 1] < root10 * 2);
    }
}

TEST_CASE("generated records pass the trial schema")
{
    const auto fx = generate_stimulus_set(5, 5);
    const auto d = default_design(fx);
    const auto trials = sample_trials(default_agent(fx, d, 2), d, 3, "s02", &fx);
    std::stringstream ss;
    write_trials(ss, declared_durations(d), trials);
    const auto log = load_trials(ss, &fx);
    CHECK(log.records == trials);
    CHECK(log.warnings.empty());
}

TEST_CASE("analytic table")
{
    const auto c = agents::recovery_case(7, 3, {1.0, 2.2, 4.5});
    const auto t = analytic_table(c.agent, c.design);
    const auto ctx = c.design.context();
    for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t r = 0; r < 3; ++r) {
            const auto q = gibbs_posterior(
                GibbsContext(c.agent.prior, UtilityTable(c.agent.utilities[x]), c.agent.betas[r]));
            for (std::size_t y = 0; y < 8; ++y) CHECK(std::abs(t.conditional(x, r)[y] - q[y]) < 1e-15);
            CHECK(std::abs(t.context(x, r) - ctx[x * 3 + r]) < 1e-15);
        }
    }
    // The agent's prior is the marginal of its own choices.
    for (std::size_t y = 0; y < 8; ++y) CHECK(std::abs(t.prior()[y] - c.agent.prior[y]) < 1e-12);
}

TEST_CASE("marginal matching offsets")
{
    Rng rng(41);
    for (int i = 0; i < 10; ++i) {
        std::vector<std::vector<double>> u(3);
        for (auto& row : u) row = oracle::random_utilities(rng, 8);
        const std::vector<double> betas{0.8, 2.0};
        const auto ctx = oracle::random_distribution(rng, 6);
        const ChoiceDistribution target(oracle::random_distribution(rng, 8, 0.2));
        const auto d = marginal_matching_offsets(u, betas, ctx, target);
        std::vector<double> marginal(8, 0.0);
        for (std::size_t x = 0; x < 3; ++x) {
            std::vector<double> shifted(8);
            for (std::size_t y = 0; y < 8; ++y) shifted[y] = u[x][y] + d[y];
            for (std::size_t r = 0; r < 2; ++r) {
                const auto q = oracle::posterior(std::vector<double>(target.values().begin(), target.values().end()),
                                                 shifted, betas[r]);
                for (std::size_t y = 0; y < 8; ++y) marginal[y] += ctx[x * 2 + r] * q[y];
            }
        }
        for (std::size_t y = 0; y < 8; ++y) CHECK(std::abs(marginal[y] - target[y]) < 1e-10);
    }
}

TEST_CASE("design files")
{
    const auto fx = generate_stimulus_set(5, 6);
    auto d = default_design(fx);
    CHECK(design_from_json(design_to_json(d)) == d);
    d.mode = ExperimentDesign::Mode::cells;
    d.trials_per_cell = 12;
    CHECK(design_from_json(design_to_json(d)) == d);

    auto expect_field = [](const std::string& text, const std::string& field) {
        try {
            design_from_json(text);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    expect_field("{", "JSON");
    expect_field(R"({"schema":"brt.design/9"})", "schema");
    expect_field(R"({"schema":"brt.design/1","mode":"blocks","stimuli":[],"durations":[1.0]})", "stimuli");
    expect_field(R"({"schema":"brt.design/1","mode":"blocks","stimuli":[{"id":1,"weight":1}],"durations":[-1.0]})",
                 "durations");
    expect_field(R"({"schema":"brt.design/1","mode":"cells","stimuli":[{"id":1,"weight":1}],"durations":[1.0],"trials_per_cell":0})",
                 "trials_per_cell");
}

TEST_CASE("agents must cover the design")
{
    const auto fx = generate_stimulus_set(5, 7);
    const auto d = default_design(fx);
    auto agent = default_agent(fx, d, 1);
    agent.durations.pop_back(); // drop the training duration
    agent.betas.pop_back();
    CHECK_THROWS_AS(sample_trials(agent, d, 1), ConfigError);
}
