#include "brt/empirical.hpp"
#include "brt/error.hpp"
#include "brt/random.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace brt;

namespace {

const std::vector<int> kX{1, 2, 3, 4, 5};
const std::vector<double> kR{1.25, 2.5, 5.0};

TrialRecord record(int stimulus, double duration, int choice, Phase phase = Phase::test)
{
    TrialRecord r;
    r.subject = "s01";
    r.phase = phase;
    r.stimulus = stimulus;
    r.duration = duration;
    r.choice = choice;
    r.block = 1;
    r.trial = 1;
    r.timestamp_ms = 1700000000000;
    return r;
}

std::string header()
{
    return trial_header_line(kR) + "\n";
}

} // namespace

TEST_CASE("loading trial streams")
{
    std::istringstream empty("");
    CHECK(load_trials(empty).records.empty());

    const TrialRecord r = record(2, 2.5, 5);
    std::istringstream one(header() + trial_record_line(r) + "\n");
    const TrialLog log = load_trials(one);
    REQUIRE(log.records.size() == 1);
    CHECK(log.records.front() == r);
    CHECK(log.durations == kR);

    std::istringstream bad_choice(
        header() +
        R"({"subject":"s01","phase":"test","stimulus":1,"duration":1.25,"choice":9,"success":false,"block":1,"trial":1,"timestamp":0})" +
        "\n");
    try {
        load_trials(bad_choice);
        FAIL("expected a format error");
    } catch (const TrialFormatError& e) {
        REQUIRE(e.errors().size() == 1);
        CHECK(e.errors()[0].line == 2);
        CHECK(e.errors()[0].field == "choice");
        CHECK(std::string(e.what()).find("choice") != std::string::npos);
    }
}

TEST_CASE("every bad line is reported")
{
    std::string text = header();
    text += "garbage\n";
    text += R"({"subject":"s01","phase":"test","stimulus":1,"duration":3.0,"choice":1,"success":false,"block":1,"trial":1,"timestamp":0})";
    text += "\n";
    text += R"({"subject":"s01","phase":"later","stimulus":1,"duration":1.25,"choice":1,"success":false,"block":1,"trial":2,"timestamp":0})";
    text += "\n";
    text += trial_record_line(record(1, 1.25, 0)) + "\n";
    std::istringstream in(text);
    try {
        load_trials(in);
        FAIL("expected a format error");
    } catch (const TrialFormatError& e) {
        REQUIRE(e.errors().size() == 3);
        CHECK(e.errors()[0].line == 2);
        CHECK(e.errors()[1].line == 3);
        CHECK(e.errors()[1].field == "duration");
        CHECK(e.errors()[2].line == 4);
        CHECK(e.errors()[2].field == "phase");
    }

    std::istringstream no_header(trial_record_line(record(1, 1.25, 0)) + "\n");
    CHECK_THROWS_AS(load_trials(no_header), TrialFormatError);
}

TEST_CASE("success flags are recomputed against the fixture")
{
    const PuzzleFixture fx = generate_stimulus_set(5, 1);
    const auto& p = fx.puzzles.front();
    TrialRecord r = record(p.formula.id, 1.25, p.solution.index());
    r.success = false; // wrong on purpose
    std::istringstream in(header() + trial_record_line(r) + "\n");
    const TrialLog log = load_trials(in, &fx);
    REQUIRE(log.records.size() == 1);
    CHECK(log.records[0].success);
    CHECK(log.warnings.size() == 1);

    std::istringstream unknown(header() + trial_record_line(record(77, 1.25, 0)) + "\n");
    CHECK_THROWS_AS(load_trials(unknown, &fx), TrialFormatError);
}

TEST_CASE("trial files round trip")
{
    std::vector<TrialRecord> recs;
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        TrialRecord r = record(kX[rng.below(5)], kR[rng.below(3)], static_cast<int>(rng.below(8)),
                               rng.below(2) ? Phase::test : Phase::training);
        r.trial = i;
        r.timestamp_ms += i * 1234;
        recs.push_back(r);
    }
    std::stringstream ss;
    write_trials(ss, kR, recs);
    const TrialLog back = load_trials(ss);
    CHECK(back.records == recs);
}

TEST_CASE("smoothing of an empty grid")
{
    const auto t = build_table({}, PhaseFilter::test, kX, kR);
    for (std::size_t x = 0; x < 5; ++x) {
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t y = 0; y < 8; ++y) CHECK(t.joint(x, r, y) == doctest::Approx(1.0 / 120).epsilon(1e-15));
            for (double p : t.conditional(x, r).values()) CHECK(p == doctest::Approx(0.125));
        }
    }
    for (double p : t.prior().values()) CHECK(p == doctest::Approx(0.125));
}

TEST_CASE("a single trial")
{
    const std::vector<TrialRecord> one{record(1, 1.25, 0)};
    const auto t = build_table(one, PhaseFilter::test, kX, kR);
    CHECK(t.joint(0, 0, 0) == doctest::Approx(2.0 / 121).epsilon(1e-15));
    CHECK(t.joint(0, 0, 1) == doctest::Approx(1.0 / 121).epsilon(1e-15));
    CHECK(t.joint(4, 2, 7) == doctest::Approx(1.0 / 121).epsilon(1e-15));
    const auto& c = conditional(t, 1, 1.25);
    CHECK(c[0] == doctest::Approx(2.0 / 9).epsilon(1e-15));
    for (std::size_t y = 1; y < 8; ++y) CHECK(c[y] == doctest::Approx(1.0 / 9).epsilon(1e-15));
    CHECK_THROWS_AS(conditional(t, 99, 1.25), ConfigError);
    CHECK_THROWS_AS(conditional(t, 1, 9.0), ConfigError);
    CHECK(t.total_count() == 1);
}

TEST_CASE("phase filtering and grid membership")
{
    std::vector<TrialRecord> recs{record(1, 1.25, 3), record(2, 2.5, 4)};
    const auto base = build_table(recs, PhaseFilter::test, kX, kR);
    recs.push_back(record(1, 1.25, 3, Phase::training));
    recs.push_back(record(3, 10.0, 1, Phase::training));
    const auto after = build_table(recs, PhaseFilter::test, kX, kR);
    CHECK(after.counts() == base.counts());
    const auto all = build_table(recs, PhaseFilter::all, kX, kR);
    CHECK(all.total_count() == 3); // the 10 s trial is off the grid
    const auto training = build_table(recs, PhaseFilter::training, kX, kR);
    CHECK(training.total_count() == 1);

    recs.push_back(record(9, 1.25, 0)); // stimulus outside X
    CHECK(build_table(recs, PhaseFilter::test, kX, kR).counts() == base.counts());
    CHECK_THROWS_AS(build_table(recs, PhaseFilter::test, {}, kR), ConfigError);
}

TEST_CASE("adding one trial changes exactly one count")
{
    Rng rng(5);
    std::vector<TrialRecord> recs;
    for (int i = 0; i < 200; ++i) recs.push_back(record(kX[rng.below(5)], kR[rng.below(3)], static_cast<int>(rng.below(8))));
    const auto before = build_table(recs, PhaseFilter::test, kX, kR);
    recs.push_back(record(4, 5.0, 6));
    const auto after = build_table(recs, PhaseFilter::test, kX, kR);
    int changed = 0;
    for (std::size_t i = 0; i < before.counts().size(); ++i) {
        const auto d = after.counts()[i] - before.counts()[i];
        CHECK((d == 0 || d == 1));
        changed += d != 0;
    }
    CHECK(changed == 1);
    CHECK(after.count(3, 2, 6) == before.count(3, 2, 6) + 1);
}

TEST_CASE("marginals match brute-force sums")
{
    Rng rng(6);
    for (int k = 0; k < 20; ++k) {
        const auto t = oracle::random_table(rng, 3, 2, 4);
        long double total = 0;
        std::vector<long double> py(4, 0), px(3, 0);
        for (std::size_t x = 0; x < 3; ++x) {
            for (std::size_t r = 0; r < 2; ++r) {
                long double pxr = 0;
                for (std::size_t y = 0; y < 4; ++y) {
                    const long double j = (t.count(x, r, y) + 1.0L);
                    total += j;
                    py[y] += j;
                    px[x] += j;
                    pxr += j;
                }
                for (std::size_t y = 0; y < 4; ++y) {
                    CHECK(std::abs(t.conditional(x, r)[y] - static_cast<double>((t.count(x, r, y) + 1.0L) / pxr)) <
                          1e-12);
                }
            }
        }
        double csum = 0;
        for (std::size_t y = 0; y < 4; ++y) {
            CHECK(std::abs(t.prior()[y] - static_cast<double>(py[y] / total)) < 1e-12);
            csum += t.conditional(1, 1)[y];
        }
        CHECK(std::abs(csum - 1.0) < 1e-12);
        for (std::size_t x = 0; x < 3; ++x) {
            CHECK(std::abs(t.stimulus_marginal()[x] - static_cast<double>(px[x] / total)) < 1e-12);
        }
        double jsum = 0;
        for (double j : t.joint_values()) jsum += j;
        CHECK(std::abs(jsum - 1.0) < 1e-9);
    }
}

TEST_CASE("exhaustive check on a 2x2x2 grid")
{
    // counts (x,r,y) -> smoothed joint by hand: total = sum(c) + 8
    const std::vector<std::int64_t> counts{3, 0, 1, 1, 0, 2, 5, 0};
    const auto t = EmpiricalTable::from_counts({1, 2}, {1.0, 2.0}, 2, counts);
    const double total = 12.0 + 8.0;
    for (std::size_t i = 0; i < 8; ++i) {
        const std::size_t x = i / 4, r = (i / 2) % 2, y = i % 2;
        CHECK(t.joint(x, r, y) == doctest::Approx((counts[i] + 1) / total).epsilon(1e-15));
    }
    CHECK(t.conditional(0, 0)[0] == doctest::Approx(4.0 / 5.0));
    CHECK(t.conditional(1, 1)[0] == doctest::Approx(6.0 / 7.0));
    CHECK(t.prior()[0] == doctest::Approx((4 + 2 + 1 + 6) / total));
    CHECK(t.context(1, 0) == doctest::Approx(4.0 / total));
}

TEST_CASE("concentrated joint gives a concentrated prior")
{
    const auto t = EmpiricalTable::from_counts({1}, {1.0}, 4, {0, 0, 100000, 0});
    CHECK(t.prior()[2] > 0.9999);
}

TEST_CASE("entropy in bits")
{
    CHECK(entropy_bits(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(entropy_bits(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
    CHECK(entropy_bits(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("table serialization round-trips bit-exactly")
{
    Rng rng(7);
    const auto t = oracle::random_table(rng, 5, 3, 8, 1000);
    const auto text = table_to_json(t);
    const auto back = table_from_json(text);
    CHECK(back == t);
    CHECK(table_to_json(back) == text);

    std::vector<ChoiceDistribution> conds;
    for (int i = 0; i < 2; ++i) conds.emplace_back(oracle::random_distribution(rng, 3));
    const auto analytic = EmpiricalTable::from_conditionals({1, 2}, {1.0}, {0.3, 0.7}, conds);
    CHECK(table_from_json(table_to_json(analytic)) == analytic);
    CHECK_FALSE(analytic.smoothed());
    CHECK_THROWS_AS(table_from_json("{}"), ValidationError);
}
