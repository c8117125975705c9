#include "brt/core_model.hpp"
#include "brt/error.hpp"
#include "brt/random.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace brt;

namespace {

const ChoiceDistribution half{std::vector<double>{0.5, 0.5}};
const UtilityTable one_zero{std::vector<double>{1.0, 0.0}};

GibbsContext random_context(Rng& rng, std::size_t n = 8)
{
    return GibbsContext(ChoiceDistribution(oracle::random_distribution(rng, n, 0.05)),
                        UtilityTable(oracle::random_utilities(rng, n)), rng.uniform(1e-3, 5.0));
}

} // namespace

TEST_CASE("distribution and context validation")
{
    CHECK_THROWS_AS(ChoiceDistribution(std::vector<double>{0.5, 0.6}), InvalidDistribution);
    CHECK_THROWS_AS(ChoiceDistribution(std::vector<double>{-0.1, 1.1}), InvalidDistribution);
    CHECK_NOTHROW(ChoiceDistribution(std::vector<double>{0.5, 0.5 + 5e-10}));
    CHECK_THROWS_AS(UtilityTable(std::vector<double>{std::numeric_limits<double>::infinity()}), DomainError);
    CHECK_THROWS_AS(GibbsContext(half, UtilityTable({1.0, 2.0, 3.0}), 1.0), DimensionError);
    CHECK_THROWS_AS(GibbsContext(half, one_zero, -1.0), DomainError);
    CHECK_THROWS_AS(ChoiceDistribution::from_weights({0.0, 0.0}), InvalidDistribution);
}

TEST_CASE("free energy")
{
    const GibbsContext ctx(half, one_zero, 1.0);
    CHECK(free_energy(ctx, half) == doctest::Approx(0.5).epsilon(1e-15));
    const double expected = std::log(0.5 * std::exp(1.0) + 0.5);
    CHECK(free_energy(ctx, gibbs_posterior(ctx)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.620114).epsilon(1e-6));

    const GibbsContext flat(half, UtilityTable({-1.7, -1.7}), 3.3);
    CHECK(free_energy(flat, half) == doctest::Approx(-1.7).epsilon(1e-15));

    CHECK_THROWS_AS(free_energy(ctx, ChoiceDistribution::uniform(3)), DimensionError);

    const GibbsContext zero(half, one_zero, 0.0);
    CHECK(free_energy(zero, half) == doctest::Approx(0.5));
    CHECK(std::isinf(free_energy(zero, ChoiceDistribution({0.4, 0.6}))));

    // Mass where the prior has none costs +inf KL.
    const GibbsContext sparse(ChoiceDistribution({1.0, 0.0}), one_zero, 1.0);
    CHECK(free_energy(sparse, half) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("gibbs posterior")
{
    const auto p0 = gibbs_posterior(GibbsContext(half, one_zero, 0.0));
    CHECK(p0 == half);
    const auto p1 = gibbs_posterior(GibbsContext(half, one_zero, 1.0));
    CHECK(p1[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(p1[1] == doctest::Approx(0.268941).epsilon(1e-6));
    const auto p1000 = gibbs_posterior(GibbsContext(half, one_zero, 1000.0));
    CHECK(p1000[0] > 1.0 - 1e-6);

    // Zero-prior entries stay zero even with the largest utility.
    const auto pz = gibbs_posterior(GibbsContext(ChoiceDistribution({0.0, 1.0}), one_zero, 5.0));
    CHECK(pz[0] == 0.0);
    CHECK(pz[1] == 1.0);

    // Large beta*U spans stay finite thanks to the max-shift.
    const auto big = gibbs_posterior(GibbsContext(half, UtilityTable({700.0, 0.0}), 1.0));
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    const auto huge = gibbs_posterior(GibbsContext(half, UtilityTable({700.0, 690.0}), 10.0));
    CHECK(huge[0] + huge[1] == doctest::Approx(1.0));
}

TEST_CASE("gibbs posterior agrees with the long-double oracle")
{
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto ctx = random_context(rng);
        const auto q = gibbs_posterior(ctx);
        const auto ref = oracle::posterior({ctx.prior().values().begin(), ctx.prior().values().end()},
                                           {ctx.utility().values().begin(), ctx.utility().values().end()}, ctx.beta());
        for (std::size_t y = 0; y < q.size(); ++y) CHECK(std::abs(q[y] - ref[y]) < 1e-14);
    }
}

TEST_CASE("argmax mass is nondecreasing in beta")
{
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
        const auto prior = ChoiceDistribution(oracle::random_distribution(rng, 8, 0.05));
        auto u = oracle::random_utilities(rng, 8);
        u[3] = u[6] = 3.0; // tied maximizers
        double last = 0.0;
        for (double beta = 0.0; beta <= 100.0; beta += 0.5) {
            const auto q = gibbs_posterior(GibbsContext(prior, UtilityTable(u), beta));
            const double mass = q[3] + q[6];
            CHECK(mass >= last - 1e-15);
            last = mass;
        }
    }
}

TEST_CASE("certainty equivalent")
{
    CHECK(certainty_equivalent(GibbsContext(half, UtilityTable({2.5, 2.5}), 1.0)) ==
          doctest::Approx(2.5).epsilon(1e-15));
    CHECK(certainty_equivalent(GibbsContext(half, one_zero, 1.0)) ==
          doctest::Approx(std::log((std::exp(1.0) + 1.0) / 2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(certainty_equivalent(GibbsContext(half, one_zero, 0.0)), DomainError);
    CHECK(expected_utility_limit(half, one_zero) == 0.5);

    // Small beta approaches the expected-utility limit.
    CHECK(certainty_equivalent(GibbsContext(half, one_zero, 1e-7)) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("utility normalization")
{
    const auto n = normalize_utilities(GibbsContext(half, one_zero, 1.0));
    CHECK(n[0] == doctest::Approx(0.379886).epsilon(1e-5));
    CHECK(n[1] == doctest::Approx(-0.620114).epsilon(1e-5));
    const auto c = normalize_utilities(GibbsContext(half, UtilityTable({4.0, 4.0}), 2.0));
    CHECK(std::abs(c[0]) < 1e-15);
    CHECK(std::abs(c[1]) < 1e-15);
    CHECK_THROWS_AS(normalize_utilities(GibbsContext(half, one_zero, 0.0)), GaugeError);

    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto ctx = random_context(rng);
        const auto once = normalize_utilities(ctx);
        CHECK(std::abs(certainty_equivalent(GibbsContext(ctx.prior(), once, ctx.beta()))) < 1e-12);
        const auto twice = normalize_utilities(GibbsContext(ctx.prior(), once, ctx.beta()));
        for (std::size_t y = 0; y < once.size(); ++y) CHECK(std::abs(once[y] - twice[y]) < 1e-12);
    }
}

TEST_CASE("regret identity")
{
    for (double r : regret_identity_residual(GibbsContext(half, one_zero, 1.0))) CHECK(std::abs(r) < 1e-10);
    for (double r : regret_identity_residual(GibbsContext(ChoiceDistribution::uniform(4),
                                                          UtilityTable({0.3, 0.3, 0.3, 0.3}), 2.0))) {
        CHECK(std::abs(r) < 1e-10);
    }
    CHECK_THROWS_AS(regret_identity_residual(GibbsContext(ChoiceDistribution({1.0, 0.0}), one_zero, 1.0)),
                    DomainError);
    CHECK_THROWS_AS(regret_identity_residual(GibbsContext(half, one_zero, 0.0)), DomainError);

    Rng rng(14);
    for (int i = 0; i < 100; ++i) {
        for (double r : regret_identity_residual(random_context(rng))) CHECK(std::abs(r) < 1e-10);
    }
}

TEST_CASE("bayes rule route agrees with the gibbs posterior")
{
    const auto b = bayes_posterior(half, one_zero, 1.0);
    CHECK(b[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(bayes_posterior(half, one_zero, 0.0) == half);

    Rng rng(15);
    for (int i = 0; i < 100; ++i) {
        const auto ctx = random_context(rng);
        const auto g = gibbs_posterior(ctx);
        const auto bp = bayes_posterior(ctx.prior(), ctx.utility(), ctx.beta());
        for (std::size_t y = 0; y < g.size(); ++y) CHECK(std::abs(g[y] - bp[y]) < 1e-12);
    }
}

TEST_CASE("the gibbs posterior maximizes free energy")
{
    Rng rng(16);
    for (int i = 0; i < 30; ++i) {
        const auto ctx = random_context(rng);
        const double best = free_energy(ctx, gibbs_posterior(ctx));
        CHECK(std::abs(best - certainty_equivalent(ctx)) < 1e-10);
        for (int k = 0; k < 100; ++k) {
            const ChoiceDistribution q(oracle::random_distribution(rng, 8));
            CHECK(free_energy(ctx, q) <= best + 1e-12);
        }
    }
}

TEST_CASE("kl divergence")
{
    CHECK(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) == 0.0);
    CHECK(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) ==
          doctest::Approx(std::log(2.0)));
    CHECK(std::isinf(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0})));
    CHECK(nats_to_bits(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-15));
}
