#pragma once

// Bounded-rational choice: free energy, Gibbs posterior, certainty-equivalent,
// regret identity and utility normalization over finite choice sets.
//
// All math uses natural logarithms. Conversion to bits happens only where a
// value is reported (see nats_to_bits).

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace brt {

inline constexpr double kDistributionTolerance = 1e-9;
// Probabilities below this are treated as zero inside KL sums.
inline constexpr double kProbabilityFloor = 1e-300;

inline double nats_to_bits(double nats) { return nats / std::numbers::ln2; }

// A probability vector over choice indices 0..n-1.
class ChoiceDistribution {
public:
    // Throws InvalidDistribution on negative/non-finite entries or a sum that
    // is off by more than kDistributionTolerance.
    explicit ChoiceDistribution(std::vector<double> probs);

    static ChoiceDistribution uniform(std::size_t n);
    // Normalizes nonnegative weights. Throws if all weights are zero.
    static ChoiceDistribution from_weights(std::vector<double> weights);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::span<const double> values() const noexcept { return probs_; }

    friend bool operator==(const ChoiceDistribution&, const ChoiceDistribution&) = default;

private:
    std::vector<double> probs_;
};

class UtilityTable {
public:
    // Throws DomainError on non-finite entries.
    explicit UtilityTable(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const UtilityTable&, const UtilityTable&) = default;

private:
    std::vector<double> values_;
};

// Prior, utility and inverse temperature entering the Gibbs posterior.
// The partition function is always recomputed, never cached.
class GibbsContext {
public:
    // Throws DimensionError on length mismatch, DomainError on beta < 0 or
    // non-finite beta.
    GibbsContext(ChoiceDistribution prior, UtilityTable utility, double beta);

    const ChoiceDistribution& prior() const noexcept { return prior_; }
    const UtilityTable& utility() const noexcept { return utility_; }
    double beta() const noexcept { return beta_; }
    std::size_t size() const noexcept { return prior_.size(); }

private:
    ChoiceDistribution prior_;
    UtilityTable utility_;
    double beta_;
};

// KL(q || p) in nats. +inf when q puts mass where p has none.
double kl_divergence(std::span<const double> q, std::span<const double> p);

// Expected utility minus (1/beta) KL(q || prior). For beta = 0 the result is
// -inf unless q equals the prior entry for entry, in which case it is the
// expected utility under the prior.
double free_energy(const GibbsContext& ctx, const ChoiceDistribution& q);

// prior(y) exp(beta U(y)) / Z, evaluated with a max-shift. beta = 0 returns
// the prior. Zero-prior entries stay zero.
ChoiceDistribution gibbs_posterior(const GibbsContext& ctx);

// Unchecked kernel behind gibbs_posterior, for hot loops. All spans have the
// same length; the prior must have positive mass.
void gibbs_posterior_into(std::span<const double> prior, std::span<const double> utility, double beta,
                          std::span<double> out);

// Log-partition log sum_y prior(y) exp(beta U(y)), max-shifted. Unchecked.
double log_partition(std::span<const double> prior, std::span<const double> utility, double beta);

// (1/beta) log sum_y prior(y) exp(beta U(y)). Throws DomainError for beta = 0;
// use expected_utility_limit for that endpoint.
double certainty_equivalent(const GibbsContext& ctx);

// The beta -> 0 limit of the certainty-equivalent: sum_y prior(y) U(y).
double expected_utility_limit(const ChoiceDistribution& prior, const UtilityTable& utility);

// U(y) - certainty_equivalent(ctx). Throws GaugeError for beta = 0.
UtilityTable normalize_utilities(const GibbsContext& ctx);

// Per-choice residual of  log(P(y|x)/P(y)) = -beta (U* - U(y)).
// Every entry is zero up to rounding; the function exists as a self-check.
// Throws DomainError for beta = 0 or a zero prior entry.
std::vector<double> regret_identity_residual(const GibbsContext& ctx);

// Posterior formed explicitly as prior x likelihood / evidence, with
// likelihood L(y) proportional to exp(beta U(y)). Same result as
// gibbs_posterior by a different route.
ChoiceDistribution bayes_posterior(const ChoiceDistribution& prior, const UtilityTable& utility,
                                   double beta);

} // namespace brt
