#include "brt/core_model.hpp"

#include "brt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace brt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive_beta(const GibbsContext& ctx, const char* op)
{
    if (!(ctx.beta() > 0.0)) {
        throw DomainError(std::string(op) + ": requires beta > 0");
    }
}

} // namespace

ChoiceDistribution::ChoiceDistribution(std::vector<double> probs) : probs_(std::move(probs))
{
    if (probs_.empty()) throw InvalidDistribution("distribution is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double p = probs_[i];
        if (!std::isfinite(p) || p < 0.0) {
            throw InvalidDistribution("entry " + std::to_string(i) + " is not a probability");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance) {
        throw InvalidDistribution("entries sum to " + std::to_string(sum));
    }
}

ChoiceDistribution ChoiceDistribution::uniform(std::size_t n)
{
    if (n == 0) throw InvalidDistribution("distribution is empty");
    return ChoiceDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ChoiceDistribution ChoiceDistribution::from_weights(std::vector<double> weights)
{
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw InvalidDistribution("negative or non-finite weight");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidDistribution("all weights are zero");
    for (double& w : weights) w /= total;
    return ChoiceDistribution(std::move(weights));
}

UtilityTable::UtilityTable(std::vector<double> values) : values_(std::move(values))
{
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DomainError("utility " + std::to_string(i) + " is not finite");
        }
    }
}

GibbsContext::GibbsContext(ChoiceDistribution prior, UtilityTable utility, double beta)
    : prior_(std::move(prior)), utility_(std::move(utility)), beta_(beta)
{
    if (prior_.size() != utility_.size()) {
        throw DimensionError("prior has " + std::to_string(prior_.size()) + " entries, utility has " +
                             std::to_string(utility_.size()));
    }
    if (!std::isfinite(beta_) || beta_ < 0.0) {
        throw DomainError("inverse temperature must be finite and nonnegative");
    }
}

double kl_divergence(std::span<const double> q, std::span<const double> p)
{
    if (q.size() != p.size()) throw DimensionError("kl_divergence: length mismatch");
    double kl = 0.0;
    for (std::size_t y = 0; y < q.size(); ++y) {
        if (q[y] < kProbabilityFloor) continue;
        if (p[y] < kProbabilityFloor) return std::numeric_limits<double>::infinity();
        kl += q[y] * std::log(q[y] / p[y]);
    }
    return kl;
}

double free_energy(const GibbsContext& ctx, const ChoiceDistribution& q)
{
    if (q.size() != ctx.size()) {
        throw DimensionError("free_energy: q has " + std::to_string(q.size()) + " entries, expected " +
                             std::to_string(ctx.size()));
    }
    double eu = 0.0;
    for (std::size_t y = 0; y < q.size(); ++y) eu += q[y] * ctx.utility()[y];

    if (ctx.beta() == 0.0) {
        return q == ctx.prior() ? eu : kNegInf;
    }
    const double kl = kl_divergence(q.values(), ctx.prior().values());
    if (std::isinf(kl)) return kNegInf;
    return eu - kl / ctx.beta();
}

void gibbs_posterior_into(std::span<const double> prior, std::span<const double> utility, double beta,
                          std::span<double> out)
{
    const std::size_t n = prior.size();
    if (beta == 0.0) {
        std::copy(prior.begin(), prior.end(), out.begin());
        return;
    }
    double shift = kNegInf;
    for (std::size_t y = 0; y < n; ++y) {
        if (prior[y] > 0.0) shift = std::max(shift, beta * utility[y]);
    }
    double z = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
        out[y] = prior[y] > 0.0 ? prior[y] * std::exp(beta * utility[y] - shift) : 0.0;
        z += out[y];
    }
    for (std::size_t y = 0; y < n; ++y) out[y] /= z;
}

double log_partition(std::span<const double> prior, std::span<const double> utility, double beta)
{
    double shift = kNegInf;
    for (std::size_t y = 0; y < prior.size(); ++y) {
        if (prior[y] > 0.0) shift = std::max(shift, beta * utility[y]);
    }
    double z = 0.0;
    for (std::size_t y = 0; y < prior.size(); ++y) {
        if (prior[y] > 0.0) z += prior[y] * std::exp(beta * utility[y] - shift);
    }
    return shift + std::log(z);
}

ChoiceDistribution gibbs_posterior(const GibbsContext& ctx)
{
    std::vector<double> w(ctx.size());
    gibbs_posterior_into(ctx.prior().values(), ctx.utility().values(), ctx.beta(), w);
    return ChoiceDistribution(std::move(w));
}

double certainty_equivalent(const GibbsContext& ctx)
{
    require_positive_beta(ctx, "certainty_equivalent");
    return log_partition(ctx.prior().values(), ctx.utility().values(), ctx.beta()) / ctx.beta();
}

double expected_utility_limit(const ChoiceDistribution& prior, const UtilityTable& utility)
{
    if (prior.size() != utility.size()) throw DimensionError("expected_utility_limit: length mismatch");
    double eu = 0.0;
    for (std::size_t y = 0; y < prior.size(); ++y) eu += prior[y] * utility[y];
    return eu;
}

UtilityTable normalize_utilities(const GibbsContext& ctx)
{
    if (!(ctx.beta() > 0.0)) throw GaugeError("normalize_utilities: gauge undefined at beta = 0");
    const double ce = certainty_equivalent(ctx);
    std::vector<double> out(ctx.utility().values().begin(), ctx.utility().values().end());
    for (double& u : out) u -= ce;
    return UtilityTable(std::move(out));
}

std::vector<double> regret_identity_residual(const GibbsContext& ctx)
{
    require_positive_beta(ctx, "regret_identity_residual");
    for (std::size_t y = 0; y < ctx.size(); ++y) {
        if (!(ctx.prior()[y] > 0.0)) {
            throw DomainError("regret_identity_residual: prior entry " + std::to_string(y) + " is zero");
        }
    }
    const ChoiceDistribution post = gibbs_posterior(ctx);
    const double ce = certainty_equivalent(ctx);
    std::vector<double> residual(ctx.size());
    for (std::size_t y = 0; y < ctx.size(); ++y) {
        residual[y] = std::log(post[y] / ctx.prior()[y]) + ctx.beta() * (ce - ctx.utility()[y]);
    }
    return residual;
}

ChoiceDistribution bayes_posterior(const ChoiceDistribution& prior, const UtilityTable& utility,
                                   double beta)
{
    const GibbsContext ctx(prior, utility, beta); // validates

    // Likelihood scaled so its largest value is 1; the scale cancels in Bayes' rule.
    std::vector<double> likelihood(utility.size());
    double top = kNegInf;
    for (std::size_t y = 0; y < utility.size(); ++y) top = std::max(top, beta * utility[y]);
    for (std::size_t y = 0; y < utility.size(); ++y) {
        likelihood[y] = std::exp(beta * utility[y] - top);
    }

    std::vector<double> joint(prior.size());
    for (std::size_t y = 0; y < prior.size(); ++y) joint[y] = prior[y] * likelihood[y];
    const double evidence = std::accumulate(joint.begin(), joint.end(), 0.0);
    if (!(evidence > 0.0)) {
        throw InvalidDistribution("bayes_posterior: evidence underflowed to zero");
    }
    for (double& v : joint) v /= evidence;
    return ChoiceDistribution(std::move(joint));
}

} // namespace brt
