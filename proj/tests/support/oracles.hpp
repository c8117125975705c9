#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library: plain loops, long double, no max-shift.

#include "brt/empirical.hpp"
#include "brt/fitter.hpp"
#include "brt/random.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

inline std::vector<double> posterior(const std::vector<double>& ref, const std::vector<double>& u, double beta)
{
    std::vector<long double> w(ref.size());
    long double z = 0;
    for (std::size_t y = 0; y < ref.size(); ++y) {
        w[y] = static_cast<long double>(ref[y]) * std::exp(static_cast<long double>(beta) * u[y]);
        z += w[y];
    }
    std::vector<double> out(ref.size());
    for (std::size_t y = 0; y < ref.size(); ++y) out[y] = static_cast<double>(w[y] / z);
    return out;
}

inline double log_sum(const std::vector<double>& ref, const std::vector<double>& u, double beta)
{
    long double z = 0;
    for (std::size_t y = 0; y < ref.size(); ++y) z += ref[y] * std::exp(static_cast<long double>(beta) * u[y]);
    return static_cast<double>(std::log(z));
}

inline double kl_nats(const std::vector<double>& p, const std::vector<double>& q)
{
    long double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0) s += p[i] * std::log(static_cast<long double>(p[i]) / q[i]);
    }
    return static_cast<double>(s);
}

inline std::vector<double> reference_of(const brt::DecompositionModel& m)
{
    if (m.kind == brt::ModelKind::softmax) return std::vector<double>(m.num_choices(), 1.0 / m.num_choices());
    return {m.prior.values().begin(), m.prior.values().end()};
}

// Average KL in bits, marginalizing the joint directly.
inline double objective_bits(const brt::EmpiricalTable& t, const brt::DecompositionModel& m)
{
    const auto ref = reference_of(m);
    long double total = 0;
    for (std::size_t x = 0; x < t.num_stimuli(); ++x) {
        for (std::size_t r = 0; r < t.num_durations(); ++r) {
            long double pxr = 0;
            for (std::size_t y = 0; y < t.num_choices(); ++y) pxr += t.joint(x, r, y);
            std::vector<double> p(t.num_choices());
            for (std::size_t y = 0; y < t.num_choices(); ++y) p[y] = static_cast<double>(t.joint(x, r, y) / pxr);
            const auto q = posterior(ref, m.utilities[x], m.betas[r]);
            total += pxr * kl_nats(p, q);
        }
    }
    return static_cast<double>(total / std::log(2.0L));
}

// Central difference of f around v[i].
inline double central_difference(const std::function<double()>& f, double& v, double h)
{
    const double saved = v;
    v = saved + h;
    const double up = f();
    v = saved - h;
    const double down = f();
    v = saved;
    return (up - down) / (2 * h);
}

inline bool clause_true(int v1, bool p1, int v2, bool p2, int assignment)
{
    const bool a = ((assignment >> v1) & 1) != 0;
    const bool b = ((assignment >> v2) & 1) != 0;
    return a == p1 || b == p2;
}

inline std::vector<double> random_distribution(brt::Rng& rng, std::size_t n, double min_mass = 0.0)
{
    std::vector<double> w(n);
    double s = 0;
    for (auto& v : w) {
        v = min_mass + rng.unit();
        s += v;
    }
    for (auto& v : w) v /= s;
    return w;
}

inline std::vector<double> random_utilities(brt::Rng& rng, std::size_t n, double lo = -2, double hi = 2)
{
    std::vector<double> u(n);
    for (auto& v : u) v = rng.uniform(lo, hi);
    return u;
}

// Smoothed table with random counts on an |X| x |R| x |Y| grid.
inline brt::EmpiricalTable random_table(brt::Rng& rng, std::size_t nx, std::size_t nr, std::size_t ny,
                                        int max_count = 40)
{
    std::vector<int> xs;
    std::vector<double> rs;
    for (std::size_t i = 0; i < nx; ++i) xs.push_back(static_cast<int>(i + 1));
    for (std::size_t i = 0; i < nr; ++i) rs.push_back(1.25 * static_cast<double>(1u << i));
    std::vector<std::int64_t> counts(nx * nr * ny);
    for (auto& c : counts) c = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_count)));
    return brt::EmpiricalTable::from_counts(xs, rs, ny, counts);
}

inline brt::DecompositionModel random_model(brt::Rng& rng, const brt::EmpiricalTable& t,
                                            brt::ModelKind kind = brt::ModelKind::gibbs)
{
    brt::DecompositionModel m;
    m.kind = kind;
    m.prior = t.prior();
    m.durations = t.durations();
    m.stimuli = t.stimuli();
    for (std::size_t r = 0; r < t.num_durations(); ++r) m.betas.push_back(rng.uniform(0.2, 3.0));
    for (std::size_t x = 0; x < t.num_stimuli(); ++x) m.utilities.push_back(random_utilities(rng, t.num_choices()));
    m.anchor = 0;
    m.beta0 = m.betas[0];
    m.stimulus_marginal = t.stimulus_marginal();
    return m;
}

} // namespace oracle
