#include "brt/analysis.hpp"

#include "brt/empirical.hpp"
#include "brt/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace brt {

namespace {

void require_stimulus_probs(const DecompositionModel& model, std::span<const double> px)
{
    if (px.size() != model.stimuli.size()) {
        throw DimensionError("stimulus distribution has " + std::to_string(px.size()) + " entries, model has " +
                             std::to_string(model.stimuli.size()) + " stimuli");
    }
}

std::string shortest(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

SolutionMap solutions_from_fixture(const PuzzleFixture& fixture)
{
    SolutionMap out;
    for (const auto& p : fixture.puzzles) out.emplace(p.formula.id, p.solution);
    return out;
}

void CurveConfig::validate() const
{
    if (beta_grid.empty()) throw ConfigError("curve config: empty beta grid");
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
        if (!(beta_grid[i] >= 0.0) || !std::isfinite(beta_grid[i])) {
            throw ConfigError("curve config: betas must be finite and nonnegative");
        }
        if (i > 0 && !(beta_grid[i] > beta_grid[i - 1])) {
            throw ConfigError("curve config: beta grid must be strictly increasing");
        }
    }
}

std::vector<double> default_beta_grid(double lo, double hi, int points)
{
    if (!(lo > 0.0) || !(hi > lo) || points < 1) {
        throw ConfigError("beta grid needs 0 < beta_min < beta_max and at least one point");
    }
    std::vector<double> grid{0.0};
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        grid.push_back(std::pow(10.0, a + t * (b - a)));
    }
    return grid;
}

CurveConfig curve_config_from_json(const std::string& text)
{
    CurveConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw ConfigError("curve config must be a JSON object");
        if (j.contains("beta_grid")) {
            c.beta_grid = j.at("beta_grid").get<std::vector<double>>();
        } else {
            c.beta_grid = default_beta_grid(j.value("beta_min", 1e-2), j.value("beta_max", 1e3), j.value("points", 60));
        }
        c.stimulus_distribution = j.value("stimulus_distribution", std::vector<double>{});
        c.include_control = j.value("include_control", false);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("curve config: ") + e.what());
    }
    c.validate();
    return c;
}

double expected_utility_at(const DecompositionModel& model, std::span<const double> px, double beta)
{
    require_stimulus_probs(model, px);
    double eu = 0.0;
    for (std::size_t xi = 0; xi < px.size(); ++xi) {
        if (px[xi] == 0.0) continue;
        const ChoiceDistribution q = model_posterior_at(model, xi, beta);
        double inner = 0.0;
        for (std::size_t y = 0; y < q.size(); ++y) inner += q[y] * model.utilities[xi][y];
        eu += px[xi] * inner;
    }
    return eu;
}

double mutual_information_at(const DecompositionModel& model, std::span<const double> px, double beta)
{
    require_stimulus_probs(model, px);
    // The choice does not depend on the stimulus at beta = 0.
    if (beta == 0.0) return 0.0;
    const std::size_t ny = model.num_choices();
    std::vector<ChoiceDistribution> cond;
    std::vector<double> marginal(ny, 0.0);
    cond.reserve(px.size());
    for (std::size_t xi = 0; xi < px.size(); ++xi) {
        cond.push_back(model_posterior_at(model, xi, beta));
        for (std::size_t y = 0; y < ny; ++y) marginal[y] += px[xi] * cond.back()[y];
    }
    double info = 0.0;
    for (std::size_t xi = 0; xi < px.size(); ++xi) {
        if (px[xi] == 0.0) continue;
        info += px[xi] * kl_divergence(cond[xi].values(), marginal);
    }
    return std::max(0.0, nats_to_bits(info));
}

double percent_correct_at(const DecompositionModel& model, std::span<const double> px, const SolutionMap& solutions,
                          double beta)
{
    require_stimulus_probs(model, px);
    double pc = 0.0;
    for (std::size_t xi = 0; xi < px.size(); ++xi) {
        if (px[xi] == 0.0) continue;
        const auto it = solutions.find(model.stimuli[xi]);
        if (it == solutions.end()) {
            throw ConfigError("no solution known for stimulus " + std::to_string(model.stimuli[xi]));
        }
        pc += px[xi] * model_posterior_at(model, xi, beta)[static_cast<std::size_t>(it->second.index())];
    }
    return std::clamp(pc, 0.0, 1.0); // rounding can overshoot 1
}

PerformancePoint performance_at(const DecompositionModel& model, std::span<const double> px,
                                const SolutionMap& solutions, double beta)
{
    return {beta, expected_utility_at(model, px, beta), mutual_information_at(model, px, beta),
            percent_correct_at(model, px, solutions, beta)};
}

std::vector<double> effective_stimulus_distribution(const DecompositionModel& model, const CurveConfig& config)
{
    std::vector<double> px = config.stimulus_distribution.empty() ? model.stimulus_marginal
                                                                  : config.stimulus_distribution;
    if (px.empty()) px.assign(model.stimuli.size(), 1.0);
    if (px.size() != model.stimuli.size()) throw DimensionError("stimulus distribution does not match model stimuli");
    if (!config.include_control && config.control_stimulus) {
        if (const auto xi = model.stimulus_index(*config.control_stimulus)) px[*xi] = 0.0;
    }
    const double total = std::accumulate(px.begin(), px.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("stimulus distribution has no mass");
    for (double& p : px) p /= total;
    return px;
}

Curve sweep(const DecompositionModel& model, const CurveConfig& config, const SolutionMap& solutions)
{
    config.validate();
    model.validate();
    Curve curve;
    curve.stimulus_distribution = effective_stimulus_distribution(model, config);
    curve.stimulus_entropy_bits = entropy_bits(curve.stimulus_distribution);
    curve.points.reserve(config.beta_grid.size());
    for (double beta : config.beta_grid) {
        curve.points.push_back(performance_at(model, curve.stimulus_distribution, solutions, beta));
    }
    curve.asymptote = performance_at(model, curve.stimulus_distribution, solutions, kAsymptoteBeta);
    return curve;
}

void write_curve(std::ostream& out, const Curve& curve)
{
    out << "# " << kCurveSchema << '\n';
    out << "# stimulus_entropy_bits\t" << shortest(curve.stimulus_entropy_bits) << '\n';
    const auto& a = curve.asymptote;
    out << "# asymptote\t" << shortest(a.beta) << '\t' << shortest(a.expected_utility) << '\t'
        << shortest(a.mutual_information_bits) << '\t' << shortest(a.percent_correct) << '\n';
    out << "beta\texpected_utility\tmutual_information_bits\tpercent_correct\n";
    for (const auto& p : curve.points) {
        out << shortest(p.beta) << '\t' << shortest(p.expected_utility) << '\t' << shortest(p.mutual_information_bits)
            << '\t' << shortest(p.percent_correct) << '\n';
    }
}

} // namespace brt
