#include "brt/fitter.hpp"

#include "brt/error.hpp"
#include "brt/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace brt {

using nlohmann::json;

std::string to_string(ModelKind kind)
{
    return kind == ModelKind::gibbs ? "gibbs" : "softmax";
}

ModelKind parse_model_kind(const std::string& text)
{
    if (text == "gibbs") return ModelKind::gibbs;
    if (text == "softmax") return ModelKind::softmax;
    throw ConfigError("unknown model kind '" + text + "' (expected gibbs or softmax)");
}

ChoiceDistribution DecompositionModel::reference() const
{
    return kind == ModelKind::gibbs ? prior : ChoiceDistribution::uniform(prior.size());
}

std::optional<std::size_t> DecompositionModel::stimulus_index(int id) const
{
    const auto it = std::find(stimuli.begin(), stimuli.end(), id);
    if (it == stimuli.end()) return std::nullopt;
    return static_cast<std::size_t>(it - stimuli.begin());
}

std::optional<std::size_t> DecompositionModel::duration_index(double label) const
{
    const auto it = std::find(durations.begin(), durations.end(), label);
    if (it == durations.end()) return std::nullopt;
    return static_cast<std::size_t>(it - durations.begin());
}

void DecompositionModel::validate() const
{
    if (durations.empty() || stimuli.empty()) throw ConfigError("model has an empty grid");
    if (betas.size() != durations.size()) throw DimensionError("model: one beta per duration required");
    if (utilities.size() != stimuli.size()) throw DimensionError("model: one utility table per stimulus required");
    for (const auto& u : utilities) {
        if (u.size() != prior.size()) throw DimensionError("model: utility length differs from prior");
        for (double v : u) {
            if (!std::isfinite(v)) throw DomainError("model: non-finite utility");
        }
    }
    for (double b : betas) {
        if (!std::isfinite(b) || b < 0.0) throw DomainError("model: betas must be finite and nonnegative");
    }
    if (anchor >= durations.size()) throw ConfigError("model: gauge anchor out of range");
    if (!stimulus_marginal.empty() && stimulus_marginal.size() != stimuli.size()) {
        throw DimensionError("model: stimulus marginal length mismatch");
    }
}

void FitConfig::validate() const
{
    if (!(eta0 > 0.0) || !(tau > 0.0) || !(tolerance > 0.0)) {
        throw ConfigError("fit config: eta0, tau and tolerance must be positive");
    }
    if (max_iterations < 0) throw ConfigError("fit config: max_iterations must be nonnegative");
    if (!(beta_floor > 0.0)) throw ConfigError("fit config: beta_floor must be positive");
    if (!(beta0 > 0.0)) throw ConfigError("fit config: beta0 must be positive");
    if (trace_stride < 1) throw ConfigError("fit config: trace_stride must be >= 1");
    if (init_jitter < 0.0) throw ConfigError("fit config: init_jitter must be nonnegative");
}

namespace {

void require_same_grid(const EmpiricalTable& table, const DecompositionModel& model)
{
    if (table.stimuli() != model.stimuli || table.durations() != model.durations ||
        table.num_choices() != model.num_choices()) {
        throw DimensionError("model grid does not match table grid");
    }
}

// Q(y|x,r) for every cell, flat [(xi * nr + ri) * ny + y].
std::vector<double> all_posteriors(const DecompositionModel& m)
{
    const std::size_t nx = m.stimuli.size(), nr = m.durations.size(), ny = m.num_choices();
    const ChoiceDistribution ref = m.reference();
    std::vector<double> q(nx * nr * ny);
    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t ri = 0; ri < nr; ++ri) {
            gibbs_posterior_into(ref.values(), m.utilities[xi], m.betas[ri],
                                 std::span<double>(q.data() + (xi * nr + ri) * ny, ny));
        }
    }
    return q;
}

double objective_from(const EmpiricalTable& table, std::span<const double> q)
{
    const std::size_t nx = table.num_stimuli(), nr = table.num_durations(), ny = table.num_choices();
    double j = 0.0;
    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t ri = 0; ri < nr; ++ri) {
            const auto& p = table.conditional(xi, ri);
            const double* qc = q.data() + (xi * nr + ri) * ny;
            double kl = 0.0;
            for (std::size_t y = 0; y < ny; ++y) {
                if (p[y] < kProbabilityFloor) continue;
                kl += p[y] * std::log(p[y] / qc[y]);
            }
            j += table.context(xi, ri) * kl;
        }
    }
    return j;
}

struct Gradients {
    std::vector<double> beta;
    std::vector<std::vector<double>> utility;
};

Gradients gradients_from(const EmpiricalTable& table, const DecompositionModel& m, std::span<const double> q)
{
    const std::size_t nx = table.num_stimuli(), nr = table.num_durations(), ny = table.num_choices();
    Gradients g{std::vector<double>(nr, 0.0), std::vector<std::vector<double>>(nx, std::vector<double>(ny, 0.0))};
    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t ri = 0; ri < nr; ++ri) {
            const auto& p = table.conditional(xi, ri);
            const double* qc = q.data() + (xi * nr + ri) * ny;
            const double w = table.context(xi, ri);
            double gb = 0.0;
            for (std::size_t y = 0; y < ny; ++y) {
                const double diff = qc[y] - p[y];
                gb += diff * m.utilities[xi][y];
                g.utility[xi][y] += w * m.betas[ri] * diff;
            }
            g.beta[ri] += w * gb;
        }
    }
    return g;
}

// Offset removed from U_x during projection.
double gauge_offset(const DecompositionModel& m, std::span<const double> u)
{
    if (m.kind == ModelKind::gibbs) return log_partition(m.prior.values(), u, m.beta0) / m.beta0;
    const std::vector<double> ones(u.size(), 1.0);
    return log_partition(ones, u, m.beta0) / m.beta0;
}

void project_in_place(DecompositionModel& m, double beta_floor)
{
    const double b = m.betas[m.anchor];
    if (!(b > beta_floor)) {
        throw GaugeError("gauge anchor beta " + std::to_string(b) + " is at or below the floor");
    }
    const double scale = m.beta0 / b;
    for (double& beta : m.betas) beta *= scale;
    m.betas[m.anchor] = m.beta0;
    for (auto& u : m.utilities) {
        for (double& v : u) v /= scale;
        const double offset = gauge_offset(m, u);
        for (double& v : u) v -= offset;
    }
}

std::size_t default_anchor(const std::vector<double>& durations, const std::optional<double>& label)
{
    if (label) {
        const auto it = std::find(durations.begin(), durations.end(), *label);
        if (it == durations.end()) throw ConfigError("anchor duration is not one of the table durations");
        return static_cast<std::size_t>(it - durations.begin());
    }
    return static_cast<std::size_t>(std::min_element(durations.begin(), durations.end()) - durations.begin());
}

} // namespace

ChoiceDistribution model_posterior(const DecompositionModel& model, std::size_t xi, std::size_t ri)
{
    return model_posterior_at(model, xi, model.betas.at(ri));
}

ChoiceDistribution model_posterior_at(const DecompositionModel& model, std::size_t xi, double beta)
{
    const ChoiceDistribution ref = model.reference();
    std::vector<double> q(model.num_choices());
    gibbs_posterior_into(ref.values(), model.utilities.at(xi), beta, q);
    return ChoiceDistribution(std::move(q));
}

double objective_nats(const EmpiricalTable& table, const DecompositionModel& model)
{
    require_same_grid(table, model);
    return objective_from(table, all_posteriors(model));
}

double objective_J(const EmpiricalTable& table, const DecompositionModel& model)
{
    return nats_to_bits(objective_nats(table, model));
}

std::vector<double> grad_beta(const EmpiricalTable& table, const DecompositionModel& model)
{
    require_same_grid(table, model);
    return gradients_from(table, model, all_posteriors(model)).beta;
}

std::vector<std::vector<double>> grad_utility(const EmpiricalTable& table, const DecompositionModel& model)
{
    require_same_grid(table, model);
    return gradients_from(table, model, all_posteriors(model)).utility;
}

DecompositionModel project_gauge(const DecompositionModel& model, double beta_floor)
{
    model.validate();
    DecompositionModel out = model;
    project_in_place(out, beta_floor);
    return out;
}

DecompositionModel initialize_model(const EmpiricalTable& table, const FitConfig& config, ModelKind kind)
{
    config.validate();
    DecompositionModel m;
    m.kind = kind;
    m.prior = table.prior();
    m.durations = table.durations();
    m.stimuli = table.stimuli();
    m.stimulus_marginal = table.stimulus_marginal();
    m.anchor = default_anchor(m.durations, config.anchor_duration);
    m.beta0 = config.beta0;
    m.betas.assign(m.durations.size(), config.beta0);

    const auto rmax = static_cast<std::size_t>(
        std::max_element(m.durations.begin(), m.durations.end()) - m.durations.begin());
    const ChoiceDistribution ref = m.reference();
    Rng rng(config.seed);
    m.utilities.resize(m.stimuli.size());
    for (std::size_t xi = 0; xi < m.stimuli.size(); ++xi) {
        const auto& p = table.conditional(xi, rmax);
        auto& u = m.utilities[xi];
        u.resize(m.num_choices());
        for (std::size_t y = 0; y < u.size(); ++y) {
            // Zero-probability choices get a large negative (but finite) utility.
            const double ratio = std::max(p[y], kProbabilityFloor) / std::max(ref[y], kProbabilityFloor);
            u[y] = std::log(ratio) / config.beta0;
            if (config.init_jitter > 0.0) u[y] += rng.uniform(-config.init_jitter, config.init_jitter);
        }
    }
    project_in_place(m, config.beta_floor);
    return m;
}

FitResult fit(const EmpiricalTable& table, const FitConfig& config, ModelKind kind)
{
    DecompositionModel m = initialize_model(table, config, kind);
    FitReport report;
    report.trace_stride = config.trace_stride;

    std::vector<double> q = all_posteriors(m);
    double j = objective_from(table, q);
    if (!std::isfinite(j)) throw DivergenceError("objective is non-finite at iteration 0", 0);
    report.j_trace.push_back(nats_to_bits(j));

    // Steps that would raise J (or push the anchor beta to the floor) are
    // rejected and the whole schedule is scaled down by half. The schedule
    // stays eta0 * scale / (1 + t / tau), so the Robbins-Monro conditions hold.
    double scale = 1.0;
    long t = 0;
    while (t < config.max_iterations) {
        const Gradients g = gradients_from(table, m, q);
        const double eta = scale * config.eta0 / (1.0 + static_cast<double>(t) / config.tau);

        DecompositionModel next = m;
        for (std::size_t ri = 0; ri < next.betas.size(); ++ri) {
            next.betas[ri] = std::max(next.betas[ri] - eta * g.beta[ri], config.beta_floor);
        }
        for (std::size_t xi = 0; xi < next.utilities.size(); ++xi) {
            for (std::size_t y = 0; y < next.num_choices(); ++y) next.utilities[xi][y] -= eta * g.utility[xi][y];
        }

        const bool evaluated = next.betas[next.anchor] > config.beta_floor;
        bool accepted = evaluated;
        std::vector<double> next_q;
        double next_j = j;
        if (evaluated) {
            project_in_place(next, config.beta_floor);
            next_q = all_posteriors(next);
            next_j = objective_from(table, next_q);
            if (std::isnan(next_j)) {
                throw DivergenceError("objective became non-finite at iteration " + std::to_string(t + 1), t + 1);
            }
            accepted = next_j <= j;
        }
        if (!accepted) {
            if (evaluated && std::abs(nats_to_bits(next_j - j)) < config.tolerance) {
                report.converged = true;
                break;
            }
            scale *= 0.5;
            if (scale < 1e-30) {
                throw DivergenceError("step size collapsed at iteration " + std::to_string(t + 1), t + 1);
            }
            continue;
        }

        ++t;
        const double delta = nats_to_bits(j - next_j);
        m = std::move(next);
        q = std::move(next_q);
        j = next_j;
        if (t % config.trace_stride == 0) report.j_trace.push_back(nats_to_bits(j));
        if (delta < config.tolerance) {
            report.converged = true;
            break;
        }
    }
    if (t % config.trace_stride != 0) report.j_trace.push_back(nats_to_bits(j));
    report.iterations = t;
    report.final_j_bits = nats_to_bits(j);
    return {std::move(m), std::move(report)};
}

// --- model files ----------------------------------------------------------------

std::string model_to_json(const DecompositionModel& model, const FitReport* report)
{
    model.validate();
    const auto prior = model.prior.values();
    json j{{"schema", kModelSchema},
           {"kind", to_string(model.kind)},
           {"choices", model.num_choices()},
           {"prior", std::vector<double>(prior.begin(), prior.end())},
           {"durations", model.durations},
           {"betas", model.betas},
           {"stimuli", model.stimuli},
           {"utilities", model.utilities},
           {"gauge", {{"anchor_duration", model.durations[model.anchor]}, {"beta0", model.beta0}}},
           {"stimulus_marginal", model.stimulus_marginal}};
    if (report) {
        j["report"] = {{"final_j_bits", report->final_j_bits},
                       {"iterations", report->iterations},
                       {"converged", report->converged},
                       {"trace_stride", report->trace_stride},
                       {"j_trace", report->j_trace}};
    }
    return j.dump(1);
}

DecompositionModel model_from_json(const std::string& text, FitReport* report)
{
    DecompositionModel m;
    try {
        const json j = json::parse(text);
        if (j.value("schema", "") != kModelSchema) {
            throw ValidationError(std::string("model file: expected schema ") + kModelSchema);
        }
        m.kind = parse_model_kind(j.at("kind").get<std::string>());
        m.prior = ChoiceDistribution(j.at("prior").get<std::vector<double>>());
        m.durations = j.at("durations").get<std::vector<double>>();
        m.betas = j.at("betas").get<std::vector<double>>();
        m.stimuli = j.at("stimuli").get<std::vector<int>>();
        m.utilities = j.at("utilities").get<std::vector<std::vector<double>>>();
        const json& gauge = j.at("gauge");
        m.anchor = default_anchor(m.durations, gauge.at("anchor_duration").get<double>());
        m.beta0 = gauge.at("beta0").get<double>();
        m.stimulus_marginal = j.value("stimulus_marginal", std::vector<double>{});
        if (report && j.contains("report")) {
            const json& r = j.at("report");
            report->final_j_bits = r.at("final_j_bits").get<double>();
            report->iterations = r.at("iterations").get<long>();
            report->converged = r.at("converged").get<bool>();
            report->trace_stride = r.at("trace_stride").get<long>();
            report->j_trace = r.at("j_trace").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
    m.validate();
    return m;
}

DecompositionModel load_model(const std::filesystem::path& path, FitReport* report)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str(), report);
}

FitConfig fit_config_from_json(const std::string& text)
{
    FitConfig c;
    try {
        const json j = json::parse(text);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        c.tolerance = j.value("tolerance", c.tolerance);
        c.eta0 = j.value("eta0", c.eta0);
        c.tau = j.value("tau", c.tau);
        c.seed = j.value("seed", c.seed);
        c.beta_floor = j.value("beta_floor", c.beta_floor);
        c.init_jitter = j.value("init_jitter", c.init_jitter);
        c.trace_stride = j.value("trace_stride", c.trace_stride);
        c.beta0 = j.value("beta0", c.beta0);
        if (j.contains("anchor_duration") && !j.at("anchor_duration").is_null()) {
            c.anchor_duration = j.at("anchor_duration").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("fit config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string fit_config_to_json(const FitConfig& c)
{
    json j{{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance}, {"eta0", c.eta0},
           {"tau", c.tau},
           {"seed", c.seed},
           {"beta_floor", c.beta_floor},
           {"init_jitter", c.init_jitter},
           {"trace_stride", c.trace_stride},
           {"beta0", c.beta0}};
    j["anchor_duration"] = c.anchor_duration ? json(*c.anchor_duration) : json(nullptr);
    return j.dump(1);
}

} // namespace brt
