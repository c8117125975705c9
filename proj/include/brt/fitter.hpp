#pragma once

// Decomposition of empirical conditionals P(y|x,r) into a fixed prior,
// duration-dependent inverse temperatures beta(r) and per-stimulus utilities
// U_x(y), by gradient descent on the average KL divergence
//
//   J = sum_{x,r} P(x,r) KL( P(.|x,r) || Q(.|x,r) ),
//   Q(y|x,r) ∝ ref(y) exp(beta(r) U_x(y)),
//
// where ref is the prior (gibbs) or uniform (softmax). Each step is followed
// by a gauge projection: beta(anchor) is clamped to beta0 and utilities are
// shifted so their certainty-equivalent at beta0 is zero.

#include "brt/core_model.hpp"
#include "brt/empirical.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace brt {

inline constexpr const char* kModelSchema = "brt.model/1";

enum class ModelKind { gibbs, softmax };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct DecompositionModel {
    ModelKind kind = ModelKind::gibbs;
    ChoiceDistribution prior{std::vector<double>{1.0}};
    std::vector<double> durations;
    std::vector<double> betas; // per duration
    std::vector<int> stimuli;
    std::vector<std::vector<double>> utilities; // [stimulus][choice]
    std::size_t anchor = 0;                      // index into durations
    double beta0 = 1.0;
    // P(x) of the data the model was fitted on; empty if unknown.
    std::vector<double> stimulus_marginal;

    std::size_t num_choices() const noexcept { return prior.size(); }
    // Base measure of the posterior: the prior, or uniform for softmax.
    ChoiceDistribution reference() const;
    std::optional<std::size_t> stimulus_index(int id) const;
    std::optional<std::size_t> duration_index(double label) const;
    // Throws DimensionError/ConfigError on inconsistent shapes.
    void validate() const;

    friend bool operator==(const DecompositionModel&, const DecompositionModel&) = default;
};

struct FitConfig {
    long max_iterations = 200000;
    double tolerance = 1e-14; // |delta J| in bits per iteration
    double eta0 = 1.0;
    double tau = 1e4;          // eta_t = eta0 / (1 + t / tau)
    std::uint64_t seed = 0;
    double beta_floor = 1e-8;
    double init_jitter = 0.0;  // amplitude of seeded utility noise at start
    long trace_stride = 100;   // keep every n-th J in the report
    std::optional<double> anchor_duration; // default: smallest duration
    double beta0 = 1.0;

    void validate() const; // throws ConfigError
};

struct FitReport {
    double final_j_bits = 0.0;
    long iterations = 0;
    bool converged = false;
    long trace_stride = 1;
    std::vector<double> j_trace; // bits, every trace_stride-th iteration

    friend bool operator==(const FitReport&, const FitReport&) = default;
};

struct FitResult {
    DecompositionModel model;
    FitReport report;
};

// Q(y|x,r) for grid indices.
ChoiceDistribution model_posterior(const DecompositionModel& model, std::size_t xi, std::size_t ri);
// Q_beta(y|x) at an arbitrary inverse temperature.
ChoiceDistribution model_posterior_at(const DecompositionModel& model, std::size_t xi, double beta);

// Average KL in nats / bits. The model grid must equal the table grid.
double objective_nats(const EmpiricalTable& table, const DecompositionModel& model);
double objective_J(const EmpiricalTable& table, const DecompositionModel& model);

// dJ/dbeta(r) = sum_x P(x,r) sum_y [Q - P](y|x,r) U_x(y), natural-log units.
std::vector<double> grad_beta(const EmpiricalTable& table, const DecompositionModel& model);
// dJ/dU_x(y) = sum_r P(x,r) beta(r) [Q - P](y|x,r), natural-log units.
std::vector<std::vector<double>> grad_utility(const EmpiricalTable& table, const DecompositionModel& model);

// Rescales (beta, U) so that beta(anchor) = beta0 and shifts each U_x to zero
// certainty-equivalent at beta0. Posteriors are unchanged.
// Throws GaugeError when beta(anchor) <= beta_floor.
DecompositionModel project_gauge(const DecompositionModel& model, double beta_floor = 1e-8);

// Warm start: prior from the table, all betas = beta0, utilities
// log(P(y|x,r_max)/ref(y)) / beta0 (plus optional seeded jitter), projected.
DecompositionModel initialize_model(const EmpiricalTable& table, const FitConfig& config,
                                    ModelKind kind = ModelKind::gibbs);

// Throws DivergenceError if J becomes non-finite.
FitResult fit(const EmpiricalTable& table, const FitConfig& config, ModelKind kind = ModelKind::gibbs);

std::string model_to_json(const DecompositionModel& model, const FitReport* report = nullptr);
// Reads a model file; the report is returned when present.
DecompositionModel model_from_json(const std::string& text, FitReport* report = nullptr);
DecompositionModel load_model(const std::filesystem::path& path, FitReport* report = nullptr);

FitConfig fit_config_from_json(const std::string& text);
std::string fit_config_to_json(const FitConfig& config);

} // namespace brt
