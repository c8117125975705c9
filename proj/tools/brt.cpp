// brt: puzzles, simulation, fitting, curves and the trial collector.
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include "brt/cli.hpp"
#include "brt/error.hpp"
#include "brt/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

brt::PhaseFilter parse_phase(const std::string& s)
{
    if (s == "test") return brt::PhaseFilter::test;
    if (s == "training") return brt::PhaseFilter::training;
    if (s == "all") return brt::PhaseFilter::all;
    throw brt::ConfigError("phase must be test, training or all");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bounded-rational choice toolkit"};
    app.set_version_flag("--version", brt::kVersion);
    app.require_subcommand(1);

    brt::GenPuzzlesOptions gen;
    auto* c_gen = app.add_subcommand("gen-puzzles", "Generate a unique-solution puzzle fixture");
    c_gen->add_option("--count", gen.count, "Puzzles including the control")->capture_default_str();
    c_gen->add_option("--seed", gen.seed)->capture_default_str();
    c_gen->add_option("--out", gen.out)->required();

    brt::MakeDesignOptions design;
    long trials_per_cell = 0;
    auto* c_design = app.add_subcommand("make-design", "Write the default experiment design for a fixture");
    c_design->add_option("--puzzles", design.puzzles)->required();
    auto* o_cells = c_design->add_option("--trials-per-cell", trials_per_cell,
                                         "Use a fixed number of test trials per (stimulus, duration) cell");
    c_design->add_option("--out", design.out)->required();

    brt::MakeAgentOptions agent;
    auto* c_agent = app.add_subcommand("make-agent", "Write a default synthetic subject");
    c_agent->add_option("--puzzles", agent.puzzles)->required();
    c_agent->add_option("--design", agent.design)->required();
    c_agent->add_option("--seed", agent.seed)->capture_default_str();
    c_agent->add_option("--out", agent.out)->required();

    brt::SimulateOptions sim;
    std::string sim_agent, sim_puzzles;
    auto* c_sim = app.add_subcommand("simulate", "Sample trial files from synthetic subjects");
    c_sim->add_option("--design", sim.design)->required();
    auto* o_sim_agent = c_sim->add_option("--agent", sim_agent, "Model file used for every subject");
    auto* o_sim_puzzles = c_sim->add_option("--puzzles", sim_puzzles, "Fixture for success flags");
    c_sim->add_option("--seed", sim.seed)->capture_default_str();
    c_sim->add_option("--subjects", sim.subjects)->capture_default_str();
    c_sim->add_option("--out", sim.out, "Trial file, or a directory when --subjects > 1")->required();

    brt::FitOptions fit;
    std::string fit_kind = "gibbs", fit_phase = "test", fit_config, fit_puzzles;
    auto* c_fit = app.add_subcommand("fit", "Fit a decomposition to trial files");
    c_fit->add_option("trials", fit.trials, "Trial files")->required();
    c_fit->add_option("--kind", fit_kind)->check(CLI::IsMember({"gibbs", "softmax"}))->capture_default_str();
    auto* o_fit_config = c_fit->add_option("--config", fit_config, "Fit config JSON");
    auto* o_fit_puzzles = c_fit->add_option("--puzzles", fit_puzzles);
    c_fit->add_option("--phase", fit_phase)->check(CLI::IsMember({"test", "training", "all"}))->capture_default_str();
    c_fit->add_flag("--exclude-control", fit.exclude_control, "Drop the control stimulus (needs --puzzles)");
    c_fit->add_option("--out", fit.out, "Model file, or a directory for several inputs")->required();

    brt::AnalyzeOptions an;
    std::string an_config;
    double beta_min = 0, beta_max = 0;
    int points = 0;
    bool include_control = false;
    auto* c_an = app.add_subcommand("analyze", "Performance curves over inverse temperature");
    c_an->add_option("--model", an.model)->required();
    c_an->add_option("--puzzles", an.puzzles)->required();
    auto* o_an_config = c_an->add_option("--config", an_config, "Curve config JSON");
    auto* o_bmin = c_an->add_option("--beta-min", beta_min);
    auto* o_bmax = c_an->add_option("--beta-max", beta_max);
    auto* o_points = c_an->add_option("--points", points);
    auto* o_incl = c_an->add_flag("--include-control", include_control);
    c_an->add_option("--out", an.out)->required();

    brt::ClauseCasesOptions cases;
    auto* c_cases = app.add_subcommand("clause-cases", "Write the clause satisfaction table");
    c_cases->add_option("--out", cases.out)->required();

    brt::CollectOptions col;
    std::string col_design, col_static;
    auto* c_col = app.add_subcommand("collect", "Serve the trial collector");
    c_col->add_option("--host", col.host)->capture_default_str();
    c_col->add_option("--port", col.port)->capture_default_str();
    c_col->add_option("--puzzles", col.puzzles)->required();
    auto* o_col_design = c_col->add_option("--design", col_design, "Design declaring the duration labels");
    auto* o_col_static = c_col->add_option("--static", col_static, "Directory served at /");
    c_col->add_option("--out", col.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_gen->parsed()) {
            brt::cmd_gen_puzzles(gen);
        } else if (c_design->parsed()) {
            if (*o_cells) design.trials_per_cell = trials_per_cell;
            brt::cmd_make_design(design);
        } else if (c_agent->parsed()) {
            brt::cmd_make_agent(agent);
        } else if (c_sim->parsed()) {
            if (*o_sim_agent) sim.agent = sim_agent;
            if (*o_sim_puzzles) sim.puzzles = sim_puzzles;
            brt::cmd_simulate(sim);
        } else if (c_fit->parsed()) {
            fit.kind = brt::parse_model_kind(fit_kind);
            fit.phase = parse_phase(fit_phase);
            if (*o_fit_config) fit.config = fit_config;
            if (*o_fit_puzzles) fit.puzzles = fit_puzzles;
            brt::cmd_fit(fit);
        } else if (c_an->parsed()) {
            if (*o_an_config) an.config = an_config;
            if (*o_bmin) an.beta_min = beta_min;
            if (*o_bmax) an.beta_max = beta_max;
            if (*o_points) an.points = points;
            if (*o_incl) an.include_control = include_control;
            brt::cmd_analyze(an);
        } else if (c_cases->parsed()) {
            brt::cmd_clause_cases(cases);
        } else if (c_col->parsed()) {
            if (*o_col_design) col.design = col_design;
            if (*o_col_static) col.static_dir = col_static;
            brt::cmd_collect(col);
        }
    } catch (const brt::Error& e) {
        std::fprintf(stderr, "brt: %s\n", e.what());
        return e.is_validation() ? 1 : 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "brt: malformed input: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "brt: %s\n", e.what());
        return 2;
    }
    return 0;
}
