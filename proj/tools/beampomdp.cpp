// Command-line driver: solve, sweep, online, simulate, compare, beliefs.
// Exit codes: 0 ok, 1 invalid input, 2 solver did not converge, 3 internal error.

#include "beampomdp/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace beampomdp;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitInternal = 3;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string out = "results";
    std::optional<double> lambda;
    std::optional<std::size_t> episodes;
    std::string policy = "solved";
    std::string value_function_path;
};

ExperimentConfig effective_config(const Options& opt) {
    ExperimentConfig cfg = opt.config_path.empty() ? ExperimentConfig{} : load_config(opt.config_path);
    if (opt.seed) cfg.sim.seed = *opt.seed;
    if (opt.episodes) cfg.sim.episodes = *opt.episodes;
    if (opt.lambda) cfg.solver.lambda = *opt.lambda;
    cfg.validate();
    return cfg;
}

void announce(const fs::path& dir) { std::cout << "wrote " << dir.string() << "\n"; }

int cmd_solve(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    const BeamPomdp pomdp(cfg.model_spec());
    const std::vector<Belief> beliefs = make_beliefs(cfg, pomdp);
    const PointBasedSolver solver(pomdp.model(), cfg.solver.discount);
    const SolveResult r = solver.solve(beliefs, initial_belief(cfg.radio.num_sublinks), cfg.solver.lambda,
                                       cfg.solver_params(opt.threads), 0);

    const fs::path dir = prepare_output_dir(opt.out, "solve", cfg);
    Json stages = Json::array();
    for (const StageRecord& s : r.stages) stages.push_back(stage_to_json(s));
    Json doc{{"summary", solve_summary_json(r, pomdp)},
             {"stages", stages},
             {"value_function", value_function_to_json(r.value_function, pomdp.model())}};
    write_text((dir / "value_function.json").string(), doc.dump(2) + "\n");
    announce(dir);
    if (!r.converged) {
        std::cerr << "solver stopped at max_stages without converging\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_sweep(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    std::vector<SweepRun> runs;
    for (double eps : cfg.sweep.epsilons)
        runs.push_back(run_sweep(cfg, eps, cfg.belief.strategy, cfg.belief_count(), opt.threads));

    const fs::path dir = prepare_output_dir(opt.out, "sweep", cfg);
    std::vector<const SweepRun*> ptrs;
    Json doc = Json::array();
    bool converged = true;
    for (const SweepRun& run : runs) {
        ptrs.push_back(&run);
        doc.push_back(sweep_json(run, BeamPomdp(cfg.model_spec(DetectionSpec::from_epsilon(run.epsilon)))));
        converged = converged && run.all_converged();
    }
    write_text((dir / "frontier.csv").string(), sweep_csv(ptrs));
    write_text((dir / "sweep.json").string(), doc.dump(2) + "\n");
    announce(dir);
    return converged ? kExitOk : kExitNotConverged;
}

int cmd_online(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    const BeamPomdp pomdp(cfg.model_spec());
    const OnlineRun run = run_online(cfg, opt.threads);

    const fs::path dir = prepare_output_dir(opt.out, "online", cfg);
    write_text((dir / "trajectory.csv").string(), trajectory_csv(run.result, pomdp));
    Json summary{{"converged", run.result.converged},
                 {"cost_budget_mw_slots", run.cost_budget},
                 {"lambda_opt", run.result.lambda_opt},
                 {"stages", run.result.trajectory.size()},
                 {"value_b0", run.result.value_b0},
                 {"reward_b0", run.result.reward_b0},
                 {"cost_b0_mw_slots", run.result.cost_b0},
                 {"relative_cost_gap", (run.result.cost_b0 - run.cost_budget) / run.cost_budget},
                 {"predicted_rate_bps", run.final_metrics.rate_bps},
                 {"predicted_power_dbm", run.final_metrics.power_dbm}};
    Json doc{{"summary", summary}, {"value_function", value_function_to_json(run.result.value_function, pomdp.model())}};
    write_text((dir / "policy.json").string(), doc.dump(2) + "\n");
    announce(dir);
    if (!run.result.converged) {
        std::cerr << "online adaptation stopped at max_stages without converging\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_simulate(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    const BeamPomdp pomdp(cfg.model_spec());
    const double eps = cfg.detection.epsilon.value_or(std::numeric_limits<double>::quiet_NaN());
    std::string csv = std::string(kMetricsCsvHeader) + "\n";
    int code = kExitOk;

    if (opt.policy == "solved") {
        ValueFunction v;
        if (!opt.value_function_path.empty()) {
            Json doc;
            try {
                doc = Json::parse(read_text(opt.value_function_path));
            } catch (const Json::parse_error& e) {
                throw ConfigError("", opt.value_function_path + ": " + e.what());
            }
            v = value_function_from_json(doc.contains("value_function") ? doc.at("value_function") : doc,
                                         pomdp.model());
        } else {
            const PointBasedSolver solver(pomdp.model(), cfg.solver.discount);
            const SolveResult r = solver.solve(make_beliefs(cfg, pomdp), initial_belief(cfg.radio.num_sublinks),
                                               cfg.solver.lambda, cfg.solver_params(opt.threads), 0);
            if (!r.converged) code = kExitNotConverged;
            v = r.value_function;
        }
        const Metrics m = monte_carlo_metrics(SolvedPolicy{&v}, pomdp, sim_params(cfg, opt.threads));
        csv += metrics_csv_row(sweep_policy_id(cfg.belief.strategy), v.lambda, eps, m) + "\n";
    } else if (opt.policy == "heuristic" || opt.policy == "genie") {
        const bool heuristic = opt.policy == "heuristic";
        for (double dbm : cfg.actions.dt_powers_dbm)
            for (std::size_t t : cfg.actions.dt_durations_slots) {
                const PolicyKind policy = heuristic ? PolicyKind{HeuristicPolicy{dbm_to_watts(dbm), t}}
                                                    : PolicyKind{GeniePolicy{dbm_to_watts(dbm), t, true}};
                const Metrics m = monte_carlo_metrics(policy, pomdp, sim_params(cfg, opt.threads));
                csv += metrics_csv_row(policy_label(opt.policy.c_str(), dbm, t),
                                       std::numeric_limits<double>::quiet_NaN(), eps, m) + "\n";
            }
    } else {
        throw ConfigError("--policy", "must be solved, heuristic or genie");
    }

    const fs::path dir = prepare_output_dir(opt.out, "simulate", cfg);
    write_text((dir / "metrics.csv").string(), csv);
    announce(dir);
    return code;
}

int cmd_compare(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    const Comparison c = run_comparison(cfg, opt.threads);

    const fs::path dir = prepare_output_dir(opt.out, "compare", cfg);
    write_text((dir / "comparison.csv").string(), comparison_csv(c));
    Json doc = Json::array();
    bool converged = c.random.all_converged();
    for (const SweepRun& run : c.structured) {
        doc.push_back(sweep_json(run, BeamPomdp(cfg.model_spec(DetectionSpec::from_epsilon(run.epsilon)))));
        converged = converged && run.all_converged();
    }
    doc.push_back(sweep_json(c.random, BeamPomdp(cfg.model_spec(DetectionSpec::from_epsilon(c.random.epsilon)))));
    write_text((dir / "sweeps.json").string(), doc.dump(2) + "\n");
    announce(dir);
    return converged ? kExitOk : kExitNotConverged;
}

int cmd_beliefs(const Options& opt) {
    const ExperimentConfig cfg = effective_config(opt);
    const BeamPomdp pomdp(cfg.model_spec());
    const std::vector<Belief> beliefs = make_beliefs(cfg, pomdp);
    const fs::path dir = prepare_output_dir(opt.out, "beliefs", cfg);
    Json doc{{"strategy", to_string(cfg.belief.strategy)},
             {"num_states", pomdp.model().num_states},
             {"beliefs", beliefs_to_json(beliefs)}};
    write_text((dir / "beliefs.json").string(), doc.dump(2) + "\n");
    announce(dir);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beam alignment and data transmission planning for mobile mmWave links"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "Experiment config (JSON); defaults apply when omitted");
        sub->add_option("--seed", opt.seed, "Override sim.seed");
        sub->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", opt.out, "Output root directory");
        sub->add_option("--episodes", opt.episodes, "Override sim.episodes");
    };

    CLI::App* solve = app.add_subcommand("solve", "Solve at one multiplier and write the value function");
    add_common(solve);
    solve->add_option("--lambda", opt.lambda, "Override solver.lambda");
    CLI::App* sweep = app.add_subcommand("sweep", "Solve and simulate over the multiplier grid");
    add_common(sweep);
    CLI::App* online = app.add_subcommand("online", "Adapt the multiplier to a power budget");
    add_common(online);
    online->add_option("--lambda", opt.lambda, "Multiplier of the reference solve used when no budget is set");
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of one policy family");
    add_common(simulate);
    simulate->add_option("--lambda", opt.lambda, "Multiplier when solving in place");
    simulate->add_option("--policy", opt.policy, "solved, heuristic or genie")
        ->check(CLI::IsMember({"solved", "heuristic", "genie"}));
    simulate->add_option("--value-function", opt.value_function_path, "Value function written by solve");
    CLI::App* compare = app.add_subcommand("compare", "Solved, heuristic, genie and belief-set ablation");
    add_common(compare);
    CLI::App* beliefs = app.add_subcommand("beliefs", "Write the belief set");
    add_common(beliefs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*solve) return cmd_solve(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*online) return cmd_online(opt);
        if (*simulate) return cmd_simulate(opt);
        if (*compare) return cmd_compare(opt);
        if (*beliefs) return cmd_beliefs(opt);
    } catch (const ConfigError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const InternalConsistencyError& e) {
        std::cerr << "internal consistency error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
