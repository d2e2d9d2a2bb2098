#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite: model and belief-set construction, λ sweeps with Monte Carlo
// evaluation, the online multiplier run and the policy comparison.

#include "beampomdp/belief.hpp"
#include "beampomdp/config.hpp"
#include "beampomdp/io.hpp"
#include "beampomdp/pomdp.hpp"
#include "beampomdp/sim.hpp"
#include "beampomdp/solver.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace beampomdp {

inline std::string policy_label(const char* kind, double power_dbm, std::size_t duration) {
    return std::string(kind) + "-P" + format_number(power_dbm) + "dBm-T" + std::to_string(duration);
}

/// Belief set for `strategy`; random sets use `count` beliefs seeded by the sim seed.
inline std::vector<Belief> make_beliefs(const ExperimentConfig& cfg, const BeamPomdp& pomdp,
                                        BeliefStrategy strategy, std::size_t count) {
    if (strategy == BeliefStrategy::Structured)
        return structured_belief_set(cfg.radio.num_sublinks, cfg.belief_window());
    return random_belief_set(pomdp.model(), initial_belief(cfg.radio.num_sublinks), count, cfg.sim.seed);
}

inline std::vector<Belief> make_beliefs(const ExperimentConfig& cfg, const BeamPomdp& pomdp) {
    return make_beliefs(cfg, pomdp, cfg.belief.strategy, cfg.belief_count());
}

inline SimParams sim_params(const ExperimentConfig& cfg, std::size_t threads) {
    return {cfg.sim.episodes, cfg.sim.seed, cfg.sim.bootstrap_resamples, threads};
}

/// Model-based average rate and power of a solution at b0, V^r/D and V^c/D.
struct PredictedMetrics {
    double rate_bps = 0.0;
    double power_dbm = 0.0;
};

inline PredictedMetrics predicted_metrics(double reward_b0, double cost_b0, const BeamPomdp& pomdp) {
    const double d = expected_episode_duration(pomdp.one_step());
    return {reward_b0 / d, cost_b0 > 0.0 ? milliwatts_to_dbm(cost_b0 / d) : -std::numeric_limits<double>::infinity()};
}

struct SweepPoint {
    double epsilon = 0.0;
    SolveResult solve;
    Metrics metrics;
};

struct SweepRun {
    double epsilon = 0.0;
    BeliefStrategy strategy = BeliefStrategy::Structured;
    std::size_t num_beliefs = 0;
    std::vector<SweepPoint> points;
    std::optional<std::size_t> best;

    bool all_converged() const {
        for (const SweepPoint& p : points)
            if (!p.solve.converged) return false;
        return true;
    }
};

/// Sweeps the configured λ grid at detection target `epsilon` and simulates
/// every solution.
inline SweepRun run_sweep(const ExperimentConfig& cfg, double epsilon, BeliefStrategy strategy,
                          std::size_t belief_count, std::size_t threads) {
    const BeamPomdp pomdp(cfg.model_spec(DetectionSpec::from_epsilon(epsilon)));
    const std::vector<Belief> beliefs = make_beliefs(cfg, pomdp, strategy, belief_count);
    const PointBasedSolver solver(pomdp.model(), cfg.solver.discount);
    const SweepResult sweep = solver.sweep(beliefs, initial_belief(cfg.radio.num_sublinks), cfg.solver_params(threads));

    SweepRun run{epsilon, strategy, beliefs.size(), {}, sweep.best};
    for (const SolveResult& r : sweep.points) {
        SweepPoint point{epsilon, r, {}};
        point.metrics = monte_carlo_metrics(SolvedPolicy{&point.solve.value_function}, pomdp, sim_params(cfg, threads));
        run.points.push_back(std::move(point));
    }
    return run;
}

struct BaselineResult {
    std::string policy_id;
    double epsilon = 0.0;
    double power_dbm = 0.0;
    std::size_t duration = 0;
    Metrics metrics;
};

/// The heuristic for every configured (P_DT, T_DT) pair.
inline std::vector<BaselineResult> run_heuristics(const ExperimentConfig& cfg, double epsilon, std::size_t threads,
                                                  HeuristicFallback fallback = HeuristicFallback::ExpandingRing) {
    const BeamPomdp pomdp(cfg.model_spec(DetectionSpec::from_epsilon(epsilon)));
    std::vector<BaselineResult> out;
    for (double dbm : cfg.actions.dt_powers_dbm)
        for (std::size_t t : cfg.actions.dt_durations_slots) {
            const HeuristicPolicy policy{dbm_to_watts(dbm), t, fallback};
            out.push_back({policy_label("heuristic", dbm, t), epsilon, dbm, t,
                           monte_carlo_metrics(policy, pomdp, sim_params(cfg, threads))});
        }
    return out;
}

/// The genie for every configured (P_DT, T_DT) pair.
inline std::vector<BaselineResult> run_genies(const ExperimentConfig& cfg, double epsilon, std::size_t threads) {
    const BeamPomdp pomdp(cfg.model_spec(DetectionSpec::from_epsilon(epsilon)));
    std::vector<BaselineResult> out;
    for (double dbm : cfg.actions.dt_powers_dbm)
        for (std::size_t t : cfg.actions.dt_durations_slots) {
            const GeniePolicy policy{dbm_to_watts(dbm), t, true};
            out.push_back({policy_label("genie", dbm, t), epsilon, dbm, t,
                           monte_carlo_metrics(policy, pomdp, sim_params(cfg, threads))});
        }
    return out;
}

struct OnlineRun {
    double cost_budget = 0.0;
    OnlineResult result;
    PredictedMetrics final_metrics;
};

/// Online multiplier adaptation. Without a configured budget, C is V^c(b0)
/// of a fixed-λ solve at `solver.lambda`.
inline OnlineRun run_online(const ExperimentConfig& cfg, std::size_t threads) {
    const BeamPomdp pomdp(cfg.model_spec());
    const std::vector<Belief> beliefs = make_beliefs(cfg, pomdp);
    const PointBasedSolver solver(pomdp.model(), cfg.solver.discount);
    const Belief b0 = initial_belief(cfg.radio.num_sublinks);
    SolverParams params = cfg.solver_params(threads);
    if (!cfg.solver.cost_budget_mw_slots) {
        const SolveResult ref = solver.solve(beliefs, b0, cfg.solver.lambda, params, 0);
        params.cost_budget = ref.cost_b0;
    }
    if (!(params.cost_budget > 0.0))
        throw ConfigError("solver.cost_budget_mw_slots", "the derived budget is zero; set it explicitly");
    OnlineRun run;
    run.cost_budget = params.cost_budget;
    run.result = solver.online(beliefs, b0, params);
    run.final_metrics = predicted_metrics(run.result.reward_b0, run.result.cost_b0, pomdp);
    return run;
}

struct Comparison {
    std::vector<SweepRun> structured; ///< one per sweep epsilon
    SweepRun random;                  ///< ablation at the first sweep epsilon
    std::vector<BaselineResult> heuristics;
    std::vector<BaselineResult> genies;
};

inline Comparison run_comparison(const ExperimentConfig& cfg, std::size_t threads) {
    if (cfg.sweep.epsilons.empty()) throw ConfigError("sweep.epsilons", "must not be empty");
    Comparison c;
    for (double eps : cfg.sweep.epsilons) {
        c.structured.push_back(run_sweep(cfg, eps, BeliefStrategy::Structured, cfg.structured_count(), threads));
        for (auto& h : run_heuristics(cfg, eps, threads)) c.heuristics.push_back(std::move(h));
        for (auto& g : run_genies(cfg, eps, threads)) c.genies.push_back(std::move(g));
    }
    c.random = run_sweep(cfg, cfg.sweep.epsilons.front(), BeliefStrategy::Random, c.structured.front().num_beliefs,
                         threads);
    return c;
}

// Artifact writers ----------------------------------------------------------

inline std::string sweep_policy_id(BeliefStrategy strategy) {
    return std::string("pbvi-") + to_string(strategy);
}

inline std::string sweep_csv(const std::vector<const SweepRun*>& runs) {
    std::string out = std::string(kMetricsCsvHeader) + "\n";
    for (const SweepRun* run : runs)
        for (const SweepPoint& p : run->points)
            out += metrics_csv_row(sweep_policy_id(run->strategy), p.solve.lambda, p.epsilon, p.metrics) + "\n";
    return out;
}

inline std::string baseline_csv_rows(const std::vector<BaselineResult>& rows) {
    std::string out;
    for (const BaselineResult& r : rows)
        out += metrics_csv_row(r.policy_id, std::numeric_limits<double>::quiet_NaN(), r.epsilon, r.metrics) + "\n";
    return out;
}

inline std::string comparison_csv(const Comparison& c) {
    std::vector<const SweepRun*> runs;
    for (const SweepRun& r : c.structured) runs.push_back(&r);
    runs.push_back(&c.random);
    return sweep_csv(runs) + baseline_csv_rows(c.heuristics) + baseline_csv_rows(c.genies);
}

inline Json solve_summary_json(const SolveResult& r, const BeamPomdp& pomdp) {
    const PredictedMetrics m = predicted_metrics(r.reward_b0, r.cost_b0, pomdp);
    return Json{{"lambda", r.lambda},
                {"converged", r.converged},
                {"stages", r.stages.size()},
                {"value_b0", r.value_b0},
                {"reward_b0", r.reward_b0},
                {"cost_b0_mw_slots", r.cost_b0},
                {"predicted_rate_bps", m.rate_bps},
                {"predicted_power_dbm", std::isfinite(m.power_dbm) ? Json(m.power_dbm) : Json(nullptr)},
                {"num_vectors", r.value_function.alphas.size()}};
}

inline Json sweep_json(const SweepRun& run, const BeamPomdp& pomdp) {
    Json points = Json::array();
    for (const SweepPoint& p : run.points) points.push_back(solve_summary_json(p.solve, pomdp));
    return Json{{"epsilon", run.epsilon},
                {"belief_strategy", to_string(run.strategy)},
                {"num_beliefs", run.num_beliefs},
                {"best_index", run.best ? Json(*run.best) : Json(nullptr)},
                {"best_lambda", run.best ? Json(run.points[*run.best].solve.lambda) : Json(nullptr)},
                {"points", points}};
}

inline std::string trajectory_csv(const OnlineResult& r, const BeamPomdp& pomdp) {
    std::string out = "stage,lambda,value_b0,reward_b0,cost_b0,avg_rate_bps,avg_power_dbm,num_vectors,value_converged\n";
    for (const StageRecord& s : r.trajectory) {
        const PredictedMetrics m = predicted_metrics(s.reward_b0, s.cost_b0, pomdp);
        out += std::to_string(s.stage) + ',' + format_number(s.lambda) + ',' + format_number(s.value_b0) + ',' +
               format_number(s.reward_b0) + ',' + format_number(s.cost_b0) + ',' + format_number(m.rate_bps) + ',' +
               format_number(m.power_dbm) + ',' + std::to_string(s.num_vectors) + ',' +
               (s.value_converged ? "1" : "0") + "\n";
    }
    return out;
}

/// results/<command>/<name>/ under `root`, created on demand, with the
/// effective config written next to the outputs.
inline std::filesystem::path prepare_output_dir(const std::filesystem::path& root, const std::string& command,
                                                const ExperimentConfig& cfg) {
    const std::filesystem::path dir = root / command / cfg.name;
    std::filesystem::create_directories(dir);
    write_text((dir / "config.json").string(), dump_config(cfg));
    return dir;
}

} // namespace beampomdp
