#pragma once

// Experiment configuration: JSON file <-> typed settings.
//
// Field names carry their units (…_dbm, …_hz, …_slots). Every validation
// failure raises ConfigError with the dotted path of the offending field.

#include "beampomdp/belief.hpp"
#include "beampomdp/errors.hpp"
#include "beampomdp/link_budget.hpp"
#include "beampomdp/mobility.hpp"
#include "beampomdp/pomdp.hpp"
#include "beampomdp/solver.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace beampomdp {

using Json = nlohmann::ordered_json;

enum class BeliefStrategy { Structured, Random };

inline const char* to_string(BeliefStrategy s) { return s == BeliefStrategy::Structured ? "structured" : "random"; }

struct RadioSettings {
    double coverage_angle_deg = 120.0;
    double distance_m = 10.0;
    std::size_t num_sublinks = 10;
    double bandwidth_hz = 400e6;
    double carrier_frequency_hz = 60e9;
    double antenna_efficiency = 1.0;
    double noise_psd_dbm_per_hz = -174.0;
    double micro_slot_s = 10e-6;

    RadioConfig to_radio() const {
        RadioConfig r;
        r.coverage_angle = degrees_to_radians(coverage_angle_deg);
        r.distance = distance_m;
        r.num_sublinks = num_sublinks;
        r.bandwidth = bandwidth_hz;
        r.carrier_frequency = carrier_frequency_hz;
        r.antenna_efficiency = antenna_efficiency;
        r.noise_psd = dbm_to_watts(noise_psd_dbm_per_hz);
        r.micro_slot = micro_slot_s;
        return r;
    }
};

struct MobilitySettings {
    double mean_speed_m_s = 20.0;
    /// Unset means default_speed_variance(E[v], v_max).
    std::optional<double> speed_variance_m2_s2;
};

/// Either a common epsilon (P_FA = P_MD = epsilon) or explicit targets.
struct DetectionSettings {
    std::optional<double> epsilon = 1e-3;
    double p_fa = 1e-3;
    double p_md = 1e-3;

    DetectionSpec spec() const { return epsilon ? DetectionSpec::from_epsilon(*epsilon) : DetectionSpec{p_fa, p_md}; }
};

struct ActionSettings {
    std::vector<double> dt_powers_dbm{10.0, 20.0, 30.0};
    std::vector<std::size_t> dt_durations_slots{1000, 2000, 3000};
    std::size_t bt_duration_slots = 1;
};

struct SolverSettings {
    double lambda = 1e5;  ///< multiplier for a single solve
    double lambda0 = 0.0;
    double alpha0 = 100.0;
    /// C in mW x micro-slots; unset means V^c(b0) of a solve at `lambda`.
    std::optional<double> cost_budget_mw_slots;
    double eps_v = 1e-9;
    double eps_c = 0.01;
    std::size_t max_stages = 20000;
    double lambda_min = 1e5;
    double lambda_max = 1e11;
    std::size_t lambda_points = 13;
    double discount = 1.0;
};

struct SimSettings {
    std::size_t episodes = 10000;
    std::uint64_t seed = 1;
    std::size_t bootstrap_resamples = 1000;
};

struct BeliefSettings {
    BeliefStrategy strategy = BeliefStrategy::Structured;
    std::optional<std::size_t> window;      ///< W; unset means S
    std::optional<std::size_t> count;       ///< random set size; unset means the structured size
};

struct SweepSettings {
    std::vector<double> epsilons{1e-3, 1e-1};
};

struct ExperimentConfig {
    std::string name = "default";
    RadioSettings radio;
    MobilitySettings mobility;
    DetectionSettings detection;
    ActionSettings actions;
    SolverSettings solver;
    SimSettings sim;
    BeliefSettings belief;
    SweepSettings sweep;

    void validate() const;

    RadioConfig radio_config() const { return radio.to_radio(); }

    double v_max() const {
        const RadioConfig r = radio_config();
        return r.sublink_length() / r.micro_slot;
    }

    double speed_variance() const {
        return mobility.speed_variance_m2_s2.value_or(default_speed_variance(mobility.mean_speed_m_s, v_max()));
    }

    std::size_t belief_window() const { return belief.window.value_or(radio.num_sublinks); }

    std::size_t structured_count() const {
        const std::size_t s = radio.num_sublinks;
        const std::size_t w = belief_window();
        return w * (2 * s + 1 - w) / 2;
    }

    std::size_t belief_count() const { return belief.count.value_or(structured_count()); }

    std::vector<double> lambda_grid() const {
        return SolverParams::log_grid(solver.lambda_min, solver.lambda_max, solver.lambda_points);
    }

    /// Model inputs, optionally with a different detection target.
    BeamModelSpec model_spec(std::optional<DetectionSpec> detection_override = std::nullopt) const {
        BeamModelSpec spec;
        spec.radio = radio_config();
        spec.detection = detection_override.value_or(detection.spec());
        spec.mobility = MobilityParams::from_speed(mobility.mean_speed_m_s, speed_variance(), v_max());
        for (double dbm : actions.dt_powers_dbm) spec.dt_powers.push_back(dbm_to_watts(dbm));
        spec.dt_durations = actions.dt_durations_slots;
        spec.bt_duration = actions.bt_duration_slots;
        return spec;
    }

    SolverParams solver_params(std::size_t threads = 1) const {
        SolverParams p;
        p.lambda0 = solver.lambda0;
        p.alpha0 = solver.alpha0;
        p.cost_budget = solver.cost_budget_mw_slots.value_or(0.0);
        p.eps_v = solver.eps_v;
        p.eps_c = solver.eps_c;
        p.max_stages = solver.max_stages;
        p.lambda_grid = lambda_grid();
        p.seed = sim.seed;
        p.discount = solver.discount;
        p.threads = threads;
        return p;
    }
};

namespace detail {

template <class T>
T read_field(const Json& obj, const std::string& section, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    const std::string path = section + "." + key;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError(path, "expected a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
        }
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path, e.what());
    }
}

template <class T>
std::optional<T> read_optional(const Json& obj, const std::string& section, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return read_field<T>(obj, section, key, T{});
}

template <class T>
std::vector<T> read_list(const Json& obj, const std::string& section, const char* key, std::vector<T> fallback) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    const std::string path = section + "." + key;
    if (!v.is_array()) throw ConfigError(path, "expected a list");
    std::vector<T> out;
    for (const Json& item : v) {
        if constexpr (std::is_floating_point_v<T>) {
            if (!item.is_number()) throw ConfigError(path, "expected numbers");
        } else {
            if (!item.is_number_unsigned()) throw ConfigError(path, "expected non-negative integers");
        }
        out.push_back(item.get<T>());
    }
    return out;
}

inline const Json& section(const Json& root, const char* key) {
    static const Json empty = Json::object();
    if (!root.contains(key)) return empty;
    const Json& s = root.at(key);
    if (!s.is_object()) throw ConfigError(key, "expected an object");
    return s;
}

inline void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw ConfigError(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
    }
}

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

} // namespace detail

inline ExperimentConfig config_from_json(const Json& root) {
    using namespace detail;
    if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
    reject_unknown(root, "", {"name", "radio", "mobility", "detection", "actions", "solver", "sim", "belief", "sweep"});
    ExperimentConfig c;
    c.name = read_field<std::string>(root, "", "name", c.name);

    const Json& r = section(root, "radio");
    reject_unknown(r, "radio", {"coverage_angle_deg", "distance_m", "num_sublinks", "bandwidth_hz",
                                "carrier_frequency_hz", "antenna_efficiency", "noise_psd_dbm_per_hz", "micro_slot_s"});
    c.radio.coverage_angle_deg = read_field(r, "radio", "coverage_angle_deg", c.radio.coverage_angle_deg);
    c.radio.distance_m = read_field(r, "radio", "distance_m", c.radio.distance_m);
    c.radio.num_sublinks = read_field(r, "radio", "num_sublinks", c.radio.num_sublinks);
    c.radio.bandwidth_hz = read_field(r, "radio", "bandwidth_hz", c.radio.bandwidth_hz);
    c.radio.carrier_frequency_hz = read_field(r, "radio", "carrier_frequency_hz", c.radio.carrier_frequency_hz);
    c.radio.antenna_efficiency = read_field(r, "radio", "antenna_efficiency", c.radio.antenna_efficiency);
    c.radio.noise_psd_dbm_per_hz = read_field(r, "radio", "noise_psd_dbm_per_hz", c.radio.noise_psd_dbm_per_hz);
    c.radio.micro_slot_s = read_field(r, "radio", "micro_slot_s", c.radio.micro_slot_s);

    const Json& m = section(root, "mobility");
    reject_unknown(m, "mobility", {"mean_speed_m_s", "speed_variance_m2_s2"});
    c.mobility.mean_speed_m_s = read_field(m, "mobility", "mean_speed_m_s", c.mobility.mean_speed_m_s);
    c.mobility.speed_variance_m2_s2 = read_optional<double>(m, "mobility", "speed_variance_m2_s2");

    const Json& d = section(root, "detection");
    reject_unknown(d, "detection", {"epsilon", "p_fa", "p_md"});
    if (d.contains("p_fa") || d.contains("p_md")) {
        if (d.contains("epsilon") && !d.at("epsilon").is_null())
            throw ConfigError("detection.epsilon", "give either epsilon or p_fa/p_md, not both");
        c.detection.epsilon.reset();
        c.detection.p_fa = read_field(d, "detection", "p_fa", c.detection.p_fa);
        c.detection.p_md = read_field(d, "detection", "p_md", c.detection.p_md);
    } else if (d.contains("epsilon")) {
        c.detection.epsilon = read_field<double>(d, "detection", "epsilon", 0.0);
    }

    const Json& a = section(root, "actions");
    reject_unknown(a, "actions", {"dt_powers_dbm", "dt_durations_slots", "bt_duration_slots"});
    c.actions.dt_powers_dbm = read_list(a, "actions", "dt_powers_dbm", c.actions.dt_powers_dbm);
    c.actions.dt_durations_slots = read_list(a, "actions", "dt_durations_slots", c.actions.dt_durations_slots);
    c.actions.bt_duration_slots = read_field(a, "actions", "bt_duration_slots", c.actions.bt_duration_slots);

    const Json& s = section(root, "solver");
    reject_unknown(s, "solver", {"lambda", "lambda0", "alpha0", "cost_budget_mw_slots", "eps_v", "eps_c", "max_stages",
                                 "lambda_min", "lambda_max", "lambda_points", "discount"});
    c.solver.lambda = read_field(s, "solver", "lambda", c.solver.lambda);
    c.solver.lambda0 = read_field(s, "solver", "lambda0", c.solver.lambda0);
    c.solver.alpha0 = read_field(s, "solver", "alpha0", c.solver.alpha0);
    c.solver.cost_budget_mw_slots = read_optional<double>(s, "solver", "cost_budget_mw_slots");
    c.solver.eps_v = read_field(s, "solver", "eps_v", c.solver.eps_v);
    c.solver.eps_c = read_field(s, "solver", "eps_c", c.solver.eps_c);
    c.solver.max_stages = read_field(s, "solver", "max_stages", c.solver.max_stages);
    c.solver.lambda_min = read_field(s, "solver", "lambda_min", c.solver.lambda_min);
    c.solver.lambda_max = read_field(s, "solver", "lambda_max", c.solver.lambda_max);
    c.solver.lambda_points = read_field(s, "solver", "lambda_points", c.solver.lambda_points);
    c.solver.discount = read_field(s, "solver", "discount", c.solver.discount);

    const Json& sim = section(root, "sim");
    reject_unknown(sim, "sim", {"episodes", "seed", "bootstrap_resamples"});
    c.sim.episodes = read_field(sim, "sim", "episodes", c.sim.episodes);
    c.sim.seed = read_field(sim, "sim", "seed", c.sim.seed);
    c.sim.bootstrap_resamples = read_field(sim, "sim", "bootstrap_resamples", c.sim.bootstrap_resamples);

    const Json& b = section(root, "belief");
    reject_unknown(b, "belief", {"strategy", "window", "count"});
    const std::string strategy = read_field<std::string>(b, "belief", "strategy", "structured");
    if (strategy == "structured")
        c.belief.strategy = BeliefStrategy::Structured;
    else if (strategy == "random")
        c.belief.strategy = BeliefStrategy::Random;
    else
        throw ConfigError("belief.strategy", "must be \"structured\" or \"random\"");
    c.belief.window = read_optional<std::size_t>(b, "belief", "window");
    c.belief.count = read_optional<std::size_t>(b, "belief", "count");

    const Json& sw = section(root, "sweep");
    reject_unknown(sw, "sweep", {"epsilons"});
    c.sweep.epsilons = read_list(sw, "sweep", "epsilons", c.sweep.epsilons);

    c.validate();
    return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
    using detail::optional_json;
    Json detection = Json::object();
    if (c.detection.epsilon) {
        detection["epsilon"] = *c.detection.epsilon;
    } else {
        detection["p_fa"] = c.detection.p_fa;
        detection["p_md"] = c.detection.p_md;
    }
    return Json{
        {"name", c.name},
        {"radio",
         {{"coverage_angle_deg", c.radio.coverage_angle_deg},
          {"distance_m", c.radio.distance_m},
          {"num_sublinks", c.radio.num_sublinks},
          {"bandwidth_hz", c.radio.bandwidth_hz},
          {"carrier_frequency_hz", c.radio.carrier_frequency_hz},
          {"antenna_efficiency", c.radio.antenna_efficiency},
          {"noise_psd_dbm_per_hz", c.radio.noise_psd_dbm_per_hz},
          {"micro_slot_s", c.radio.micro_slot_s}}},
        {"mobility",
         {{"mean_speed_m_s", c.mobility.mean_speed_m_s},
          {"speed_variance_m2_s2", optional_json(c.mobility.speed_variance_m2_s2)}}},
        {"detection", detection},
        {"actions",
         {{"dt_powers_dbm", c.actions.dt_powers_dbm},
          {"dt_durations_slots", c.actions.dt_durations_slots},
          {"bt_duration_slots", c.actions.bt_duration_slots}}},
        {"solver",
         {{"lambda", c.solver.lambda},
          {"lambda0", c.solver.lambda0},
          {"alpha0", c.solver.alpha0},
          {"cost_budget_mw_slots", optional_json(c.solver.cost_budget_mw_slots)},
          {"eps_v", c.solver.eps_v},
          {"eps_c", c.solver.eps_c},
          {"max_stages", c.solver.max_stages},
          {"lambda_min", c.solver.lambda_min},
          {"lambda_max", c.solver.lambda_max},
          {"lambda_points", c.solver.lambda_points},
          {"discount", c.solver.discount}}},
        {"sim",
         {{"episodes", c.sim.episodes}, {"seed", c.sim.seed}, {"bootstrap_resamples", c.sim.bootstrap_resamples}}},
        {"belief",
         {{"strategy", to_string(c.belief.strategy)},
          {"window", optional_json(c.belief.window)},
          {"count", optional_json(c.belief.count)}}},
        {"sweep", {{"epsilons", c.sweep.epsilons}}},
    };
}

inline void ExperimentConfig::validate() const {
    const auto positive = [](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be a positive finite number");
    };
    if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
        throw ConfigError("name", "must be a non-empty plain directory name");

    if (!(radio.coverage_angle_deg > 0.0 && radio.coverage_angle_deg < 180.0))
        throw ConfigError("radio.coverage_angle_deg", "must lie strictly between 0 and 180");
    positive(radio.distance_m, "radio.distance_m");
    if (radio.num_sublinks < 1) throw ConfigError("radio.num_sublinks", "must be at least 1");
    positive(radio.bandwidth_hz, "radio.bandwidth_hz");
    positive(radio.carrier_frequency_hz, "radio.carrier_frequency_hz");
    if (!(radio.antenna_efficiency > 0.0 && radio.antenna_efficiency <= 1.0))
        throw ConfigError("radio.antenna_efficiency", "must lie in (0, 1]");
    if (!std::isfinite(radio.noise_psd_dbm_per_hz)) throw ConfigError("radio.noise_psd_dbm_per_hz", "must be finite");
    positive(radio.micro_slot_s, "radio.micro_slot_s");

    positive(mobility.mean_speed_m_s, "mobility.mean_speed_m_s");
    const auto verdict = check_feasible(mobility.mean_speed_m_s, speed_variance(), v_max());
    if (!verdict) {
        const char* field = mobility.speed_variance_m2_s2 ? "mobility.speed_variance_m2_s2" : "mobility.mean_speed_m_s";
        throw ConfigError(field, "infeasible speed statistics, violates " + verdict.failed_constraint);
    }

    if (detection.epsilon) {
        if (!(*detection.epsilon > 0.0 && *detection.epsilon < 1.0))
            throw ConfigError("detection.epsilon", "must lie strictly in (0, 1)");
    } else {
        detection.spec().validate();
    }

    if (actions.dt_powers_dbm.empty()) throw ConfigError("actions.dt_powers_dbm", "must not be empty");
    for (double p : actions.dt_powers_dbm)
        if (!std::isfinite(p)) throw ConfigError("actions.dt_powers_dbm", "powers must be finite");
    if (actions.dt_durations_slots.empty()) throw ConfigError("actions.dt_durations_slots", "must not be empty");
    for (std::size_t d : actions.dt_durations_slots)
        if (d < 2) throw ConfigError("actions.dt_durations_slots", "DT needs at least one data slot plus feedback");
    if (actions.bt_duration_slots != 1)
        throw ConfigError("actions.bt_duration_slots", "only single-slot beam training is supported");

    if (!(solver.lambda >= 0.0)) throw ConfigError("solver.lambda", "must be non-negative");
    if (!(solver.lambda0 >= 0.0)) throw ConfigError("solver.lambda0", "must be non-negative");
    if (!(solver.alpha0 >= 0.0)) throw ConfigError("solver.alpha0", "must be non-negative");
    if (solver.cost_budget_mw_slots) positive(*solver.cost_budget_mw_slots, "solver.cost_budget_mw_slots");
    positive(solver.eps_v, "solver.eps_v");
    positive(solver.eps_c, "solver.eps_c");
    if (solver.max_stages < 1) throw ConfigError("solver.max_stages", "must be at least 1");
    positive(solver.lambda_min, "solver.lambda_min");
    positive(solver.lambda_max, "solver.lambda_max");
    if (solver.lambda_max < solver.lambda_min) throw ConfigError("solver.lambda_max", "must be at least lambda_min");
    if (solver.lambda_points < 1) throw ConfigError("solver.lambda_points", "must be at least 1");
    if (!(solver.discount > 0.0 && solver.discount <= 1.0)) throw ConfigError("solver.discount", "must lie in (0, 1]");

    if (sim.episodes < 1) throw ConfigError("sim.episodes", "must be at least 1");

    if (belief.window && (*belief.window < 1 || *belief.window > radio.num_sublinks))
        throw ConfigError("belief.window", "must lie in 1..num_sublinks");
    if (belief.count && *belief.count < 1) throw ConfigError("belief.count", "must be at least 1");

    for (double e : sweep.epsilons)
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("sweep.epsilons", "each epsilon must lie strictly in (0, 1)");
}

inline ExperimentConfig parse_config(const std::string& text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(root);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline std::string dump_config(const ExperimentConfig& c) { return config_to_json(c).dump(2) + "\n"; }

} // namespace beampomdp
