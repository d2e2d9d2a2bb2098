#pragma once

// JSON and CSV serialization of value functions, belief sets, solver
// diagnostics and simulation metrics. Output is byte-stable: fixed key order,
// shortest round-trip doubles in JSON and 9 significant digits in CSV.

#include "beampomdp/belief.hpp"
#include "beampomdp/config.hpp"
#include "beampomdp/sim.hpp"
#include "beampomdp/solver.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace beampomdp {

inline Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Vector vector_from_json(const Json& j, std::size_t expected_size, const std::string& what) {
    if (!j.is_array() || j.size() != expected_size)
        throw ConfigError(what, "expected a list of " + std::to_string(expected_size) + " numbers");
    Vector v(static_cast<Eigen::Index>(expected_size));
    for (std::size_t i = 0; i < expected_size; ++i) {
        if (!j[i].is_number()) throw ConfigError(what, "expected numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Json action_to_json(const ActionSpec& a) {
    return Json{{"class", to_string(a.cls)},
                {"first", a.support.first},
                {"last", a.support.last},
                {"power_per_beam_w", a.power_per_beam},
                {"duration_slots", a.duration}};
}

inline Json value_function_to_json(const ValueFunction& v, const PomdpModel& model) {
    Json alphas = Json::array();
    for (const AlphaVector& a : v.alphas)
        alphas.push_back(Json{{"action_index", a.action},
                              {"action", action_to_json(model.actions.at(a.action))},
                              {"values", vector_to_json(a.values)},
                              {"reward", vector_to_json(a.reward)},
                              {"cost", vector_to_json(a.cost)}});
    return Json{{"lambda", v.lambda}, {"num_states", model.num_states}, {"alphas", alphas}};
}

/// Inverse of value_function_to_json; action tags are checked against `model`.
inline ValueFunction value_function_from_json(const Json& j, const PomdpModel& model) {
    if (!j.is_object() || !j.contains("alphas") || !j.contains("lambda"))
        throw ConfigError("value_function", "expected an object with lambda and alphas");
    ValueFunction v;
    v.lambda = j.at("lambda").get<double>();
    const Json& alphas = j.at("alphas");
    if (!alphas.is_array() || alphas.empty()) throw ConfigError("value_function.alphas", "must be a non-empty list");
    for (const Json& a : alphas) {
        AlphaVector alpha;
        alpha.action = a.at("action_index").get<std::size_t>();
        if (alpha.action >= model.num_actions())
            throw ConfigError("value_function.alphas", "action index outside the model");
        if (a.contains("action") && action_to_json(model.actions[alpha.action]) != a.at("action"))
            throw ConfigError("value_function.alphas", "action does not match the configured model");
        alpha.values = vector_from_json(a.at("values"), model.num_states, "value_function.alphas.values");
        alpha.reward = vector_from_json(a.at("reward"), model.num_states, "value_function.alphas.reward");
        alpha.cost = vector_from_json(a.at("cost"), model.num_states, "value_function.alphas.cost");
        v.alphas.push_back(std::move(alpha));
    }
    return v;
}

inline Json beliefs_to_json(const std::vector<Belief>& beliefs) {
    Json out = Json::array();
    for (const Belief& b : beliefs) out.push_back(vector_to_json(b.probs));
    return out;
}

inline std::vector<Belief> beliefs_from_json(const Json& j, std::size_t num_states) {
    if (!j.is_array()) throw ConfigError("beliefs", "expected a list");
    std::vector<Belief> out;
    for (const Json& b : j) out.emplace_back(vector_from_json(b, num_states, "beliefs"));
    return out;
}

inline Json stage_to_json(const StageRecord& s) {
    return Json{{"stage", s.stage},
                {"lambda", s.lambda},
                {"value_b0", s.value_b0},
                {"reward_b0", s.reward_b0},
                {"cost_b0", s.cost_b0},
                {"belief_value_sum", s.belief_value_sum},
                {"num_vectors", s.num_vectors},
                {"num_backups", s.num_backups},
                {"value_converged", s.value_converged}};
}

/// printf("%.9g"), with inf/nan spelled the same everywhere.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

inline const char* kMetricsCsvHeader =
    "policy_id,lambda,epsilon,avg_rate_bps,avg_power_dbm,avg_duration_slots,ci_rate,ci_power,episodes,seed";

/// One CSV row in the metrics schema. `lambda` is NaN for policies without one
/// and is then left empty.
inline std::string metrics_csv_row(const std::string& policy_id, double lambda, double epsilon, const Metrics& m) {
    std::ostringstream row;
    row << policy_id << ',' << (std::isnan(lambda) ? std::string() : format_number(lambda)) << ','
        << format_number(epsilon) << ',' << format_number(m.avg_rate_bps) << ',' << format_number(m.avg_power_dbm)
        << ',' << format_number(m.avg_duration_slots) << ',' << format_number(m.ci_rate) << ','
        << format_number(m.ci_power) << ',' << m.episodes << ',' << m.seed;
    return row.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace beampomdp
