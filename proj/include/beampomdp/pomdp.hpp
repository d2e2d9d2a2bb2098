#pragma once

// Constrained POMDP for beam training (BT) versus data transmission (DT).
//
// PomdpModel is a plain tabular container the belief filter and the solver
// work on; BeamPomdp fills one in from the link budget and mobility model.
//
// Units of the tables:
//   reward  (bit/s) x micro-slots, i.e. rate times the number of data slots.
//           Dividing an episode total by the episode duration in micro-slots
//           gives an average rate in bit/s.
//   cost    mW x micro-slots. Dividing by the duration gives mW, hence dBm.

#include "beampomdp/link_budget.hpp"
#include "beampomdp/mobility.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace beampomdp {

enum class ActionClass { BeamTraining, DataTransmission };

inline const char* to_string(ActionClass c) {
    return c == ActionClass::BeamTraining ? "BT" : "DT";
}

struct ActionSpec {
    ActionClass cls = ActionClass::BeamTraining;
    Support support;
    double power_per_beam = 0.0; ///< W
    std::size_t duration = 1;    ///< micro-slots

    bool is_bt() const { return cls == ActionClass::BeamTraining; }
    bool is_dt() const { return cls == ActionClass::DataTransmission; }
    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

enum class Observation : std::size_t { Ack = 0, Nack = 1, Exit = 2 };
inline constexpr std::size_t kNumObservations = 3;

inline const char* to_string(Observation o) {
    switch (o) {
    case Observation::Ack: return "ACK";
    case Observation::Nack: return "NACK";
    case Observation::Exit: return "EXIT";
    }
    return "?";
}

/**
 * Tabular POMDP.
 *
 * `kernel[a][o](s, s')` holds the joint P(o | s, a, s') P(s' | s, a), which is
 * all the Bayes filter and the point-based backup ever need. Summing the
 * kernels over o gives back `transition[a]`.
 */
struct PomdpModel {
    std::size_t num_states = 0;
    std::size_t num_observations = 0;
    std::vector<ActionSpec> actions;
    std::vector<Matrix> transition;
    std::vector<std::vector<Matrix>> kernel;
    Matrix reward; ///< num_states x num_actions
    Matrix cost;   ///< num_states x num_actions
    /// Absorbing terminal state, if any; trajectories restart when they reach it.
    std::optional<std::size_t> exit_state;

    std::size_t num_actions() const { return actions.size(); }

    /// Structural checks: shapes, stochastic transitions, kernels summing to
    /// the transitions over observations.
    void validate(double tol = 1e-12) const {
        const auto n = static_cast<Eigen::Index>(num_states);
        if (transition.size() != num_actions() || kernel.size() != num_actions())
            throw InternalConsistencyError("model tables disagree on the action count");
        if (reward.rows() != n || cost.rows() != n ||
            reward.cols() != static_cast<Eigen::Index>(num_actions()) ||
            cost.cols() != static_cast<Eigen::Index>(num_actions()))
            throw InternalConsistencyError("reward/cost tables have the wrong shape");
        for (std::size_t a = 0; a < num_actions(); ++a) {
            const Matrix& t = transition[a];
            if (t.rows() != n || t.cols() != n)
                throw InternalConsistencyError("transition matrix has the wrong shape");
            if ((t.array() < 0.0).any() || stochastic_drift(t) > 1e-9)
                throw InternalConsistencyError("transition matrix is not row-stochastic");
            if (kernel[a].size() != num_observations)
                throw InternalConsistencyError("kernel count differs from the observation count");
            Matrix sum = Matrix::Zero(n, n);
            for (const Matrix& k : kernel[a]) {
                if ((k.array() < 0.0).any())
                    throw InternalConsistencyError("negative observation kernel entry");
                sum += k;
            }
            if ((sum - t).cwiseAbs().maxCoeff() > tol)
                throw InternalConsistencyError("observation kernels do not sum to the transition");
        }
    }
};

/// All BT and DT actions over consecutive supports, in canonical order:
/// class (BT first), then support first, support last, power, duration.
inline std::vector<ActionSpec> enumerate_actions(std::size_t num_sublinks, double bt_power_per_beam,
                                                 std::size_t bt_duration,
                                                 const std::vector<double>& dt_powers,
                                                 const std::vector<std::size_t>& dt_durations) {
    if (num_sublinks < 1) throw ConfigError("radio.num_sublinks", "must be at least 1");
    if (dt_powers.empty()) throw ConfigError("actions.dt_powers_dbm", "must not be empty");
    if (dt_durations.empty()) throw ConfigError("actions.dt_durations_slots", "must not be empty");
    std::vector<double> powers = dt_powers;
    std::vector<std::size_t> durations = dt_durations;
    std::sort(powers.begin(), powers.end());
    std::sort(durations.begin(), durations.end());

    std::vector<ActionSpec> out;
    for (std::size_t lo = 1; lo <= num_sublinks; ++lo)
        for (std::size_t hi = lo; hi <= num_sublinks; ++hi)
            out.push_back({ActionClass::BeamTraining, {lo, hi}, bt_power_per_beam, bt_duration});
    for (std::size_t lo = 1; lo <= num_sublinks; ++lo)
        for (std::size_t hi = lo; hi <= num_sublinks; ++hi)
            for (double pw : powers)
                for (std::size_t d : durations)
                    out.push_back({ActionClass::DataTransmission, {lo, hi}, pw, d});
    return out;
}

/// Everything needed to assemble the beam-alignment POMDP.
struct BeamModelSpec {
    RadioConfig radio;
    DetectionSpec detection;
    MobilityParams mobility;
    std::vector<double> dt_powers;         ///< per-beam DT power, W
    std::vector<std::size_t> dt_durations; ///< micro-slots, the last one carries feedback
    std::size_t bt_duration = 1;

    void validate() const {
        radio.validate();
        detection.validate();
        if (bt_duration != 1)
            throw ConfigError("actions.bt_duration_slots",
                              "only single-slot beam training is supported");
        for (double pw : dt_powers)
            if (!(pw > 0.0)) throw ConfigError("actions.dt_powers_dbm", "powers must be finite");
        for (std::size_t d : dt_durations)
            if (d < 2)
                throw ConfigError("actions.dt_durations_slots",
                                  "DT needs at least one data slot plus the feedback slot");
    }
};

/**
 * The beam-alignment POMDP over states {1..S, exit}.
 *
 * Sub-link arguments are 1-based with S+1 denoting the exit state; action
 * arguments index `actions()`.
 */
class BeamPomdp {
public:
    explicit BeamPomdp(BeamModelSpec spec)
        : spec_(std::move(spec)),
          powers_(std::make_shared<MatrixPowerCache>(
              (spec_.validate(), one_step_matrix(spec_.mobility.p, spec_.mobility.q,
                                                 spec_.radio.num_sublinks)))) {
        p_min_ = min_bt_power(spec_.radio, spec_.detection);
        build();
    }

    const BeamModelSpec& spec() const { return spec_; }
    const PomdpModel& model() const { return model_; }
    const std::vector<ActionSpec>& actions() const { return model_.actions; }
    std::size_t num_sublinks() const { return spec_.radio.num_sublinks; }
    std::size_t exit_sublink() const { return spec_.radio.num_sublinks + 1; }
    const Matrix& one_step() const { return powers_->base(); }
    MatrixPowerCache& powers() const { return *powers_; }

    /// Per-beam beam-training power P_min, W.
    double bt_power() const { return p_min_; }

    /// DT rate in bit/s; zero for BT actions.
    double rate(std::size_t a) const { return rates_.at(a); }

    /// Index of an action by its attributes; throws if absent.
    std::size_t action_index(const ActionSpec& spec) const {
        const auto it = index_.find(key(spec));
        if (it == index_.end()) throw std::out_of_range("action is not part of the model");
        return it->second;
    }

    std::size_t bt_action(const Support& support) const {
        return action_index({ActionClass::BeamTraining, support, p_min_, spec_.bt_duration});
    }

    std::size_t dt_action(const Support& support, double power, std::size_t duration) const {
        return action_index({ActionClass::DataTransmission, support, power, duration});
    }

    /// P(o | s, a, s_end).
    double observation_prob(Observation o, std::size_t s, std::size_t a, std::size_t s_end) const {
        check_state(s);
        check_state(s_end);
        const ActionSpec& act = model_.actions.at(a);
        if (s == exit_sublink() || s_end == exit_sublink()) return o == Observation::Exit ? 1.0 : 0.0;
        if (o == Observation::Exit) return 0.0;
        double ack = 0.0;
        if (act.is_bt()) {
            const bool inside = act.support.contains(s) && act.support.contains(s_end);
            ack = inside ? spec_.detection.p_detect() : spec_.detection.p_fa;
        } else {
            ack = stay_probability(s, s_end, act.support, act.duration, *powers_);
        }
        return o == Observation::Ack ? ack : 1.0 - ack;
    }

    /// Expected DT payload, (bit/s) x data slots; zero for BT and the exit state.
    double expected_reward(std::size_t s, std::size_t a) const {
        check_state(s);
        const ActionSpec& act = model_.actions.at(a);
        if (act.is_bt() || s == exit_sublink()) return 0.0;
        const double inside = powers_->restricted(act.support, act.duration)
                                  .row(static_cast<Eigen::Index>(s - 1))
                                  .sum();
        return rates_.at(a) * static_cast<double>(act.duration - 1) * inside;
    }

    /// Energy charged for the action, mW x micro-slots; zero in the exit state.
    double expected_cost(std::size_t s, std::size_t a) const {
        check_state(s);
        const ActionSpec& act = model_.actions.at(a);
        if (s == exit_sublink()) return 0.0;
        const double mw = act.power_per_beam * 1e3 * static_cast<double>(act.support.size());
        const double slots =
            act.is_dt() ? static_cast<double>(act.duration - 1) : static_cast<double>(act.duration);
        return mw * slots;
    }

private:
    using Key = std::tuple<int, std::size_t, std::size_t, double, std::size_t>;
    static Key key(const ActionSpec& a) {
        return {static_cast<int>(a.cls), a.support.first, a.support.last, a.power_per_beam,
                a.duration};
    }

    void check_state(std::size_t s) const {
        if (s < 1 || s > exit_sublink())
            throw std::out_of_range("state " + std::to_string(s) + " outside 1.." +
                                    std::to_string(exit_sublink()));
    }

    void build() {
        const std::size_t num_sublinks = spec_.radio.num_sublinks;
        const std::size_t n = num_sublinks + 1;
        model_.num_states = n;
        model_.num_observations = kNumObservations;
        model_.exit_state = n - 1;
        model_.actions = enumerate_actions(num_sublinks, p_min_, spec_.bt_duration,
                                           spec_.dt_powers, spec_.dt_durations);
        const std::size_t na = model_.actions.size();
        model_.transition.resize(na);
        model_.kernel.assign(na, std::vector<Matrix>(kNumObservations));
        model_.reward = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(na));
        model_.cost = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(na));
        rates_.assign(na, 0.0);

        for (std::size_t a = 0; a < na; ++a) {
            const ActionSpec& act = model_.actions[a];
            index_.emplace(key(act), a);
            if (act.is_dt())
                rates_[a] = achievable_rate(spec_.radio,
                                            act.power_per_beam * static_cast<double>(act.support.size()),
                                            act.support.size());
            const Matrix& t = powers_->full(act.duration);
            model_.transition[a] = t;
            for (std::size_t o = 0; o < kNumObservations; ++o) {
                Matrix k = Matrix::Zero(t.rows(), t.cols());
                for (Eigen::Index i = 0; i < t.rows(); ++i)
                    for (Eigen::Index j = 0; j < t.cols(); ++j)
                        if (t(i, j) != 0.0)
                            k(i, j) = observation_prob(static_cast<Observation>(o),
                                                       static_cast<std::size_t>(i + 1), a,
                                                       static_cast<std::size_t>(j + 1)) *
                                      t(i, j);
                model_.kernel[a][o] = std::move(k);
            }
            for (std::size_t s = 1; s <= n; ++s) {
                model_.reward(static_cast<Eigen::Index>(s - 1), static_cast<Eigen::Index>(a)) =
                    expected_reward(s, a);
                model_.cost(static_cast<Eigen::Index>(s - 1), static_cast<Eigen::Index>(a)) =
                    expected_cost(s, a);
            }
        }
        model_.validate(1e-12);
    }

    BeamModelSpec spec_;
    std::shared_ptr<MatrixPowerCache> powers_;
    double p_min_ = 0.0;
    PomdpModel model_;
    std::vector<double> rates_;
    std::map<Key, std::size_t> index_;
};

} // namespace beampomdp
