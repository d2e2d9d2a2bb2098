#pragma once

// Beliefs over the POMDP states, the Bayes filter, and the two belief-set
// constructions used by the point-based solver.

#include "beampomdp/errors.hpp"
#include "beampomdp/pomdp.hpp"
#include "beampomdp/random.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace beampomdp {

/// Probability vector over all POMDP states (for the beam model: S sub-links
/// followed by the exit state).
struct Belief {
    Vector probs;

    Belief() = default;
    explicit Belief(Vector p) : probs(std::move(p)) {}

    std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
    double operator[](std::size_t i) const { return probs(static_cast<Eigen::Index>(i)); }
    double dot(const Vector& v) const { return probs.dot(v); }

    bool is_valid(double tol = 1e-10) const {
        return probs.size() > 0 && (probs.array() >= 0.0).all() && std::abs(probs.sum() - 1.0) <= tol;
    }

    friend bool operator==(const Belief& a, const Belief& b) { return a.probs == b.probs; }
};

inline double l1_distance(const Belief& a, const Belief& b) {
    return (a.probs - b.probs).cwiseAbs().sum();
}

/// Point mass on `state` (0-based) in an `num_states`-dimensional simplex.
inline Belief point_belief(std::size_t num_states, std::size_t state) {
    Vector p = Vector::Zero(static_cast<Eigen::Index>(num_states));
    p(static_cast<Eigen::Index>(state)) = 1.0;
    return Belief(std::move(p));
}

/// The user enters the coverage area on sub-link 1.
inline Belief initial_belief(std::size_t num_sublinks) {
    if (num_sublinks < 1) throw ConfigError("radio.num_sublinks", "must be at least 1");
    return point_belief(num_sublinks + 1, 0);
}

/// P(o | a, b), the normalizer of the Bayes update.
inline double observation_probability(const Belief& b, std::size_t a, std::size_t o,
                                      const PomdpModel& model) {
    return (model.kernel.at(a).at(o).transpose() * b.probs).sum();
}

/// b'(s') proportional to sum_s P(o | s, a, s') P(s' | s, a) b(s).
/// Throws ImpossibleObservation when P(o | a, b) is zero.
inline Belief update(const Belief& b, std::size_t a, std::size_t o, const PomdpModel& model) {
    Vector next = model.kernel.at(a).at(o).transpose() * b.probs;
    const double norm = next.sum();
    if (!(norm > 0.0))
        throw ImpossibleObservation("observation " + std::to_string(o) +
                                    " has zero probability under action " + std::to_string(a));
    next /= norm;
    return Belief(std::move(next));
}

inline Belief update(const Belief& b, std::size_t a, Observation o, const PomdpModel& model) {
    return update(b, a, static_cast<std::size_t>(o), model);
}

/// Uniform beliefs over every run of w consecutive sub-links, w = 1..window,
/// ordered by w then by starting sub-link. No mass on the exit state.
inline std::vector<Belief> structured_belief_set(std::size_t num_sublinks, std::size_t window) {
    if (window < 1 || window > num_sublinks)
        throw ConfigError("belief.window", "must lie in 1..S");
    std::vector<Belief> out;
    for (std::size_t w = 1; w <= window; ++w) {
        for (std::size_t i = 0; i + w <= num_sublinks; ++i) {
            Vector p = Vector::Zero(static_cast<Eigen::Index>(num_sublinks + 1));
            p.segment(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(w))
                .setConstant(1.0 / static_cast<double>(w));
            out.emplace_back(std::move(p));
        }
    }
    return out;
}

namespace detail {

inline std::size_t sample_index(const Eigen::Ref<const Vector>& weights, Rng& rng) {
    const double total = weights.sum();
    double u = rng.uniform() * total;
    Eigen::Index last_positive = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights(i) <= 0.0) continue;
        last_positive = i;
        if (u < weights(i)) return static_cast<std::size_t>(i);
        u -= weights(i);
    }
    return static_cast<std::size_t>(last_positive);
}

} // namespace detail

/**
 * Beliefs visited by simulating the model under uniformly random actions.
 *
 * Starts at `start`, samples s' ~ P(. | s, a) and o ~ P(o | s, a, s'), and
 * applies the Bayes update. A trajectory restarts from `start` once the
 * true state reaches the model's exit state. A belief is kept only if its L1
 * distance to every kept belief exceeds 1e-9; `start` is always first.
 */
inline std::vector<Belief> random_belief_set(const PomdpModel& model, const Belief& start,
                                             std::size_t count, std::uint64_t seed,
                                             std::size_t max_steps = 1'000'000) {
    if (count < 1) throw ConfigError("belief.count", "must be at least 1");
    Rng rng(seed, 0x62656c696566ULL);
    std::vector<Belief> out{start};

    const auto restart_state = [&] { return detail::sample_index(start.probs, rng); };
    Belief b = start;
    std::size_t s = restart_state();
    for (std::size_t step = 0; out.size() < count; ++step) {
        if (step >= max_steps)
            throw InternalConsistencyError("random belief sampling found only " +
                                           std::to_string(out.size()) + " distinct beliefs");
        const auto a = static_cast<std::size_t>(rng.below(model.num_actions()));
        const auto row = static_cast<Eigen::Index>(s);
        const std::size_t s_next = detail::sample_index(model.transition[a].row(row).transpose(), rng);
        Vector obs_weights(static_cast<Eigen::Index>(model.num_observations));
        for (std::size_t o = 0; o < model.num_observations; ++o)
            obs_weights(static_cast<Eigen::Index>(o)) =
                model.kernel[a][o](row, static_cast<Eigen::Index>(s_next));
        const std::size_t o = detail::sample_index(obs_weights, rng);
        if (model.exit_state && s_next == *model.exit_state) {
            b = start;
            s = restart_state();
            continue;
        }
        b = update(b, a, o, model);
        s = s_next;
        bool fresh = true;
        for (const Belief& kept : out)
            if (l1_distance(kept, b) <= 1e-9) {
                fresh = false;
                break;
            }
        if (fresh) out.push_back(b);
    }
    return out;
}

} // namespace beampomdp
