#pragma once

// Monte Carlo evaluation of beam policies against the ground-truth walk.
//
// The walk is simulated event by event: in sub-link s the user leaves after a
// geometric number of micro-slots, so an episode of ~1e5 slots costs a handful
// of random draws instead of one per slot.

#include "beampomdp/belief.hpp"
#include "beampomdp/pomdp.hpp"
#include "beampomdp/random.hpp"
#include "beampomdp/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

namespace beampomdp {

struct TraceEntry {
    std::uint64_t time = 0;  ///< micro-slot at which the action starts
    std::size_t state = 1;   ///< true sub-link at that time
    std::size_t action = 0;
    Observation observation = Observation::Ack;
};

struct EpisodeStats {
    double bits = 0.0;      ///< delivered payload, bits
    double energy = 0.0;    ///< mW x micro-slots
    std::uint64_t duration = 0; ///< micro-slots from entry to exit
    std::uint64_t bt_actions = 0;
    std::uint64_t dt_actions = 0;
    std::vector<TraceEntry> trace;
};

/// Greedy policy of a solved value function; tracks a belief from b0.
struct SolvedPolicy {
    const ValueFunction* value_function = nullptr;
};

enum class HeuristicFallback {
    ExpandingRing, ///< after s-1, s+1 keep scanning s-2, s+2, ... and s itself, cyclically
    RestartAtOne,  ///< after s-1, s+1 go back to beam training on sub-link 1
};

/// Scan-then-transmit baseline with single-beam actions.
struct HeuristicPolicy {
    double power = 0.0; ///< DT power per beam, W
    std::size_t duration = 0;
    HeuristicFallback fallback = HeuristicFallback::ExpandingRing;
};

/**
 * Oracle baseline that knows the true sub-link and serves it with DT at
 * (power, duration). With `tracking` the beam follows the user within a block
 * so a block only fails when the user leaves the coverage area; without it the
 * block is held on the starting sub-link and fails whenever the user moves.
 */
struct GeniePolicy {
    double power = 0.0;
    std::size_t duration = 0;
    bool tracking = true;
};

using PolicyKind = std::variant<SolvedPolicy, HeuristicPolicy, GeniePolicy>;

namespace detail {

/// True position of the user, advanced lazily between jumps.
class Walk {
public:
    Walk(double p, double q, std::size_t num_sublinks, Rng& rng)
        : p_(p), q_(q), num_sublinks_(num_sublinks), rng_(rng) {
        countdown_ = draw_holding();
    }

    std::size_t state() const { return state_; }
    bool exited() const { return state_ > num_sublinks_; }

    struct Segment {
        std::uint64_t slots = 0; ///< slots elapsed, shorter than requested on exit
        bool stayed = true;      ///< every visited sub-link lay in the support
        bool exited = false;
    };

    /// Advances up to `slots` micro-slots, stopping early on exit.
    Segment advance(std::uint64_t slots, const Support& support) {
        Segment seg;
        seg.stayed = support.contains(state_);
        std::uint64_t t = 0;
        while (t < slots) {
            if (countdown_ > slots - t) {
                countdown_ -= slots - t;
                t = slots;
                break;
            }
            t += countdown_;
            jump();
            if (exited()) {
                seg.exited = true;
                seg.stayed = false;
                break;
            }
            seg.stayed = seg.stayed && support.contains(state_);
            countdown_ = draw_holding();
        }
        seg.slots = t;
        return seg;
    }

private:
    std::uint64_t draw_holding() {
        const double leave = state_ == 1 ? p_ : p_ + q_;
        return rng_.geometric(leave, std::numeric_limits<std::uint64_t>::max() / 4);
    }

    void jump() {
        if (state_ == 1 || rng_.uniform() * (p_ + q_) < p_)
            ++state_;
        else
            --state_;
    }

    double p_;
    double q_;
    std::size_t num_sublinks_;
    Rng& rng_;
    std::size_t state_ = 1;
    std::uint64_t countdown_ = 0;
};

/// Scan order around `center`: c-1, c+1, c-2, c+2, ... clipped to [1, S], then c.
inline std::vector<std::size_t> ring_order(std::size_t center, std::size_t num_sublinks) {
    std::vector<std::size_t> order;
    for (std::size_t k = 1; k < num_sublinks; ++k) {
        if (center > k) order.push_back(center - k);
        if (center + k <= num_sublinks) order.push_back(center + k);
    }
    order.push_back(center);
    return order;
}

} // namespace detail

/// Internal state of the heuristic within one episode.
class HeuristicController {
public:
    HeuristicController(const HeuristicPolicy& policy, const BeamPomdp& pomdp)
        : policy_(policy), pomdp_(pomdp) {}

    std::size_t center() const { return center_; }

    /// Action to take now.
    std::size_t next_action() const {
        if (mode_ == Mode::Transmit)
            return pomdp_.dt_action({center_, center_}, policy_.power, policy_.duration);
        const std::size_t target = mode_ == Mode::Train ? center_ : ring_[ring_pos_];
        return pomdp_.bt_action({target, target});
    }

    void observe(Observation o) {
        if (o == Observation::Exit) return;
        const bool ack = o == Observation::Ack;
        switch (mode_) {
        case Mode::Train:
        case Mode::Transmit:
            if (ack) {
                mode_ = Mode::Transmit;
            } else {
                start_scan();
            }
            break;
        case Mode::Scan:
            if (ack) {
                center_ = ring_[ring_pos_];
                mode_ = Mode::Transmit;
            } else {
                ++ring_pos_;
                if (policy_.fallback == HeuristicFallback::RestartAtOne && ring_pos_ >= std::min<std::size_t>(2, ring_.size())) {
                    center_ = 1;
                    mode_ = Mode::Train;
                } else {
                    ring_pos_ %= ring_.size();
                }
            }
            break;
        }
    }

private:
    enum class Mode { Train, Transmit, Scan };

    void start_scan() {
        ring_ = detail::ring_order(center_, pomdp_.num_sublinks());
        ring_pos_ = 0;
        mode_ = Mode::Scan;
    }

    HeuristicPolicy policy_;
    const BeamPomdp& pomdp_;
    Mode mode_ = Mode::Train;
    std::size_t center_ = 1;
    std::vector<std::size_t> ring_;
    std::size_t ring_pos_ = 0;
};

namespace detail {

/// Index of the action every alpha vector shares, if they all share one.
inline std::optional<std::size_t> constant_action(const ValueFunction& v) {
    if (v.alphas.empty()) return std::nullopt;
    for (const AlphaVector& a : v.alphas)
        if (a.action != v.alphas.front().action) return std::nullopt;
    return v.alphas.front().action;
}

/**
 * Greedy execution of a solved policy without per-step allocation. Alpha
 * vectors are stored as contiguous columns and the products are plain loops,
 * which beat a general matrix-vector kernel at these sizes. Ties go to the
 * lowest index, as in ValueFunction::best_index.
 */
class GreedyTracker {
public:
    GreedyTracker(const ValueFunction& v, const PomdpModel& model, std::size_t num_sublinks)
        : model_(model), n_(num_sublinks + 1), belief_(initial_belief(num_sublinks).probs), next_(belief_.size()),
          alphas_(belief_.size(), static_cast<Eigen::Index>(v.alphas.size())) {
        for (std::size_t i = 0; i < v.alphas.size(); ++i) {
            alphas_.col(static_cast<Eigen::Index>(i)) = v.alphas[i].values;
            actions_.push_back(v.alphas[i].action);
        }
    }

    std::size_t action() const {
        const double* b = belief_.data();
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < actions_.size(); ++i) {
            const double* alpha = alphas_.data() + i * n_;
            double v = 0.0;
            for (std::size_t s = 0; s < n_; ++s) v += alpha[s] * b[s];
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        return actions_[best];
    }

    void observe(std::size_t a, Observation o) {
        const auto oi = static_cast<std::size_t>(o);
        const Matrix& kernel = model_.kernel[a][oi];
        const double* b = belief_.data();
        double norm = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            const double* col = kernel.data() + j * n_;
            double x = 0.0;
            for (std::size_t s = 0; s < n_; ++s) x += col[s] * b[s];
            next_[static_cast<Eigen::Index>(j)] = x;
            norm += x;
        }
        if (!(norm > 0.0))
            throw ImpossibleObservation("observation " + std::to_string(oi) +
                                        " has zero probability under action " + std::to_string(a));
        belief_ = next_ / norm;
    }

private:
    const PomdpModel& model_;
    std::size_t n_;
    Vector belief_;
    Vector next_;
    Matrix alphas_;
    std::vector<std::size_t> actions_;
};

} // namespace detail

/**
 * One transmission episode from entry on sub-link 1 until exit.
 *
 * `duration` is the exit time; the action in progress at exit is charged in
 * full. DT blocks deliver R (T - 1) dt bits iff the user stayed inside the
 * support for the whole block. With `trace` the per-action log is kept.
 */
inline EpisodeStats run_episode(const PolicyKind& policy, const BeamPomdp& pomdp, Rng& rng,
                                bool trace = false) {
    const PomdpModel& model = pomdp.model();
    const auto& mob = pomdp.spec().mobility;
    const double dt = pomdp.spec().radio.micro_slot;
    const double p_detect = pomdp.spec().detection.p_detect();
    const double p_fa = pomdp.spec().detection.p_fa;

    EpisodeStats stats;
    detail::Walk walk(mob.p, mob.q, pomdp.num_sublinks(), rng);

    // A greedy policy that never leaves one BT action needs no belief: every
    // slot is the same probe until the walk exits.
    if (const auto* solved = std::get_if<SolvedPolicy>(&policy); solved && !trace) {
        if (!solved->value_function || solved->value_function->alphas.empty())
            throw std::invalid_argument("solved policy needs a non-empty value function");
        const auto fixed = detail::constant_action(*solved->value_function);
        if (fixed && model.actions[*fixed].is_bt()) {
            const ActionSpec& act = model.actions[*fixed];
            const auto seg = walk.advance(std::numeric_limits<std::uint64_t>::max() / 2, act.support);
            stats.duration = seg.slots;
            stats.bt_actions = seg.slots;
            stats.energy = pomdp.expected_cost(1, *fixed) * static_cast<double>(seg.slots);
            return stats;
        }
    }

    std::optional<detail::GreedyTracker> greedy;
    if (const auto* solved = std::get_if<SolvedPolicy>(&policy))
        greedy.emplace(*solved->value_function, model, pomdp.num_sublinks());
    std::optional<HeuristicController> heuristic;
    if (const auto* h = std::get_if<HeuristicPolicy>(&policy)) heuristic.emplace(*h, pomdp);

    std::uint64_t time = 0;
    while (true) {
        const std::size_t s = walk.state();
        std::size_t a = 0;
        if (greedy)
            a = greedy->action();
        else if (heuristic)
            a = heuristic->next_action();
        else {
            const auto& g = std::get<GeniePolicy>(policy);
            a = pomdp.dt_action({s, s}, g.power, g.duration);
        }
        const ActionSpec& act = model.actions[a];

        stats.energy += pomdp.expected_cost(s, a);
        (act.is_bt() ? stats.bt_actions : stats.dt_actions) += 1;

        const auto* genie = std::get_if<GeniePolicy>(&policy);
        const bool follow = genie && genie->tracking;
        const Support all{1, pomdp.num_sublinks()};
        const auto seg = walk.advance(act.duration, follow ? all : act.support);
        time += seg.slots;

        Observation o = Observation::Exit;
        if (!seg.exited) {
            bool ack = false;
            if (act.is_bt()) {
                const bool inside = act.support.contains(s) && act.support.contains(walk.state());
                ack = rng.bernoulli(inside ? p_detect : p_fa);
            } else {
                ack = seg.stayed;
            }
            o = ack ? Observation::Ack : Observation::Nack;
            if (act.is_dt() && ack)
                stats.bits += pomdp.rate(a) * dt * static_cast<double>(act.duration - 1);
        }
        if (trace) stats.trace.push_back({time - seg.slots, s, a, o});
        if (o == Observation::Exit) break;

        if (greedy)
            greedy->observe(a, o);
        else if (heuristic)
            heuristic->observe(o);
    }
    stats.duration = time;
    return stats;
}

struct Metrics {
    double avg_rate_bps = 0.0;
    double avg_power_mw = 0.0;
    double avg_power_dbm = 0.0;
    double avg_duration_slots = 0.0;
    double ci_rate = 0.0;  ///< 95% half-width, bit/s
    double ci_power = 0.0; ///< 95% half-width, dB
    std::size_t episodes = 0;
    std::uint64_t seed = 0;
};

struct SimParams {
    std::size_t episodes = 10000;
    std::uint64_t seed = 1;
    std::size_t bootstrap_resamples = 1000;
    std::size_t threads = 1;
};

namespace detail {

/// Neumaier-compensated sum in index order.
inline double compensated_sum(const std::vector<double>& xs) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// Half the width of the central 95% interval of `xs` (sorted in place).
inline double half_width_95(std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    std::sort(xs.begin(), xs.end());
    const auto at = [&](double q) {
        const double pos = q * static_cast<double>(xs.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, xs.size() - 1);
        return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
    };
    return 0.5 * (at(0.975) - at(0.025));
}

} // namespace detail

/// Summary of per-episode totals: ratio estimators with bootstrap intervals.
inline Metrics summarize(const std::vector<EpisodeStats>& episodes, double micro_slot,
                         std::uint64_t seed, std::size_t resamples) {
    if (episodes.empty()) throw std::invalid_argument("at least one episode is required");
    std::vector<double> bits, energy, duration;
    for (const EpisodeStats& e : episodes) {
        bits.push_back(e.bits);
        energy.push_back(e.energy);
        duration.push_back(static_cast<double>(e.duration));
    }
    const double total_bits = detail::compensated_sum(bits);
    const double total_energy = detail::compensated_sum(energy);
    const double total_duration = detail::compensated_sum(duration);

    Metrics m;
    m.episodes = episodes.size();
    m.seed = seed;
    m.avg_rate_bps = total_bits / (total_duration * micro_slot);
    m.avg_power_mw = total_energy / total_duration;
    m.avg_power_dbm = m.avg_power_mw > 0.0 ? milliwatts_to_dbm(m.avg_power_mw)
                                           : -std::numeric_limits<double>::infinity();
    m.avg_duration_slots = total_duration / static_cast<double>(episodes.size());

    if (resamples > 0 && episodes.size() > 1) {
        Rng rng(seed, 0x626f6f74ULL);
        std::vector<double> rates, powers;
        const std::uint64_t n = episodes.size();
        for (std::size_t r = 0; r < resamples; ++r) {
            double b = 0.0, en = 0.0, d = 0.0;
            for (std::uint64_t k = 0; k < n; ++k) {
                const auto i = static_cast<std::size_t>(rng.below(n));
                b += bits[i];
                en += energy[i];
                d += duration[i];
            }
            rates.push_back(b / (d * micro_slot));
            if (en > 0.0) powers.push_back(milliwatts_to_dbm(en / d));
        }
        m.ci_rate = detail::half_width_95(rates);
        m.ci_power = detail::half_width_95(powers);
    }
    return m;
}

/// Runs `episodes` independent episodes; episode i draws from substream (seed, i).
inline std::vector<EpisodeStats> simulate_episodes(const PolicyKind& policy, const BeamPomdp& pomdp,
                                                   const SimParams& params) {
    if (params.episodes < 1) throw ConfigError("sim.episodes", "must be at least 1");
    std::vector<EpisodeStats> out(params.episodes);
    PointBasedSolver::parallel_for(params.episodes, params.threads, [&](std::size_t i) {
        Rng rng(params.seed, i);
        out[i] = run_episode(policy, pomdp, rng);
    });
    return out;
}

inline Metrics monte_carlo_metrics(const PolicyKind& policy, const BeamPomdp& pomdp,
                                   const SimParams& params) {
    const auto episodes = simulate_episodes(policy, pomdp, params);
    return summarize(episodes, pomdp.spec().radio.micro_slot, params.seed, params.bootstrap_resamples);
}

} // namespace beampomdp
