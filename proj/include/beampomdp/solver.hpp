#pragma once

// Point-based value iteration with alpha vectors: the exact point backup,
// randomized PERSEUS improvement stages, a sweep over Lagrange multipliers and
// the online multiplier adaptation.
//
// The objective is the Lagrangian L(s, a) = r(s, a) - lambda c(s, a). Every
// alpha vector also carries the reward and cost parts of the conditional plan
// it represents, so V^r and V^c at any belief come from the same vectors that
// define the greedy policy.

#include "beampomdp/belief.hpp"
#include "beampomdp/pomdp.hpp"
#include "beampomdp/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace beampomdp {

struct AlphaVector {
    Vector values; ///< Lagrangian value per state
    Vector reward; ///< reward part
    Vector cost;   ///< cost part
    std::size_t action = 0;
};

/// Piecewise-linear convex value function V(b) = max_i b . alpha_i.
struct ValueFunction {
    std::vector<AlphaVector> alphas;
    double lambda = 0.0; ///< multiplier the combined values are priced at

    /// Index of the maximizing vector; ties go to the lowest index.
    std::size_t best_index(const Belief& b) const {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double v = b.dot(alphas[i].values);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        return best;
    }

    double value(const Belief& b) const {
        double best_value = -std::numeric_limits<double>::infinity();
        for (const AlphaVector& a : alphas) best_value = std::max(best_value, b.dot(a.values));
        return best_value;
    }

    double reward_value(const Belief& b) const { return b.dot(alphas[best_index(b)].reward); }
    double cost_value(const Belief& b) const { return b.dot(alphas[best_index(b)].cost); }

    /// The same vectors with combined values re-priced at `new_lambda`.
    ValueFunction repriced(double new_lambda) const {
        ValueFunction out{alphas, new_lambda};
        for (AlphaVector& a : out.alphas) a.values = a.reward - new_lambda * a.cost;
        return out;
    }
};

/// Action of the maximizing alpha vector at `b`, lowest index on ties.
inline std::size_t greedy_action(const Belief& b, const ValueFunction& v) {
    if (v.alphas.empty()) throw std::invalid_argument("greedy_action needs a non-empty value function");
    return v.alphas[v.best_index(b)].action;
}

struct SolverParams {
    double lambda0 = 0.0;        ///< starting multiplier for the online run
    double alpha0 = 100.0;       ///< online step size, alpha_n = alpha0 / (n + 1)
    double cost_budget = 0.0;    ///< C, mW x micro-slots; 0 disables the sweep constraint
    double eps_v = 1e-5;         ///< relative change of sum_b V(b) declaring convergence
    double eps_c = 0.01;         ///< relative constraint slack for the online stop
    std::size_t max_stages = 2000;
    std::vector<double> lambda_grid;
    std::uint64_t seed = 1;
    double discount = 1.0;
    std::size_t threads = 1;

    /// `points` log-spaced values on [lo, hi].
    static std::vector<double> log_grid(double lo, double hi, std::size_t points) {
        std::vector<double> g;
        if (points == 1) return {lo};
        const double step = (std::log10(hi) - std::log10(lo)) / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i)
            g.push_back(std::pow(10.0, std::log10(lo) + step * static_cast<double>(i)));
        return g;
    }

    void validate() const {
        if (!(eps_v > 0.0)) throw ConfigError("solver.eps_v", "must be positive");
        if (!(eps_c > 0.0)) throw ConfigError("solver.eps_c", "must be positive");
        if (!(alpha0 >= 0.0)) throw ConfigError("solver.alpha0", "must be non-negative");
        if (!(lambda0 >= 0.0)) throw ConfigError("solver.lambda0", "must be non-negative");
        if (max_stages < 1) throw ConfigError("solver.max_stages", "must be at least 1");
        if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("solver.discount", "must lie in (0, 1]");
        if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end()))
            throw ConfigError("solver.lambda_grid", "must be sorted ascending");
        for (double l : lambda_grid)
            if (!(l >= 0.0)) throw ConfigError("solver.lambda_grid", "multipliers must be non-negative");
    }
};

/// Diagnostics for one PERSEUS stage.
struct StageRecord {
    std::size_t stage = 0;
    double lambda = 0.0;
    double value_b0 = 0.0;
    double reward_b0 = 0.0;
    double cost_b0 = 0.0;
    double belief_value_sum = 0.0;
    std::size_t num_vectors = 0;
    std::size_t num_backups = 0;
    bool value_converged = false;
};

struct SolveResult {
    double lambda = 0.0;
    ValueFunction value_function;
    std::vector<StageRecord> stages;
    bool converged = false;
    double value_b0 = 0.0;
    double reward_b0 = 0.0;
    double cost_b0 = 0.0;
};

struct SweepResult {
    std::vector<SolveResult> points;
    /// Index into `points` of the best feasible multiplier, if any.
    std::optional<std::size_t> best;
};

struct OnlineResult {
    ValueFunction value_function;
    std::vector<StageRecord> trajectory;
    bool converged = false;
    double lambda_opt = 0.0;
    double value_b0 = 0.0;
    double reward_b0 = 0.0;
    double cost_b0 = 0.0;
};

/**
 * Alpha-vector machinery bound to one tabular model.
 *
 * The kernels are concatenated column-wise into one n x (K n) matrix so that
 * b^T G_{a,o} for every (a, o) is a single product; the projected values
 * b . g^i_{a,o} then come from one more product against the alpha matrix.
 */
class PointBasedSolver {
public:
    explicit PointBasedSolver(const PomdpModel& model, double discount = 1.0)
        : model_(model), discount_(discount) {
        const auto n = static_cast<Eigen::Index>(model.num_states);
        const auto k = static_cast<Eigen::Index>(model.num_actions() * model.num_observations);
        // Blocks with a single non-zero column (e.g. the jump into an absorbing
        // state) project every alpha onto that one entry and skip the product.
        slot_.resize(static_cast<std::size_t>(k));
        std::vector<Eigen::Index> dense, single;
        for (Eigen::Index row = 0; row < k; ++row) {
            const Matrix& g = kernel_block(row);
            Eigen::Index column = -1;
            bool one_column = true;
            for (Eigen::Index j = 0; j < n && one_column; ++j) {
                if (g.col(j).cwiseAbs().maxCoeff() == 0.0) continue;
                if (column >= 0) one_column = false;
                column = j;
            }
            if (one_column) {
                slot_[static_cast<std::size_t>(row)] = {false, static_cast<Eigen::Index>(single.size()),
                                                        std::max<Eigen::Index>(column, 0)};
                single.push_back(row);
            } else {
                slot_[static_cast<std::size_t>(row)] = {true, static_cast<Eigen::Index>(dense.size()), 0};
                dense.push_back(row);
            }
        }
        dense_kernels_.resize(n, static_cast<Eigen::Index>(dense.size()) * n);
        for (std::size_t i = 0; i < dense.size(); ++i)
            dense_kernels_.middleCols(static_cast<Eigen::Index>(i) * n, n) = kernel_block(dense[i]);
        single_kernels_.resize(n, static_cast<Eigen::Index>(single.size()));
        for (std::size_t i = 0; i < single.size(); ++i)
            single_kernels_.col(static_cast<Eigen::Index>(i)) =
                kernel_block(single[i]).col(slot_[static_cast<std::size_t>(single[i])].column);
        num_dense_ = static_cast<Eigen::Index>(dense.size());

        // The starting zero vector is tagged with the cheapest action.
        double cheapest = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < model.num_actions(); ++a) {
            const double worst = model.cost.col(static_cast<Eigen::Index>(a)).maxCoeff();
            if (worst < cheapest) {
                cheapest = worst;
                default_action_ = a;
            }
        }
    }

    const PomdpModel& model() const { return model_; }
    std::size_t default_action() const { return default_action_; }

    /// V_0 = 0: a single zero vector.
    ValueFunction initial_value_function(double lambda) const {
        const auto n = static_cast<Eigen::Index>(model_.num_states);
        AlphaVector zero{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), default_action_};
        return ValueFunction{{zero}, lambda};
    }

    /**
     * Point backup at `b` against the stage value function `v`.
     *
     * For each action a and observation o the projected vector with the
     * largest b . g is picked (lowest index on ties); the action whose
     * b . (L_a + sum_o g) is largest wins (lowest index on ties). The reward
     * and cost parts are back-projected through the same selections.
     * `v` must already be priced at `lambda`.
     */
    AlphaVector backup(const Belief& b, const ValueFunction& v, double lambda) const {
        if (v.alphas.empty()) throw std::invalid_argument("backup needs a non-empty value function");
        const auto n = static_cast<Eigen::Index>(model_.num_states);
        const auto num_obs = model_.num_observations;
        const auto k = static_cast<Eigen::Index>(model_.num_actions() * num_obs);
        const auto nv = static_cast<Eigen::Index>(v.alphas.size());

        Matrix alpha_rows(nv, n);
        for (Eigen::Index i = 0; i < nv; ++i) alpha_rows.row(i) = v.alphas[static_cast<std::size_t>(i)].values.transpose();

        // scores(r, i) = b . G_r alpha_i, split into dense and single-column blocks.
        const Eigen::RowVectorXd projected = b.probs.transpose() * dense_kernels_;
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            y(projected.data(), num_dense_, n);
        const Matrix dense_scores = alpha_rows * y.transpose(); // nv x dense blocks
        const Eigen::RowVectorXd single_y = b.probs.transpose() * single_kernels_;

        const Eigen::RowVectorXd b_reward = b.probs.transpose() * model_.reward;
        const Eigen::RowVectorXd b_cost = b.probs.transpose() * model_.cost;

        std::vector<Eigen::Index> choice(static_cast<std::size_t>(k));
        std::vector<double> chosen(static_cast<std::size_t>(k));
        for (Eigen::Index row = 0; row < k; ++row) {
            const Slot& slot = slot_[static_cast<std::size_t>(row)];
            const double scale = slot.dense ? 1.0 : single_y(slot.index);
            const double* column = slot.dense ? dense_scores.col(slot.index).data() : nullptr;
            const auto col_values = alpha_rows.col(slot.column);
            Eigen::Index best = 0;
            double best_score = slot.dense ? column[0] : scale * col_values(0);
            for (Eigen::Index i = 1; i < nv; ++i) {
                const double sc = slot.dense ? column[i] : scale * col_values(i);
                if (sc > best_score) {
                    best_score = sc;
                    best = i;
                }
            }
            choice[static_cast<std::size_t>(row)] = best;
            chosen[static_cast<std::size_t>(row)] = best_score;
        }

        std::size_t best_action = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < model_.num_actions(); ++a) {
            double future = 0.0;
            for (std::size_t o = 0; o < num_obs; ++o) future += chosen[static_cast<std::size_t>(block(a, o))];
            const auto col = static_cast<Eigen::Index>(a);
            const double value = b_reward(col) - lambda * b_cost(col) + discount_ * future;
            if (value > best_value) {
                best_value = value;
                best_action = a;
            }
        }

        const auto col = static_cast<Eigen::Index>(best_action);
        AlphaVector out;
        out.action = best_action;
        out.reward = model_.reward.col(col);
        out.cost = model_.cost.col(col);
        out.values = out.reward - lambda * out.cost;
        for (std::size_t o = 0; o < num_obs; ++o) {
            const Matrix& g = model_.kernel[best_action][o];
            const AlphaVector& next =
                v.alphas[static_cast<std::size_t>(choice[static_cast<std::size_t>(block(best_action, o))])];
            out.values += discount_ * (g * next.values);
            out.reward += discount_ * (g * next.reward);
            out.cost += discount_ * (g * next.cost);
        }
        return out;
    }

    /**
     * One randomized improvement stage over the belief set.
     *
     * Beliefs not yet improved are sampled uniformly; each sample gets either
     * its backup (when that does not lower its value) or its current best
     * vector. Ends when every belief satisfies V_{n+1}(b) >= V_n(b).
     * `num_backups`, if given, receives the number of backups performed.
     */
    ValueFunction perseus_stage(const std::vector<Belief>& beliefs, const ValueFunction& v_stage,
                                double lambda, Rng& rng, std::size_t* num_backups = nullptr) const {
        if (beliefs.empty()) throw std::invalid_argument("PERSEUS needs a non-empty belief set");
        const ValueFunction v = v_stage.lambda == lambda ? v_stage : v_stage.repriced(lambda);

        std::vector<double> old_values(beliefs.size());
        for (std::size_t j = 0; j < beliefs.size(); ++j) old_values[j] = v.value(beliefs[j]);

        ValueFunction next{{}, lambda};
        std::vector<double> new_values(beliefs.size(), -std::numeric_limits<double>::infinity());
        std::vector<std::size_t> pending(beliefs.size());
        for (std::size_t j = 0; j < beliefs.size(); ++j) pending[j] = j;

        std::size_t backups = 0;
        while (!pending.empty()) {
            const std::size_t j = pending[static_cast<std::size_t>(rng.below(pending.size()))];
            AlphaVector alpha = backup(beliefs[j], v, lambda);
            ++backups;
            if (!(beliefs[j].dot(alpha.values) >= old_values[j])) alpha = v.alphas[v.best_index(beliefs[j])];
            for (std::size_t i = 0; i < beliefs.size(); ++i)
                new_values[i] = std::max(new_values[i], beliefs[i].dot(alpha.values));
            next.alphas.push_back(std::move(alpha));

            pending.clear();
            for (std::size_t i = 0; i < beliefs.size(); ++i)
                if (new_values[i] < old_values[i]) pending.push_back(i);
        }
        if (num_backups) *num_backups = backups;
        return next;
    }

    /// PERSEUS stages from V_0 = 0 at a fixed multiplier until the belief-set
    /// value sum changes by less than eps_v (relative) or max_stages is hit.
    SolveResult solve(const std::vector<Belief>& beliefs, const Belief& b0, double lambda,
                      const SolverParams& params, std::uint64_t stream = 0) const {
        Rng rng(params.seed, stream);
        SolveResult result;
        result.lambda = lambda;
        ValueFunction v = initial_value_function(lambda);
        double prev_sum = belief_value_sum(beliefs, v);
        for (std::size_t n = 0; n < params.max_stages; ++n) {
            std::size_t backups = 0;
            ValueFunction next = perseus_stage(beliefs, v, lambda, rng, &backups);
            const double sum = belief_value_sum(beliefs, next);
            const bool converged = value_converged(prev_sum, sum, params.eps_v) ||
                                   (prev_sum == 0.0 && sum == 0.0 && is_fixed_point(beliefs, next, lambda));
            result.stages.push_back(record(n, lambda, next, b0, sum, backups, converged));
            v = std::move(next);
            prev_sum = sum;
            if (converged) {
                result.converged = true;
                break;
            }
        }
        result.value_b0 = v.value(b0);
        result.reward_b0 = v.reward_value(b0);
        result.cost_b0 = v.cost_value(b0);
        result.value_function = std::move(v);
        return result;
    }

    /**
     * Independent solves over `params.lambda_grid`. The best multiplier is
     * the one with the largest V(b0) among those with V^c(b0) < C; with no
     * budget (C <= 0) every point counts as feasible.
     */
    SweepResult sweep(const std::vector<Belief>& beliefs, const Belief& b0,
                      const SolverParams& params) const {
        if (params.lambda_grid.empty()) throw ConfigError("solver.lambda_grid", "must not be empty");
        SweepResult out;
        out.points.resize(params.lambda_grid.size());
        parallel_for(params.lambda_grid.size(), params.threads, [&](std::size_t i) {
            out.points[i] = solve(beliefs, b0, params.lambda_grid[i], params, i);
        });
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.points.size(); ++i) {
            const SolveResult& r = out.points[i];
            const bool feasible = params.cost_budget <= 0.0 || r.cost_b0 < params.cost_budget;
            if (feasible && r.value_b0 > best_value) {
                best_value = r.value_b0;
                out.best = i;
            }
        }
        return out;
    }

    /**
     * Stages interleaved with projected gradient steps on the multiplier:
     * lambda_{n+1} = max(0, lambda_n + alpha0 / (n + 1) (V^c_{n+1}(b0) - C)).
     * Stops once the values have converged and (V^c(b0) - C) / C < eps_c.
     */
    OnlineResult online(const std::vector<Belief>& beliefs, const Belief& b0,
                        const SolverParams& params) const {
        if (!(params.cost_budget > 0.0)) throw ConfigError("solver.cost_budget", "must be positive");
        Rng rng(params.seed, 0x6f6e6c696e65ULL);
        OnlineResult out;
        double lambda = params.lambda0;
        ValueFunction v = initial_value_function(lambda);
        for (std::size_t n = 0; n < params.max_stages; ++n) {
            // The ratio test compares both value functions under the current
            // multiplier, so it measures the stage's improvement and not the
            // shift caused by the last multiplier step.
            if (v.lambda != lambda) v = v.repriced(lambda);
            const double prev_sum = belief_value_sum(beliefs, v);
            std::size_t backups = 0;
            ValueFunction next = perseus_stage(beliefs, v, lambda, rng, &backups);
            const double sum = belief_value_sum(beliefs, next);
            const bool converged = value_converged(prev_sum, sum, params.eps_v) ||
                                   (prev_sum == 0.0 && sum == 0.0 && is_fixed_point(beliefs, next, lambda));
            StageRecord rec = record(n, lambda, next, b0, sum, backups, converged);
            out.trajectory.push_back(rec);
            v = std::move(next);
            out.lambda_opt = lambda;
            if (converged && (rec.cost_b0 - params.cost_budget) / params.cost_budget < params.eps_c) {
                out.converged = true;
                break;
            }
            const double step = params.alpha0 / static_cast<double>(n + 1);
            lambda = std::max(0.0, lambda + step * (rec.cost_b0 - params.cost_budget));
        }
        out.value_b0 = v.value(b0);
        out.reward_b0 = v.reward_value(b0);
        out.cost_b0 = v.cost_value(b0);
        out.value_function = std::move(v);
        return out;
    }

    static double belief_value_sum(const std::vector<Belief>& beliefs, const ValueFunction& v) {
        double sum = 0.0;
        for (const Belief& b : beliefs) sum += v.value(b);
        return sum;
    }

    /// |sum_next / sum_prev - 1| < eps; skipped (false) while sum_prev is zero.
    static bool value_converged(double sum_prev, double sum_next, double eps) {
        if (sum_prev == 0.0) return false;
        return std::abs(sum_next / sum_prev - 1.0) < eps;
    }

    /// True when no belief's backup against `v` beats its current value, so
    /// further stages cannot change V on the belief set.
    bool is_fixed_point(const std::vector<Belief>& beliefs, const ValueFunction& v, double lambda) const {
        const ValueFunction priced = v.lambda == lambda ? v : v.repriced(lambda);
        for (const Belief& b : beliefs)
            if (b.dot(backup(b, priced, lambda).values) > priced.value(b)) return false;
        return true;
    }

    /// Runs body(i) for i in [0, count) on up to `threads` workers.
    template <class Body>
    static void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
        threads = std::max<std::size_t>(1, std::min(threads, count));
        if (threads == 1) {
            for (std::size_t i = 0; i < count; ++i) body(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }

private:
    struct Slot {
        bool dense = true;
        Eigen::Index index = 0;  ///< column block in dense_kernels_ or column of single_kernels_
        Eigen::Index column = 0; ///< the non-zero column of a single-column block
    };

    Eigen::Index block(std::size_t a, std::size_t o) const {
        return static_cast<Eigen::Index>(a * model_.num_observations + o);
    }

    const Matrix& kernel_block(Eigen::Index row) const {
        const auto r = static_cast<std::size_t>(row);
        return model_.kernel[r / model_.num_observations][r % model_.num_observations];
    }

    static StageRecord record(std::size_t n, double lambda, const ValueFunction& v, const Belief& b0,
                              double sum, std::size_t backups, bool converged) {
        const AlphaVector& best = v.alphas[v.best_index(b0)];
        return {n, lambda, b0.dot(best.values), b0.dot(best.reward), b0.dot(best.cost), sum,
                v.alphas.size(), backups, converged};
    }

    const PomdpModel& model_;
    double discount_ = 1.0;
    std::vector<Slot> slot_;
    Matrix dense_kernels_;
    Matrix single_kernels_;
    Eigen::Index num_dense_ = 0;
    std::size_t default_action_ = 0;
};

} // namespace beampomdp
