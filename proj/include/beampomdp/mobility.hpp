#pragma once

// Random-walk mobility over the S road sub-links plus the absorbing exit state.
//
// Sub-links are numbered 1..S and the exit state is S+1 wherever a function
// takes a "sub-link" argument. Matrix rows and columns are 0-based, so
// sub-link s lives at index s-1 and the exit state at index S.

#include "beampomdp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>

namespace beampomdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Consecutive run of sub-links [first, last], 1-based and inclusive.
struct Support {
    std::size_t first = 1;
    std::size_t last = 1;

    std::size_t size() const { return last - first + 1; }
    bool contains(std::size_t s) const { return s >= first && s <= last; }
    friend bool operator==(const Support&, const Support&) = default;
    friend auto operator<=>(const Support&, const Support&) = default;
};

struct FeasibilityVerdict {
    bool feasible = true;
    /// Which strict inequality failed first: "p < 1", "q > 0" or "1 - p - q > 0".
    std::string failed_constraint;
    explicit operator bool() const { return feasible; }
};

/// Checks that (E[v], Var[v]) yields step probabilities with 0 < q < p < 1
/// and 1 - p - q > 0 for the three-speed model {0, v_max, -v_max}.
inline FeasibilityVerdict check_feasible(double mean_speed, double var_speed, double v_max) {
    if (!(v_max > 0.0)) return {false, "v_max > 0"};
    const double e2 = mean_speed * mean_speed;
    if (!(var_speed < -e2 - v_max * mean_speed + 2.0 * v_max * v_max)) return {false, "p < 1"};
    if (!(var_speed > -e2 + v_max * mean_speed)) return {false, "q > 0"};
    if (!(var_speed + e2 < v_max * v_max)) return {false, "1 - p - q > 0"};
    return {};
}

struct StepProbabilities {
    double p = 0.0; ///< forward step probability
    double q = 0.0; ///< backward step probability
};

inline StepProbabilities derive_step_probs(double mean_speed, double var_speed, double v_max) {
    const auto verdict = check_feasible(mean_speed, var_speed, v_max);
    if (!verdict)
        throw ConfigError("mobility.speed_variance_m2_s2",
                          "infeasible speed statistics, violates " + verdict.failed_constraint);
    const double common = (var_speed + mean_speed * mean_speed) / (2.0 * v_max * v_max);
    const double drift = mean_speed / (2.0 * v_max);
    return {common + drift, common - drift};
}

/// Speed-jitter factor of the default variance: (p + q) / (p - q), the number
/// of sub-link boundary crossings per sub-link of net progress.
inline constexpr double kDefaultJitter = 5.0;

/// Default speed variance when none is configured,
/// Var[v] = k v_max E[v] - E[v]^2 with k = kDefaultJitter.
inline double default_speed_variance(double mean_speed, double v_max) {
    return kDefaultJitter * v_max * mean_speed - mean_speed * mean_speed;
}

struct MobilityParams {
    double mean_speed = 0.0; ///< m/s
    double var_speed = 0.0;  ///< (m/s)^2
    double v_max = 0.0;      ///< m/s
    double p = 0.0;
    double q = 0.0;

    static MobilityParams from_speed(double mean_speed, double var_speed, double v_max) {
        const auto pq = derive_step_probs(mean_speed, var_speed, v_max);
        return {mean_speed, var_speed, v_max, pq.p, pq.q};
    }
};

/// Row-stochastic 1-step matrix of the walk: reflecting at sub-link 1, exit
/// from sub-link S with probability p, exit state absorbing.
inline Matrix one_step_matrix(double p, double q, std::size_t num_sublinks) {
    if (!(q > 0.0 && q < p && p < 1.0 && 1.0 - p - q > 0.0))
        throw ConfigError("mobility", "step probabilities must satisfy 0 < q < p < 1, p + q < 1");
    const auto n = static_cast<Eigen::Index>(num_sublinks + 1);
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = p;
        if (i == 0) {
            m(i, i) = 1.0 - p;
        } else {
            m(i, i - 1) = q;
            m(i, i) = 1.0 - p - q;
        }
    }
    m(n - 1, n - 1) = 1.0;
    return m;
}

/// Plain M^N by repeated squaring, no normalization. N >= 1.
inline Matrix matrix_power(const Matrix& m, std::size_t n) {
    if (n < 1) throw std::invalid_argument("matrix power exponent must be at least 1");
    Matrix result;
    Matrix base = m;
    bool have_result = false;
    while (n > 0) {
        if (n & 1U) {
            result = have_result ? Matrix(result * base) : base;
            have_result = true;
        }
        n >>= 1U;
        if (n > 0) base = base * base;
    }
    return result;
}

/// Largest |row sum - 1| over all rows.
inline double stochastic_drift(const Matrix& m) {
    return (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

/// N-step transition matrix of a row-stochastic M. Rows are renormalized when
/// rounding drift exceeds 1e-12; drift beyond 1e-9 is an internal error.
inline Matrix n_step_matrix(const Matrix& m, std::size_t n) {
    Matrix r = matrix_power(m, n);
    const double drift = stochastic_drift(r);
    if (drift > 1e-9)
        throw InternalConsistencyError("matrix power lost stochasticity, drift " +
                                       std::to_string(drift));
    if (drift > 1e-12) {
        const Vector sums = r.rowwise().sum();
        for (Eigen::Index i = 0; i < r.rows(); ++i) r.row(i) /= sums(i);
    }
    return r;
}

inline void check_support(const Support& support, std::size_t num_sublinks) {
    if (support.first < 1 || support.first > support.last || support.last > num_sublinks)
        throw std::out_of_range("beam support [" + std::to_string(support.first) + ", " +
                                std::to_string(support.last) + "] is empty or outside 1.." +
                                std::to_string(num_sublinks));
}

/// M restricted to the beam support: entries with either endpoint outside
/// the support are zeroed. The exit state is never in a support.
inline Matrix restricted_matrix(const Matrix& m, const Support& support) {
    const auto num_sublinks = static_cast<std::size_t>(m.rows() - 1);
    check_support(support, num_sublinks);
    Matrix r = Matrix::Zero(m.rows(), m.cols());
    const auto lo = static_cast<Eigen::Index>(support.first - 1);
    const auto len = static_cast<Eigen::Index>(support.size());
    r.block(lo, lo, len, len) = m.block(lo, lo, len, len);
    return r;
}

/**
 * Memoized matrix powers of one base transition matrix.
 *
 * Full powers M^N and restricted powers (M restricted to a support)^N are
 * cached under (support, N). Lookups take a shared lock; insertion takes the
 * exclusive lock.
 */
class MatrixPowerCache {
public:
    explicit MatrixPowerCache(Matrix base) : base_(std::move(base)) {}

    const Matrix& base() const { return base_; }
    std::size_t num_sublinks() const { return static_cast<std::size_t>(base_.rows() - 1); }

    const Matrix& full(std::size_t n) { return lookup({0, 0, n}, [&] { return n_step_matrix(base_, n); }); }

    const Matrix& restricted(const Support& support, std::size_t n) {
        return lookup({support.first, support.last, n},
                      [&] { return matrix_power(restricted_matrix(base_, support), n); });
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return cache_.size();
    }

private:
    using Key = std::tuple<std::size_t, std::size_t, std::size_t>;

    template <class Make>
    const Matrix& lookup(const Key& key, Make&& make) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        Matrix value = make();
        std::unique_lock lock(mutex_);
        // std::map node references stay valid across later insertions.
        return cache_.try_emplace(key, std::move(value)).first->second;
    }

    Matrix base_;
    mutable std::shared_mutex mutex_;
    std::map<Key, Matrix> cache_;
};

/**
 * Probability that the walk stays inside `support` for all N steps given it
 * starts at sub-link `s` and ends at `s_end` (both 1-based, S+1 = exit):
 * (restricted M)^N[s, s_end] / M^N[s, s_end].
 *
 * Returns 0 when M^N[s, s_end] is 0, where the ratio is 0/0.
 */
inline double stay_probability(std::size_t s, std::size_t s_end, const Support& support,
                               std::size_t n, MatrixPowerCache& powers) {
    const std::size_t num_states = powers.num_sublinks() + 1;
    if (s < 1 || s > num_states || s_end < 1 || s_end > num_states)
        throw std::out_of_range("state index outside 1..S+1");
    const double total = powers.full(n)(static_cast<Eigen::Index>(s - 1),
                                        static_cast<Eigen::Index>(s_end - 1));
    if (total == 0.0) return 0.0;
    const double inside = powers.restricted(support, n)(static_cast<Eigen::Index>(s - 1),
                                                        static_cast<Eigen::Index>(s_end - 1));
    return std::min(1.0, inside / total);
}

inline double stay_probability(std::size_t s, std::size_t s_end, const Support& support,
                               std::size_t n, const Matrix& m) {
    MatrixPowerCache powers(m);
    return stay_probability(s, s_end, support, n, powers);
}

/// Expected number of micro-slots until absorption in the exit state when
/// starting from sub-link 1, from the fundamental matrix (I - Q)^-1 1.
inline double expected_episode_duration(const Matrix& m) {
    const Eigen::Index n = m.rows() - 1;
    const Matrix transient = m.topLeftCorner(n, n);
    Eigen::FullPivLU<Matrix> lu(Matrix::Identity(n, n) - transient);
    if (!lu.isInvertible())
        throw InternalConsistencyError("transient block is not absorbing; (I - Q) is singular");
    const Vector hitting = lu.solve(Vector::Ones(n));
    return hitting(0);
}

} // namespace beampomdp
