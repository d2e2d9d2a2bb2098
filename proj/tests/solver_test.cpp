#include "beampomdp/belief.hpp"
#include "beampomdp/solver.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace beampomdp;

namespace {

AlphaVector random_alpha(std::size_t n, std::size_t action, double lambda, Rng& rng) {
    AlphaVector a;
    a.reward = Vector(static_cast<Eigen::Index>(n));
    a.cost = Vector(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < a.reward.size(); ++i) {
        a.reward(i) = 20.0 * rng.uniform();
        a.cost(i) = rng.uniform();
    }
    a.values = a.reward - lambda * a.cost;
    a.action = action;
    return a;
}

Vector random_simplex(std::size_t n, Rng& rng) {
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform();
    return v / v.sum();
}

/// Compares the library backup with the enumeration oracle, including the
/// reward/cost split that only the tie rule decides.
void expect_backup_matches(const PomdpModel& model, const Belief& b, const ValueFunction& v, double lambda,
                           double discount) {
    const PointBasedSolver solver(model, discount);
    const AlphaVector got = solver.backup(b, v, lambda);
    std::vector<Vector> values;
    for (const AlphaVector& a : v.alphas) values.push_back(a.values);
    const oracle::BackupChoice want = oracle::exhaustive_backup(model, b.probs, values, lambda, discount);
    ASSERT_EQ(got.action, want.action);
    Vector reward = model.reward.col(static_cast<Eigen::Index>(want.action));
    for (std::size_t o = 0; o < model.num_observations; ++o)
        reward += discount * (model.kernel[want.action][o] * v.alphas[want.selection[o]].reward);
    const double scale = 1.0 + want.values.cwiseAbs().maxCoeff();
    EXPECT_LT((got.values - want.values).cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LT((got.reward - reward).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + reward.cwiseAbs().maxCoeff()));
}

BeamPomdp small_beam_model(std::size_t s_count, double p = 0.3, double q = 0.1,
                           std::vector<std::size_t> durations = {2, 3}) {
    BeamModelSpec spec;
    spec.radio.num_sublinks = s_count;
    spec.detection = DetectionSpec::from_epsilon(1e-2);
    spec.mobility = {0.0, 0.0, 0.0, p, q};
    spec.dt_powers = {dbm_to_watts(10.0), dbm_to_watts(20.0)};
    spec.dt_durations = std::move(durations);
    return BeamPomdp(spec);
}

} // namespace

TEST(Solver, BackupMatchesExhaustiveEnumeration) {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const PomdpModel model = oracle::random_pomdp(3, 1 + rng.below(3), 2 + rng.below(2), rng);
        const double lambda = 5.0 * rng.uniform();
        ValueFunction v{{}, lambda};
        const std::size_t count = 1 + rng.below(5);
        for (std::size_t i = 0; i < count; ++i) v.alphas.push_back(random_alpha(3, 0, lambda, rng));
        // Same values, different reward/cost split: only the tie rule picks.
        if (trial % 3 == 0) {
            AlphaVector twin = v.alphas.front();
            twin.reward.array() += 1.0;
            twin.cost.array() += 1.0 / std::max(lambda, 1e-3);
            twin.values = v.alphas.front().values;
            v.alphas.push_back(twin);
        }
        expect_backup_matches(model, Belief(random_simplex(3, rng)), v, lambda, 0.5 + 0.5 * rng.uniform());
    }
}

TEST(Solver, BackupMatchesEnumerationOnBeamModel) {
    const BeamPomdp pomdp = small_beam_model(2);
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const double lambda = 1e3 * rng.uniform();
        ValueFunction v{{}, lambda};
        for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
            AlphaVector a = random_alpha(3, 0, lambda, rng);
            a.reward *= 1e10;
            a.values = a.reward - lambda * a.cost;
            v.alphas.push_back(a);
        }
        expect_backup_matches(pomdp.model(), Belief(random_simplex(3, rng)), v, lambda, 1.0);
    }
}

TEST(Solver, GreedyTieRuleKeepsLowestIndex) {
    ValueFunction v;
    const Vector same = Vector::Constant(2, 1.0);
    v.alphas = {{same, same, Vector::Zero(2), 7}, {same, same, Vector::Zero(2), 3}};
    EXPECT_EQ(greedy_action(Belief(Vector::Constant(2, 0.5)), v), 7u);
    EXPECT_THROW(greedy_action(Belief(same), ValueFunction{}), std::invalid_argument);
}

TEST(Solver, PerseusStagesNeverLowerBeliefValues) {
    const BeamPomdp pomdp = small_beam_model(4);
    const PointBasedSolver solver(pomdp.model());
    const auto beliefs = structured_belief_set(4, 4);
    Rng rng(1, 0);
    for (double lambda : {0.0, 1e6, 1e8}) {
        ValueFunction v = solver.initial_value_function(lambda);
        for (int stage = 0; stage < 30; ++stage) {
            const ValueFunction next = solver.perseus_stage(beliefs, v, lambda, rng);
            for (const Belief& b : beliefs) EXPECT_GE(next.value(b), v.value(b) - 1e-9);
            v = next;
        }
    }
}

TEST(Solver, RepricingRecomputesValuesFromRewardAndCost) {
    Rng rng(4);
    ValueFunction v{{random_alpha(4, 1, 2.0, rng), random_alpha(4, 2, 2.0, rng)}, 2.0};
    const ValueFunction w = v.repriced(5.0);
    EXPECT_EQ(w.lambda, 5.0);
    for (std::size_t i = 0; i < 2; ++i)
        EXPECT_LT((w.alphas[i].values - (v.alphas[i].reward - 5.0 * v.alphas[i].cost)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Solver, FullyObservableMatchesValueIteration) {
    const BeamPomdp pomdp = small_beam_model(4, 0.2, 0.05, {2, 4});
    const PomdpModel model = oracle::perfectly_observed(pomdp.model());
    const PointBasedSolver solver(model);
    std::vector<Belief> points;
    for (std::size_t s = 0; s < model.num_states; ++s) points.push_back(point_belief(model.num_states, s));
    for (double lambda : {0.0, 1e6}) {
        const Vector exact = oracle::value_iteration(model, lambda, 1.0, 1e-10);
        ASSERT_GT(exact.head(4).minCoeff(), 0.0) << "zero is not a lower bound at lambda " << lambda;
        SolverParams params;
        params.eps_v = 1e-13;
        params.max_stages = 100000;
        const SolveResult r = solver.solve(points, points.front(), lambda, params);
        ASSERT_TRUE(r.converged);
        for (std::size_t s = 0; s < 4; ++s) {
            const double got = r.value_function.value(points[s]);
            EXPECT_NEAR(got, exact(static_cast<Eigen::Index>(s)), 1e-6 * std::abs(exact(static_cast<Eigen::Index>(s))));
        }
        EXPECT_EQ(r.value_function.value(points.back()), 0.0);
    }
}

TEST(Solver, ConvergenceTestSkipsZeroSums) {
    EXPECT_FALSE(PointBasedSolver::value_converged(0.0, 0.0, 1e-3));
    EXPECT_FALSE(PointBasedSolver::value_converged(0.0, 5.0, 1e-3));
    EXPECT_TRUE(PointBasedSolver::value_converged(100.0, 100.05, 1e-3));
    EXPECT_FALSE(PointBasedSolver::value_converged(100.0, 100.5, 1e-3));
}

TEST(Solver, ZeroValueFixedPointTerminates) {
    // Every action costs more than it earns, so V stays at zero.
    const BeamPomdp pomdp = small_beam_model(3);
    const PointBasedSolver solver(pomdp.model());
    const auto beliefs = structured_belief_set(3, 3);
    const SolveResult r = solver.solve(beliefs, initial_belief(3), 1e15, SolverParams{});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.stages.size(), 1u);
    EXPECT_EQ(r.value_b0, 0.0);
}

TEST(Solver, LogGridSpansTheRange) {
    const auto g = SolverParams::log_grid(1e5, 1e11, 13);
    ASSERT_EQ(g.size(), 13u);
    EXPECT_DOUBLE_EQ(g.front(), 1e5);
    EXPECT_NEAR(g.back(), 1e11, 1e-3);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::sqrt(10.0), 1e-9);
}

TEST(Solver, SweepIsIndependentOfThreadCount) {
    const BeamPomdp pomdp = small_beam_model(4);
    const PointBasedSolver solver(pomdp.model());
    const auto beliefs = structured_belief_set(4, 4);
    SolverParams params;
    params.lambda_grid = SolverParams::log_grid(1e5, 1e9, 5);
    params.threads = 1;
    const SweepResult one = solver.sweep(beliefs, initial_belief(4), params);
    params.threads = 3;
    const SweepResult three = solver.sweep(beliefs, initial_belief(4), params);
    ASSERT_EQ(one.points.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(one.points[i].value_b0, three.points[i].value_b0);
        EXPECT_EQ(one.points[i].stages.size(), three.points[i].stages.size());
    }
    ASSERT_TRUE(one.best);
    EXPECT_EQ(*one.best, 0u); // no budget: the cheapest multiplier has the largest V(b0)
}

TEST(Solver, SweepPicksLargestValueUnderBudget) {
    const BeamPomdp pomdp = small_beam_model(4);
    const PointBasedSolver solver(pomdp.model());
    const auto beliefs = structured_belief_set(4, 4);
    SolverParams params;
    params.lambda_grid = SolverParams::log_grid(1e5, 1e9, 5);
    const SweepResult free = solver.sweep(beliefs, initial_belief(4), params);
    params.cost_budget = free.points[2].cost_b0 * 1.0000001;
    const SweepResult bounded = solver.sweep(beliefs, initial_belief(4), params);
    ASSERT_TRUE(bounded.best);
    EXPECT_LT(bounded.points[*bounded.best].cost_b0, params.cost_budget);
    for (std::size_t i = 0; i < 5; ++i)
        if (bounded.points[i].cost_b0 < params.cost_budget)
            EXPECT_LE(bounded.points[i].value_b0, bounded.points[*bounded.best].value_b0);
}

TEST(Solver, OnlineStopsAfterOneStageWhenBudgetHoldsImmediately) {
    const BeamPomdp pomdp = small_beam_model(3);
    const PointBasedSolver solver(pomdp.model());
    SolverParams params;
    params.lambda0 = 1e15;
    params.cost_budget = 1.0;
    const OnlineResult r = solver.online(structured_belief_set(3, 3), initial_belief(3), params);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.trajectory.size(), 1u);
    EXPECT_EQ(r.lambda_opt, 1e15);
}

TEST(Solver, OnlineMeetsTheBudgetWithNonNegativeMultipliers) {
    const BeamPomdp pomdp = small_beam_model(4);
    const PointBasedSolver solver(pomdp.model());
    const auto beliefs = structured_belief_set(4, 4);
    SolverParams params;
    params.eps_v = 1e-9;
    params.max_stages = 20000;
    const SolveResult ref = solver.solve(beliefs, initial_belief(4), 1e6, params);
    params.cost_budget = ref.cost_b0;
    params.alpha0 = 1e3;
    const OnlineResult r = solver.online(beliefs, initial_belief(4), params);
    ASSERT_TRUE(r.converged);
    EXPECT_LT((r.cost_b0 - params.cost_budget) / params.cost_budget, params.eps_c);
    for (const StageRecord& s : r.trajectory) EXPECT_GE(s.lambda, 0.0);
    EXPECT_EQ(r.trajectory.front().lambda, 0.0);
    EXPECT_THROW(solver.online(beliefs, initial_belief(4), SolverParams{}), ConfigError);
}

TEST(Solver, ParallelForPropagatesExceptions) {
    EXPECT_THROW(PointBasedSolver::parallel_for(8, 3,
                                                [](std::size_t i) {
                                                    if (i == 5) throw std::runtime_error("boom");
                                                }),
                 std::runtime_error);
    std::vector<int> hits(20, 0);
    PointBasedSolver::parallel_for(20, 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
}
