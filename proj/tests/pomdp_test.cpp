#include "beampomdp/pomdp.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace beampomdp;

namespace {

BeamModelSpec small_spec(std::size_t s_count, double p = 0.3, double q = 0.1) {
    BeamModelSpec spec;
    spec.radio.num_sublinks = s_count;
    spec.detection = DetectionSpec::from_epsilon(1e-2);
    spec.mobility = {0.0, 0.0, 0.0, p, q};
    spec.dt_powers = {dbm_to_watts(10.0), dbm_to_watts(20.0)};
    spec.dt_durations = {2, 4};
    return spec;
}

} // namespace

TEST(Pomdp, ActionEnumerationIsCanonical) {
    const auto actions = enumerate_actions(3, 1e-3, 1, {0.1, 0.01}, {4, 2});
    ASSERT_EQ(actions.size(), 6u + 6u * 4u);
    EXPECT_TRUE(actions.front().is_bt());
    EXPECT_EQ(actions.front().support, (Support{1, 1}));
    EXPECT_EQ(actions[5].support, (Support{3, 3}));
    EXPECT_TRUE(actions[6].is_dt());
    EXPECT_EQ(actions[6].power_per_beam, 0.01);
    EXPECT_EQ(actions[6].duration, 2u);
    EXPECT_EQ(actions[7].duration, 4u);
    EXPECT_EQ(actions[8].power_per_beam, 0.1);
}

TEST(Pomdp, DefaultModelHasEveryConsecutiveSupport) {
    BeamModelSpec spec;
    const RadioConfig& r = spec.radio;
    spec.mobility = MobilityParams::from_speed(20.0, default_speed_variance(20.0, r.sublink_length() / r.micro_slot),
                                               r.sublink_length() / r.micro_slot);
    spec.dt_powers = {dbm_to_watts(10.0), dbm_to_watts(20.0), dbm_to_watts(30.0)};
    spec.dt_durations = {1000, 2000, 3000};
    const BeamPomdp pomdp(spec);
    EXPECT_EQ(pomdp.model().num_states, 11u);
    EXPECT_EQ(pomdp.actions().size(), 55u + 55u * 9u);
    EXPECT_NO_THROW(pomdp.model().validate(1e-12));
}

TEST(Pomdp, ObservationsFormADistribution) {
    const BeamPomdp pomdp(small_spec(4));
    for (std::size_t a = 0; a < pomdp.actions().size(); ++a)
        for (std::size_t s = 1; s <= 5; ++s)
            for (std::size_t e = 1; e <= 5; ++e) {
                double total = 0.0;
                for (std::size_t o = 0; o < kNumObservations; ++o) {
                    const double p = pomdp.observation_prob(static_cast<Observation>(o), s, a, e);
                    EXPECT_GE(p, 0.0);
                    total += p;
                }
                EXPECT_NEAR(total, 1.0, 1e-12);
            }
}

TEST(Pomdp, ExitIsAbsorbingAndAlwaysObserved) {
    const BeamPomdp pomdp(small_spec(3));
    const std::size_t exit = pomdp.exit_sublink();
    for (std::size_t a = 0; a < pomdp.actions().size(); ++a) {
        EXPECT_EQ(pomdp.model().transition[a](3, 3), 1.0);
        EXPECT_EQ(pomdp.observation_prob(Observation::Exit, exit, a, exit), 1.0);
        EXPECT_EQ(pomdp.observation_prob(Observation::Exit, 3, a, exit), 1.0);
        EXPECT_EQ(pomdp.observation_prob(Observation::Exit, 2, a, 2), 0.0);
        EXPECT_EQ(pomdp.expected_reward(exit, a), 0.0);
        EXPECT_EQ(pomdp.expected_cost(exit, a), 0.0);
    }
}

TEST(Pomdp, BeamTrainingAckFollowsDetectionTargets) {
    const BeamPomdp pomdp(small_spec(4));
    const std::size_t a = pomdp.bt_action({2, 3});
    const double pd = pomdp.spec().detection.p_detect();
    const double pfa = pomdp.spec().detection.p_fa;
    EXPECT_DOUBLE_EQ(pomdp.observation_prob(Observation::Ack, 2, a, 3), pd);
    EXPECT_DOUBLE_EQ(pomdp.observation_prob(Observation::Ack, 3, a, 3), pd);
    EXPECT_DOUBLE_EQ(pomdp.observation_prob(Observation::Ack, 1, a, 2), pfa);
    EXPECT_DOUBLE_EQ(pomdp.observation_prob(Observation::Ack, 3, a, 4), pfa);
    EXPECT_DOUBLE_EQ(pomdp.observation_prob(Observation::Nack, 3, a, 4), 1.0 - pfa);
}

TEST(Pomdp, DataTransmissionAckIsTheStayProbability) {
    const BeamPomdp pomdp(small_spec(4));
    const Matrix m = oracle::walk_matrix(0.3, 0.1, 4);
    const std::size_t a = pomdp.dt_action({2, 3}, dbm_to_watts(20.0), 4);
    for (std::size_t s = 1; s <= 4; ++s)
        for (std::size_t e = 1; e <= 4; ++e)
            EXPECT_NEAR(pomdp.observation_prob(Observation::Ack, s, a, e), oracle::stay_probability(m, s, e, 2, 3, 4),
                        1e-12);
}

TEST(Pomdp, RewardIsRateTimesPayloadSlotsTimesStayProbability) {
    const BeamPomdp pomdp(small_spec(4));
    const Matrix m = oracle::walk_matrix(0.3, 0.1, 4);
    const Matrix m4 = m * m * m * m;
    for (Support sup : {Support{1, 1}, Support{2, 3}, Support{1, 4}}) {
        const std::size_t a = pomdp.dt_action(sup, dbm_to_watts(10.0), 4);
        const double rate = achievable_rate(pomdp.spec().radio, dbm_to_watts(10.0) * sup.size(), sup.size());
        EXPECT_DOUBLE_EQ(pomdp.rate(a), rate);
        for (std::size_t s = 1; s <= 4; ++s) {
            // P(ACK | s) = sum_e P(stay | s, e) P(e | s).
            double ack = 0.0;
            for (std::size_t e = 1; e <= 4; ++e)
                ack += oracle::stay_probability(m, s, e, sup.first, sup.last, 4) * m4(s - 1, e - 1);
            EXPECT_NEAR(pomdp.expected_reward(s, a), rate * 3.0 * ack, 1e-6 * rate);
        }
    }
}

TEST(Pomdp, CostIsPowerTimesBeamsTimesSlots) {
    const BeamPomdp pomdp(small_spec(4));
    const std::size_t dt = pomdp.dt_action({1, 3}, dbm_to_watts(20.0), 4);
    EXPECT_NEAR(pomdp.expected_cost(2, dt), 100.0 * 3.0 * 3.0, 1e-12);
    const std::size_t bt = pomdp.bt_action({2, 4});
    EXPECT_NEAR(pomdp.expected_cost(1, bt), pomdp.bt_power() * 1e3 * 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(pomdp.bt_power(), min_bt_power(pomdp.spec().radio, pomdp.spec().detection));
}

TEST(Pomdp, ActionLookupRejectsUnknownActions) {
    const BeamPomdp pomdp(small_spec(3));
    EXPECT_THROW(pomdp.dt_action({1, 1}, 123.0, 4), std::out_of_range);
    EXPECT_THROW(pomdp.expected_cost(0, 0), std::out_of_range);
    const std::size_t a = pomdp.dt_action({1, 2}, dbm_to_watts(20.0), 2);
    EXPECT_EQ(pomdp.action_index(pomdp.actions()[a]), a);
}

TEST(Pomdp, InvalidSpecsAreRejected) {
    BeamModelSpec spec = small_spec(3);
    spec.bt_duration = 2;
    EXPECT_THROW(BeamPomdp{spec}, ConfigError);
    spec = small_spec(3);
    spec.dt_durations = {1};
    EXPECT_THROW(BeamPomdp{spec}, ConfigError);
    spec = small_spec(3);
    spec.detection.p_md = 0.0;
    EXPECT_THROW(BeamPomdp{spec}, ConfigError);
}
