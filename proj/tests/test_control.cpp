#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <tauvis/control.hpp>

using namespace tauvis;

namespace {

RoiSummary summary(std::array<std::optional<double>, kRoiCount> tau) {
    RoiSummary s;
    s.tau = tau;
    return s;
}

}  // namespace

TEST(TauBalancing, Examples) {
    GainConfig g;
    g.k_f = 0.1;
    g.k_m = 0.2;
    EXPECT_DOUBLE_EQ(*tau_balancing(summary({5.0, 3.0, 9.0, 3.0, 5.0}), g), 0.0);
    EXPECT_NEAR(*tau_balancing(summary({6.0, 3.0, 1.0, 3.0, 4.0}), g), 0.2, 1e-15);
    EXPECT_FALSE(tau_balancing(summary({6.0, std::nullopt, 1.0, 3.0, 4.0}), g));
}

TEST(TauBalancing, AntisymmetricAndClamped) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tau(0.1, 50.0), gain(0.01, 2.0);
    for (int i = 0; i < 2000; ++i) {
        GainConfig g;
        g.k_f = gain(rng);
        g.k_m = gain(rng);
        const auto s = summary({tau(rng), tau(rng), tau(rng), tau(rng), tau(rng)});
        const double u = *tau_balancing(s, g);
        EXPECT_EQ(*tau_balancing(s.mirrored(), g), -u);
        EXPECT_LE(std::abs(u), g.u_max);
    }
}

TEST(SingleWall, Examples) {
    GainConfig g;
    g.k = 0.5;
    g.c = 3.0;
    const auto s = summary({std::nullopt, 5.0, std::nullopt, 5.0, 3.0});
    EXPECT_DOUBLE_EQ(*single_wall(s, WallSide::Left, Roi::Left, g), 1.0);
    EXPECT_DOUBLE_EQ(*single_wall(s, WallSide::Right, Roi::Right, g), -1.0);
    EXPECT_DOUBLE_EQ(*single_wall(s, WallSide::Right, Roi::FarRight, g), 0.0);
    EXPECT_FALSE(single_wall(s, WallSide::Left, Roi::FarLeft, g));
}

TEST(SingleWall, SetpointPlacesRestOnTarget) {
    EXPECT_DOUBLE_EQ(single_wall_setpoint(0.64, 2.0), 1.92);
    EXPECT_DOUBLE_EQ(single_wall_setpoint(1.0, 2.0, 0.5), 3.5);
}

TEST(Kong, Examples) {
    const GainConfig g;
    const std::vector<TauObservation> flat{{0.0, 3.0}, {0.1, 3.0}};
    EXPECT_DOUBLE_EQ(*kong_derivative_law(flat, flat, g), 0.0);
    const std::vector<TauObservation> tau1{{0.0, 3.0}, {0.1, 2.9}};
    const std::vector<TauObservation> tau2{{0.0, 5.0}, {0.1, 4.8}};
    EXPECT_NEAR(*kong_derivative_law(tau1, tau2, g), -1.0, 1e-12);
    EXPECT_FALSE(kong_derivative_law(std::span(tau1).first(1), tau2, g));
    const std::vector<TauObservation> stalled{{0.1, 3.0}, {0.1, 2.9}};
    EXPECT_FALSE(kong_derivative_law(stalled, tau2, g));
}

TEST(SelectController, Dispatch) {
    const GainConfig g;
    const BehaviorConfig b;
    const auto balanced = summary({5.0, 3.0, 9.0, 3.0, 5.0});
    const auto c = select_controller(SceneMode::Corridor, balanced, g, b);
    EXPECT_DOUBLE_EQ(c.u, 0.0);
    EXPECT_DOUBLE_EQ(c.v, b.v_cruise);

    const auto left = summary({4.0, 3.0, 9.0, std::nullopt, std::nullopt});
    EXPECT_EQ(select_controller(SceneMode::SingleWallLeft, left, g, b).u,
              *single_wall(left, WallSide::Left, Roi::FarLeft, g));
    const auto right = left.mirrored();
    EXPECT_EQ(select_controller(SceneMode::SingleWallRight, right, g, b).u,
              *single_wall(right, WallSide::Right, Roi::FarRight, g));

    const auto blind = select_controller(SceneMode::Blind, RoiSummary{}, g, b);
    EXPECT_EQ(blind.u, 0.0);
    EXPECT_EQ(blind.v, b.v_blind);

    EXPECT_GT(select_controller(SceneMode::TurnLeft, balanced, g, b).u, 0.0);
    EXPECT_LT(select_controller(SceneMode::TurnRight, balanced, g, b).u, 0.0);
    EXPECT_EQ(select_controller(SceneMode::TurnRight, balanced, g, b).v, b.v_turn);
}

TEST(SelectController, FallsBackWhenPerceptionIsPartial) {
    GainConfig g;
    g.k_f = 0.1;
    const BehaviorConfig b;
    const auto outer_only = summary({6.0, std::nullopt, 2.0, std::nullopt, 4.0});
    EXPECT_NEAR(select_controller(SceneMode::Corridor, outer_only, g, b).u, g.k_f * 2.0, 1e-15);
    EXPECT_EQ(select_controller(SceneMode::Corridor, RoiSummary{}, g, b).u, 0.0);
    // Far field missing on the wall side uses the inner field.
    g.c = 2.0;
    const auto inner = summary({std::nullopt, 3.0, 9.0, std::nullopt, std::nullopt});
    EXPECT_EQ(select_controller(SceneMode::SingleWallLeft, inner, g, b).u,
              *single_wall(inner, WallSide::Left, Roi::Left, g));
    EXPECT_EQ(select_controller(SceneMode::SingleWallLeft, RoiSummary{}, g, b).u, 0.0);
}

TEST(SelectController, AlwaysBounded) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> tau(0.1, 50.0);
    std::bernoulli_distribution present(0.7);
    std::uniform_int_distribution<int> mode(0, 5);
    const GainConfig g;
    const BehaviorConfig b;
    for (int i = 0; i < 5000; ++i) {
        RoiSummary s;
        for (auto& t : s.tau)
            if (present(rng)) t = tau(rng);
        const auto cmd = select_controller(static_cast<SceneMode>(mode(rng)), s, g, b);
        EXPECT_TRUE(std::isfinite(cmd.u));
        EXPECT_LE(std::abs(cmd.u), g.u_max);
        EXPECT_GE(cmd.v, 0.0);
    }
}

TEST(Gains, ValidationNamesField) {
    GainConfig g;
    g.k_m = -0.1;
    try {
        g.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("gains.k_m"), std::string::npos);
    }
}

TEST(SenseAct, GateExamples) {
    const SenseActSchedule s;
    const auto a = sense_act_gate(0.2, s, 0.7);
    EXPECT_EQ(a.phase, Phase::Sense);
    EXPECT_EQ(a.u, 0.0);
    const auto b = sense_act_gate(0.5, s, 0.7);
    EXPECT_EQ(b.phase, Phase::Act);
    EXPECT_EQ(b.u, 0.7);
    EXPECT_EQ(sense_act_gate(0.65, s, 0.7).phase, Phase::Sense);
    EXPECT_EQ(sense_act_gate(0.4, s, 0.7).phase, Phase::Act);
    EXPECT_DOUBLE_EQ(s.period(), 0.65);
}

TEST(SenseAct, Boundaries) {
    const SenseActSchedule s;
    EXPECT_NEAR(s.next_boundary(0.0), 0.4, 1e-12);
    EXPECT_NEAR(s.next_boundary(0.4), 0.65, 1e-12);
    EXPECT_NEAR(s.next_boundary(0.5), 0.65, 1e-12);
    EXPECT_NEAR(s.next_boundary(0.65), 1.05, 1e-12);
    const SenseActSchedule shifted{0.4, 0.25, 1.0};
    EXPECT_EQ(shifted.phase_at(1.1), Phase::Sense);
    EXPECT_EQ(shifted.phase_at(1.5), Phase::Act);
}

TEST(SenseAct, NoTurningDuringSense) {
    const SenseActSchedule s;
    const double dt = 0.001;
    double sense_turn = 0.0, act_time = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double t = (i + 0.5) * dt;
        const auto g = sense_act_gate(t, s, 1.0);
        if (g.phase == Phase::Sense) sense_turn += std::abs(g.u) * dt;
        else act_time += dt;
    }
    EXPECT_EQ(sense_turn, 0.0);
    EXPECT_NEAR(act_time / 100.0, 0.25 / 0.65, 1e-3);
}
