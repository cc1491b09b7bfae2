#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <tauvis/camera.hpp>

using namespace tauvis;
using std::numbers::pi;

namespace {

World single_feature(Vec2 p, double height = 0.0) {
    World w;
    w.features.push_back({0, p, std::nullopt, height});
    return w;
}

CameraConfig noiseless() {
    CameraConfig c;
    c.pixel_noise_sigma = 0.0;
    return c;
}

}  // namespace

TEST(Camera, DefaultFieldOfView) {
    const CameraConfig c;
    EXPECT_NEAR(c.hfov(), 2.0 * std::atan(640.0 / 600.0), 1e-15);
    EXPECT_NEAR(c.hfov() * 180.0 / pi, 93.69, 0.01);
    EXPECT_DOUBLE_EQ(c.frame_interval(), 1.0 / 30.0);
}

TEST(Project, DeadAheadIsAtOrigin) {
    const auto pts = project({0, 0, pi / 2, 1}, noiseless(), single_feature({0, 5}));
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_NEAR(pts[0].u_px, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(pts[0].v_px, 0.0);
}

TEST(Project, HandWorkedPinhole) {
    const auto pts = project({0, 0, pi / 2, 1}, noiseless(), single_feature({1, 3}));
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_NEAR(pts[0].u_px, 100.0, 1e-12);
}

TEST(Project, HeightGivesVerticalCoordinate) {
    const auto pts = project({0, 0, pi / 2, 1}, noiseless(), single_feature({1, 3}, 0.3));
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_NEAR(pts[0].v_px, 30.0, 1e-12);
}

TEST(Project, FieldOfViewBoundary) {
    const auto cam = noiseless();
    const double half = 0.5 * cam.hfov();
    const double depth = 10.0;
    const auto inside = project({0, 0, 0, 1}, cam, single_feature({depth, -depth * std::tan(half - 1e-6)}));
    const auto outside = project({0, 0, 0, 1}, cam, single_feature({depth, -depth * std::tan(half + 1e-6)}));
    EXPECT_EQ(inside.size(), 1u);
    EXPECT_TRUE(outside.empty());
}

TEST(Project, BehindCameraAndOccludedDropped) {
    const auto cam = noiseless();
    EXPECT_TRUE(project({0, 0, pi / 2, 1}, cam, single_feature({0.5, -3})).empty());
    World w = single_feature({0, 5});
    w.walls.push_back({{-1, 2}, {1, 2}});
    EXPECT_TRUE(project({0, 0, pi / 2, 1}, cam, w).empty());
}

TEST(Project, MountOffsetRotatesAxis) {
    auto cam = noiseless();
    cam.mount_offset_phi = 0.2;
    const Vec2 on_axis = Vec2{0, 0} + heading_vector(pi / 2 + 0.2) * 4.0;
    const auto pts = project({0, 0, pi / 2, 1}, cam, single_feature(on_axis));
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_NEAR(pts[0].u_px, 0.0, 1e-12);
}

TEST(Project, BearingMatchesGeometryWithZeroOffset) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> coord(-10, 10), ang(-pi, pi);
    const auto cam = noiseless();
    int checked = 0;
    for (int i = 0; i < 2000; ++i) {
        const VehicleState s{coord(rng), coord(rng), ang(rng), 1.0};
        const Vec2 p{coord(rng), coord(rng)};
        const auto pts = project(s, cam, single_feature(p));
        if (pts.empty()) continue;
        const Vec2 rel = p - s.position();
        // Positive bearing is to the right of the heading.
        const double bearing = normalize_angle(s.theta - std::atan2(rel.y, rel.x));
        EXPECT_NEAR(std::atan(pts[0].u_px / cam.focal_px), bearing, 1e-12);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(MakeTracks, StaticSceneHasZeroFlow) {
    const std::vector<ImagePoint> pts{{1, 10, 5}, {2, -40, 0}};
    const auto tracks = make_tracks(pts, pts, noiseless());
    ASSERT_EQ(tracks.size(), 2u);
    for (const auto& t : tracks) {
        EXPECT_EQ(t.vel_u, 0.0);
        EXPECT_EQ(t.vel_v, 0.0);
    }
}

TEST(MakeTracks, FiniteDifference) {
    const auto tracks = make_tracks({{3, 90, 0}}, {{3, 100, 0}}, noiseless());
    ASSERT_EQ(tracks.size(), 1u);
    EXPECT_NEAR(tracks[0].vel_u, 300.0, 1e-9);
    EXPECT_EQ(tracks[0].u_px, 100.0);
}

TEST(MakeTracks, UnmatchedFeaturesDropped) {
    const auto tracks = make_tracks({{1, 0, 0}, {2, 5, 0}}, {{2, 6, 0}, {3, 7, 0}}, noiseless());
    ASSERT_EQ(tracks.size(), 1u);
    EXPECT_EQ(tracks[0].feature_id, 2);
}

TEST(MakeTracks, NoiseOnBothEndpoints) {
    CameraConfig cam;
    cam.pixel_noise_sigma = 0.5;
    std::mt19937_64 rng(99);
    const std::vector<ImagePoint> pts{{1, 50, 0}};
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = make_tracks(pts, pts, cam, rng)[0].vel_u;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    const double expected = 0.5 * std::sqrt(2.0) * 30.0;
    EXPECT_NEAR(sd, expected, 0.03 * expected);
    EXPECT_NEAR(mean, 0.0, 0.05 * expected);
}

TEST(Tracker, DeterministicForSeed) {
    const auto world = single_feature({1, 6});
    CameraConfig cam;
    cam.rng_seed = 17;
    auto run = [&] {
        FeatureTracker tr(cam);
        VehicleState s{0, 0, pi / 2, 1};
        std::vector<Track> all;
        for (int k = 0; k < 20; ++k) {
            auto t = tr.advance(project(s, cam, world));
            all.insert(all.end(), t.begin(), t.end());
            s = step(s, {0.1, 1.0}, cam.frame_interval());
        }
        return all;
    };
    const auto a = run();
    const auto b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].u_px, b[i].u_px);
        EXPECT_EQ(a[i].vel_u, b[i].vel_u);
        EXPECT_EQ(a[i].vel_v, b[i].vel_v);
    }
}

TEST(Tracker, AgesCount) {
    const auto world = single_feature({1, 6});
    const auto cam = noiseless();
    FeatureTracker tr(cam);
    VehicleState s{0, 0, pi / 2, 1};
    EXPECT_TRUE(tr.advance(project(s, cam, world)).empty());
    for (int k = 2; k < 6; ++k) {
        s = step(s, {0, 1}, cam.frame_interval());
        const auto t = tr.advance(project(s, cam, world));
        ASSERT_EQ(t.size(), 1u);
        EXPECT_EQ(t[0].age, k);
    }
}

TEST(Tracker, StraightMotionExpandsFlow) {
    World w;
    w.walls = {{{-2, -2}, {-2, 30}}, {{2, -2}, {2, 30}}};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> h(-0.5, 0.5);
    for (int i = 1; i < 120; ++i) {
        w.features.push_back({i, {-2, -2 + 0.25 * i}, 0, h(rng)});
        w.features.push_back({1000 + i, {2, -2 + 0.25 * i}, 1, h(rng)});
    }
    const auto cam = noiseless();
    FeatureTracker tr(cam);
    VehicleState s{0.3, 0, pi / 2, 1};
    int checked = 0;
    for (int k = 0; k < 60; ++k) {
        for (const auto& t : tr.advance(project(s, cam, w))) {
            const double r_dot = (t.u_px * t.vel_u + t.v_px * t.vel_v) / std::hypot(t.u_px, t.v_px);
            EXPECT_GT(r_dot, 0.0) << "feature " << t.feature_id;
            ++checked;
        }
        s = step(s, {0, 1}, cam.frame_interval());
    }
    EXPECT_GT(checked, 1000);
}
