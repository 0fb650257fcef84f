#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "pano_nav/panocam.hpp"

using namespace pano_nav;

namespace {

const CameraIntrinsics kCam{};

// A small cube placed so that, seen from `pose`, its centre lies at body-frame
// bearing `theta` and elevation `phi`, `range` metres from the eye.
SceneObject cube_at(const Scene& s, const AgentPose& pose, double theta, double phi, double range) {
    const double yaw = heading_deg(pose.heading) + theta;
    SceneObject o;
    o.objectId = 0;
    o.cls = fixtures::cls("apple");
    o.extent = {0.02, 0.02, 0.02};
    o.isPickable = true;
    const Vec3 eye = eye_position(s, pose.cell);
    o.center = {eye.x + range * cos_deg(phi) * sin_deg(yaw), eye.y + range * cos_deg(phi) * cos_deg(yaw),
                eye.z + range * sin_deg(phi)};
    return o;
}

} // namespace

TEST(ToPanoramic, HandValues) {
    EXPECT_EQ(to_panoramic({0, 0.5, 0.5, 0.1, 0.1}, kCam, 0.0), (PanoramicAngles{0.0, 0.0}));
    EXPECT_DOUBLE_EQ(to_panoramic({2, 0.5, 0.5, 0.1, 0.1}, kCam, 0.0).theta, 90.0);
    EXPECT_NEAR(to_panoramic({0, 1.0, 0.5, 0.1, 0.1}, kCam, 0.0).theta, 45.0, 1e-12);
    EXPECT_NEAR(to_panoramic({0, 0.5, 0.0, 0.1, 0.1}, kCam, -15.0).phi, 30.0, 1e-12);
    // Wraps into (-180, 180].
    EXPECT_NEAR(to_panoramic({7, 0.5, 0.5, 0.1, 0.1}, kCam, 0.0).theta, -45.0, 1e-12);
    EXPECT_NEAR(to_panoramic({4, 0.5, 0.5, 0.1, 0.1}, kCam, 0.0).theta, 180.0, 1e-12);
}

TEST(TrueDirection, HandValues) {
    const Scene s = fixtures::open_scene(5, 5);
    const AgentPose pose{{2, 2}, 0, 0};
    const Vec3 eye = eye_position(s, pose.cell);
    const auto ahead = true_direction_angles(s, pose, eye + Vec3{0.0, 0.25, 0.0});
    EXPECT_NEAR(ahead.theta, 0.0, 1e-12);
    EXPECT_NEAR(ahead.phi, 0.0, 1e-12);
    EXPECT_NEAR(true_direction_angles(s, pose, eye + Vec3{-0.25, 0.0, 0.0}).theta, -90.0, 1e-12);
    EXPECT_NEAR(true_direction_angles(s, pose, eye + Vec3{0.0, 0.3, 0.3}).phi, 45.0, 1e-12);
    // Body frame: pitch does not change the angles.
    EXPECT_EQ(true_direction_angles(s, {{2, 2}, 0, -30}, eye + Vec3{0.0, 0.3, 0.3}),
              true_direction_angles(s, pose, eye + Vec3{0.0, 0.3, 0.3}));
    // Heading east: a point to the north is 90 degrees left.
    EXPECT_NEAR(true_direction_angles(s, {{2, 2}, 2, 0}, eye + Vec3{0.0, 0.3, 0.0}).theta, -90.0, 1e-12);
}

TEST(Projection, OnAxisObjectIsCentred) {
    const Scene s = fixtures::open_scene(5, 5);
    const AgentPose pose{{2, 0}, 0, 0};
    const auto o = cube_at(s, pose, 0.0, 0.0, 0.75);
    ASSERT_NEAR(o.center.z, 1.5, 1e-12);
    for (auto mode : {ProjectionMode::CentroidExact, ProjectionMode::Corners}) {
        const auto box = project_object(s, pose, kCam, o, 0, mode);
        ASSERT_TRUE(box);
        EXPECT_NEAR(box->cx, 0.5, 1e-12);
        EXPECT_NEAR(box->cy, 0.5, 1e-12);
    }
}

TEST(Projection, FrustumEdgeMapsToTheBorder) {
    const Scene s = fixtures::open_scene(5, 5);
    const AgentPose pose{{2, 0}, 0, 0};
    const auto o = cube_at(s, pose, 45.0, 0.0, 0.7);
    const auto box = project_object(s, pose, kCam, o, 0, ProjectionMode::CentroidExact);
    ASSERT_TRUE(box);
    EXPECT_NEAR(box->cx, 1.0, 1e-12);
    // The same object sits in the middle of view 1.
    const auto next = project_object(s, pose, kCam, o, 1, ProjectionMode::CentroidExact);
    ASSERT_TRUE(next);
    EXPECT_NEAR(next->cx, 0.5, 1e-12);
}

TEST(Projection, BoxesStayInTheUnitSquare) {
    Rng rng(2);
    const Scene s = fixtures::open_scene(9, 9);
    for (int i = 0; i < 2000; ++i) {
        const AgentPose pose{{4, 4}, rng.below_int(8), 15 * (rng.below_int(5) - 2)};
        const auto o = cube_at(s, pose, rng.uniform(-180, 180), rng.uniform(-60, 60), rng.uniform(0.2, 1.5));
        for (int p = 0; p < 8; ++p) {
            if (auto b = project_object(s, pose, kCam, o, p, ProjectionMode::Corners)) {
                EXPECT_GE(b->cx - b->w / 2, -1e-12);
                EXPECT_LE(b->cx + b->w / 2, 1.0 + 1e-12);
                EXPECT_GE(b->cy - b->h / 2, -1e-12);
                EXPECT_LE(b->cy + b->h / 2, 1.0 + 1e-12);
                EXPECT_GT(b->w, 0.0);
                EXPECT_GT(b->h, 0.0);
            }
            // Centroid boxes keep the exact centre and report the visible extent.
            if (auto b = project_object(s, pose, kCam, o, p, ProjectionMode::CentroidExact)) {
                EXPECT_GE(b->cx, 0.0);
                EXPECT_LE(b->cx, 1.0);
                EXPECT_GE(b->cy, 0.0);
                EXPECT_LE(b->cy, 1.0);
                EXPECT_GT(b->w, 0.0);
                EXPECT_LE(b->w, 1.0);
                EXPECT_GT(b->h, 0.0);
                EXPECT_LE(b->h, 1.0);
            }
        }
    }
}

// Inverting the centroid box recovers the analytic bearing.
TEST(ProjectionProperty, CentroidRoundTrip) {
    Rng rng(11);
    const Scene s = fixtures::open_scene(9, 9);
    int checked = 0;
    for (int i = 0; i < 3000; ++i) {
        const AgentPose pose{{rng.below_int(9), rng.below_int(9)}, rng.below_int(8), 15 * (rng.below_int(5) - 2)};
        const auto o = cube_at(s, pose, rng.uniform(-180, 180), rng.uniform(-70, 70), rng.uniform(0.3, 2.0));
        const auto truth = true_direction_angles(s, pose, o.center);
        for (int p = 0; p < 8; ++p) {
            const auto b = project_object(s, pose, kCam, o, p, ProjectionMode::CentroidExact);
            if (!b) continue;
            const auto a = to_panoramic(*b, kCam, pose.pitch);
            EXPECT_LT(angular_distance_deg(a.theta, truth.theta), 1e-9);
            EXPECT_NEAR(a.phi, truth.phi, 1e-9);
            ++checked;
        }
    }
    EXPECT_GT(checked, 3000);
}

TEST(Sweep, EmptySceneGivesNoBoxes) {
    const Scene s = fixtures::open_scene(4, 4);
    EXPECT_TRUE(panoramic_sweep(s, initial_state(s, {{1, 1}, 0, 0}), kCam, ProjectionMode::Corners).empty());
}

// With a 90 degree view every 45 degrees, an object at eye height shows up in
// every view whose axis is within 45 degrees of it: two views, or three when
// it sits exactly on an axis.
TEST(Sweep, ViewCountMatchesOverlap) {
    Scene s = fixtures::open_scene(9, 9);
    const AgentPose pose{{4, 4}, 0, 0};
    for (double theta = -179.0; theta <= 180.0; theta += 7.3) {
        s.objects = {cube_at(s, pose, theta, 0.0, 0.8)};
        int expected = 0;
        for (int p = 0; p < 8; ++p) expected += std::abs(normalize_deg(theta - 45.0 * p)) <= 45.0 - 1e-9;
        const auto boxes = panoramic_sweep(s, initial_state(s, pose), kCam, ProjectionMode::CentroidExact);
        EXPECT_EQ(static_cast<int>(boxes.size()), expected) << theta;
        EXPECT_EQ(expected, 2);
        const auto corners = panoramic_sweep(s, initial_state(s, pose), kCam, ProjectionMode::Corners);
        EXPECT_GE(corners.size(), 2u);
        EXPECT_LE(corners.size(), 3u);
    }
    s.objects = {cube_at(s, pose, 90.0, 0.0, 0.8)};
    EXPECT_EQ(panoramic_sweep(s, initial_state(s, pose), kCam, ProjectionMode::CentroidExact).size(), 3u);
}

TEST(Sweep, OrderedByViewThenObject) {
    const auto g = fixtures::generated(4);
    const auto boxes = panoramic_sweep(g.scene, initial_state(g.scene, g.task.startPose), kCam, ProjectionMode::Corners);
    EXPECT_TRUE(std::is_sorted(boxes.begin(), boxes.end(), box_order));
}

// Turning by two headings rotates every world bearing by the same 90 degrees.
// Objects exactly on a view border may gain or lose that border view to
// rounding, so the centroid check compares one bearing per object and the
// corner check skips boxes clipped at the left or right edge.
TEST(SweepProperty, RotationEquivariance) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = fixtures::generated(seed);
        auto world = [&](int heading, ProjectionMode mode) {
            AgentPose pose = g.task.startPose;
            pose.heading = heading;
            std::vector<std::pair<int, double>> out;
            for (const auto& b : panoramic_sweep(g.scene, initial_state(g.scene, pose), kCam, mode)) {
                if (mode == ProjectionMode::Corners && (b.cx - b.w / 2 < 1e-9 || b.cx + b.w / 2 > 1 - 1e-9)) continue;
                const double theta = normalize_deg(to_panoramic(b, kCam, 0.0).theta + heading_deg(heading));
                out.push_back({b.objectId, std::round(theta * 1e6) / 1e6});
            }
            std::sort(out.begin(), out.end());
            if (mode == ProjectionMode::CentroidExact)
                out.erase(std::unique(out.begin(), out.end(), [](auto& x, auto& y) { return x.first == y.first; }),
                          out.end());
            return out;
        };
        for (auto mode : {ProjectionMode::CentroidExact, ProjectionMode::Corners}) {
            const auto a = world(0, mode), b = world(2, mode);
            ASSERT_EQ(a.size(), b.size()) << "seed " << seed;
            for (std::size_t i = 0; i < a.size(); ++i) {
                EXPECT_EQ(a[i].first, b[i].first);
                EXPECT_LT(angular_distance_deg(a[i].second, b[i].second), 1e-5);
            }
        }
    }
}

TEST(SweepProperty, AdjacentViewsAgree) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto g = fixtures::generated(seed);
        const auto st = initial_state(g.scene, g.task.startPose);
        const auto boxes = panoramic_sweep(g.scene, st, kCam, ProjectionMode::CentroidExact);
        for (const auto& a : boxes)
            for (const auto& b : boxes)
                if (a.objectId == b.objectId && a.p != b.p) {
                    EXPECT_LT(angular_distance_deg(to_panoramic(a, kCam, st.pose.pitch).theta,
                                                   to_panoramic(b, kCam, st.pose.pitch).theta),
                              1e-6);
                }
    }
}

TEST(Sweep, HeldObjectsAreNotSeen) {
    const Scene s = fixtures::kitchen();
    auto st = initial_state(s, {{2, 1}, 0, -30});
    const auto before = panoramic_sweep(s, st, kCam, ProjectionMode::Corners);
    st = apply_action(s, st, Action::interact(Verb::PickUp, 1)).first;
    const auto after = panoramic_sweep(s, st, kCam, ProjectionMode::Corners);
    EXPECT_TRUE(std::any_of(before.begin(), before.end(), [](const auto& b) { return b.objectId == 1; }));
    EXPECT_TRUE(std::none_of(after.begin(), after.end(), [](const auto& b) { return b.objectId == 1; }));
}

TEST(Camera, InvalidFieldOfViewIsAConfigError) {
    const Scene s = fixtures::kitchen();
    try {
        project_object(s, {{2, 1}, 0, 0}, CameraIntrinsics{180.0, 90.0}, s.objects[0], 0, ProjectionMode::Corners);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    }
}
