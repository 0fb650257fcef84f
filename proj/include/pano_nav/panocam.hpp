#pragma once

// Projection of scene objects into the eight panoramic views and the inverse
// mapping from a per-view bounding box to panoramic polar angles.
//
// View p looks along heading + 45p degrees at the current head pitch. A box is
// parameterized by its view index p, its normalized centroid (c_x, c_y) and
// its normalized size (w, h); c_x grows to the right and c_y grows downward.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "pano_nav/core/angles.hpp"
#include "pano_nav/core/error.hpp"
#include "pano_nav/geometry.hpp"
#include "pano_nav/world.hpp"

namespace pano_nav {

inline constexpr int kPanoramicViews = 8;
inline constexpr double kViewSpacingDeg = 45.0;

struct CameraIntrinsics {
    double fovX = 90.0;  // degrees
    double fovY = 90.0;  // degrees

    bool valid() const { return fovX > 0.0 && fovX < 180.0 && fovY > 0.0 && fovY < 180.0; }

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

inline void require_valid(const CameraIntrinsics& cam) {
    if (!cam.valid()) throw Error(ErrorKind::ConfigError, "camera fields of view must lie in (0, 180)");
}

struct BoundingBox2D {
    int p = 0;
    double cx = 0.5;
    double cy = 0.5;
    double w = 0.0;
    double h = 0.0;
    int objectId = -1;
    int classId = -1;

    friend bool operator==(const BoundingBox2D&, const BoundingBox2D&) = default;
};

struct PanoramicAngles {
    double theta = 0.0;  // horizontal, relative to body heading, (-180, 180]
    double phi = 0.0;    // vertical, relative to the centre of the head range

    friend bool operator==(const PanoramicAngles&, const PanoramicAngles&) = default;
};

/// CentroidExact maps an object's centre through the same per-axis tangent law
/// that to_panoramic inverts, so the round trip is exact. Corners projects the
/// eight box corners through a full pinhole camera with pitch and takes the
/// clipped hull, which carries the perspective bias of real detector boxes.
enum class ProjectionMode { CentroidExact, Corners };

/// Bearing and elevation of a world point as seen from the agent's eye.
inline PanoramicAngles true_direction_angles(const Scene& scene, const AgentPose& pose, Vec3 point) {
    const Vec3 offset = point - eye_position(scene, pose.cell);
    const auto body = CameraFrame::from_angles(heading_deg(pose.heading), 0.0);
    const double forward = dot(offset, body.forward);
    const double right = dot(offset, body.right);
    PanoramicAngles a;
    a.theta = normalize_deg(atan2_deg(right, forward));
    a.phi = atan2_deg(offset.z, std::hypot(forward, right));
    return a;
}

/// Per-view box to panoramic bearing and elevation.
inline PanoramicAngles to_panoramic(const BoundingBox2D& box, const CameraIntrinsics& cam, double pitchDeg) {
    PanoramicAngles a;
    a.theta = normalize_deg(atan_deg(2.0 * (box.cx - 0.5) * tan_deg(cam.fovX / 2.0)) + kViewSpacingDeg * box.p);
    a.phi = atan_deg(2.0 * (0.5 - box.cy) * tan_deg(cam.fovY / 2.0)) + pitchDeg;
    return a;
}

namespace detail {

/// Visible part of [c - s/2, c + s/2] inside [0, 1].
inline double visible_extent(double c, double s) {
    return std::min(c + s / 2.0, 1.0) - std::max(c - s / 2.0, 0.0);
}

inline std::optional<BoundingBox2D> project_centroid_exact(const Scene& scene, const AgentPose& pose,
                                                           const CameraIntrinsics& cam, const SceneObject& obj,
                                                           Vec3 center, int p) {
    const PanoramicAngles a = true_direction_angles(scene, pose, center);
    const double rel = normalize_deg(a.theta - kViewSpacingDeg * p);
    const double vrel = a.phi - pose.pitch;
    if (std::abs(rel) >= 90.0 || std::abs(vrel) >= 90.0) return std::nullopt;

    const double tx = tan_deg(cam.fovX / 2.0);
    const double ty = tan_deg(cam.fovY / 2.0);
    BoundingBox2D box;
    box.p = p;
    box.cx = 0.5 + 0.5 * tan_deg(rel) / tx;
    box.cy = 0.5 - 0.5 * tan_deg(vrel) / ty;
    if (box.cx < 0.0 || box.cx > 1.0 || box.cy < 0.0 || box.cy > 1.0) return std::nullopt;

    // Sizes at the centre's range: the box half-extent across the line of sight.
    const Vec3 offset = center - eye_position(scene, pose.cell);
    const double range = std::sqrt(dot(offset, offset));
    const double horiz = std::hypot(offset.x, offset.y);
    const double ux = horiz > 0.0 ? offset.x / horiz : 0.0;
    const double uy = horiz > 0.0 ? offset.y / horiz : 1.0;
    const double halfWidth = std::abs(obj.extent.x * uy) + std::abs(obj.extent.y * ux);
    const double fullW = std::min(1.0, halfWidth / (range * tx));
    const double fullH = std::min(1.0, obj.extent.z / (range * ty));
    box.w = visible_extent(box.cx, fullW);
    box.h = visible_extent(box.cy, fullH);
    if (!(box.w > 0.0) || !(box.h > 0.0)) return std::nullopt;
    box.objectId = obj.objectId;
    box.classId = obj.cls.id;
    return box;
}

inline std::optional<BoundingBox2D> project_corners(const Scene& scene, const AgentPose& pose,
                                                    const CameraIntrinsics& cam, const SceneObject& obj, Vec3 center,
                                                    int p) {
    constexpr double kNear = 1e-4;
    const auto frame = CameraFrame::from_angles(heading_deg(pose.heading) + kViewSpacingDeg * p, pose.pitch);
    const Vec3 eye = eye_position(scene, pose.cell);
    if (frame.to_camera(center - eye).z <= 0.0) return std::nullopt;

    const double tx = tan_deg(cam.fovX / 2.0);
    const double ty = tan_deg(cam.fovY / 2.0);
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 c{center.x + ((corner & 1) ? obj.extent.x : -obj.extent.x),
                     center.y + ((corner & 2) ? obj.extent.y : -obj.extent.y),
                     center.z + ((corner & 4) ? obj.extent.z : -obj.extent.z)};
        const Vec3 k = frame.to_camera(c - eye);
        // Corners behind the near plane are pushed onto it; the clip below
        // then pins them to the image border.
        const double depth = std::max(k.z, kNear);
        const double u = 0.5 + 0.5 * (k.x / depth) / tx;
        const double v = 0.5 - 0.5 * (k.y / depth) / ty;
        x0 = std::min(x0, u);
        x1 = std::max(x1, u);
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
    }
    x0 = std::clamp(x0, 0.0, 1.0);
    x1 = std::clamp(x1, 0.0, 1.0);
    y0 = std::clamp(y0, 0.0, 1.0);
    y1 = std::clamp(y1, 0.0, 1.0);
    if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;

    BoundingBox2D box;
    box.p = p;
    box.cx = 0.5 * (x0 + x1);
    box.cy = 0.5 * (y0 + y1);
    box.w = x1 - x0;
    box.h = y1 - y0;
    box.objectId = obj.objectId;
    box.classId = obj.cls.id;
    return box;
}

} // namespace detail

/// Projects `obj`, located at `center`, into view `p` of the agent at `pose`.
inline std::optional<BoundingBox2D> project_object(const Scene& scene, const AgentPose& pose,
                                                   const CameraIntrinsics& cam, const SceneObject& obj, Vec3 center,
                                                   int p, ProjectionMode mode) {
    require_valid(cam);
    if (mode == ProjectionMode::CentroidExact) return detail::project_centroid_exact(scene, pose, cam, obj, center, p);
    return detail::project_corners(scene, pose, cam, obj, center, p);
}

inline std::optional<BoundingBox2D> project_object(const Scene& scene, const AgentPose& pose,
                                                   const CameraIntrinsics& cam, const SceneObject& obj, int p,
                                                   ProjectionMode mode) {
    return project_object(scene, pose, cam, obj, obj.center, p, mode);
}

inline bool box_order(const BoundingBox2D& a, const BoundingBox2D& b) {
    return a.p != b.p ? a.p < b.p : a.objectId < b.objectId;
}

/// All boxes over the eight views, ordered by (p, objectId). Held objects are
/// in the agent's hand and not observed.
inline std::vector<BoundingBox2D> panoramic_sweep(const Scene& scene, const WorldState& state,
                                                  const CameraIntrinsics& cam, ProjectionMode mode) {
    std::vector<BoundingBox2D> boxes;
    for (int p = 0; p < kPanoramicViews; ++p) {
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            if (state.objectStates[i].held) continue;
            if (auto box = project_object(scene, state.pose, cam, scene.objects[i], state.objectCenters[i], p, mode))
                boxes.push_back(*box);
        }
    }
    std::sort(boxes.begin(), boxes.end(), box_order);
    return boxes;
}

/// Sweep of the scene in its initial configuration.
inline std::vector<BoundingBox2D> panoramic_sweep(const Scene& scene, const AgentPose& pose,
                                                  const CameraIntrinsics& cam,
                                                  ProjectionMode mode = ProjectionMode::CentroidExact) {
    return panoramic_sweep(scene, initial_state(scene, pose), cam, mode);
}

} // namespace pano_nav
