#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdlib>

#include "pano_nav/core/angles.hpp"

namespace pano_nav {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

struct Cell {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }
inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

/// Eye height above the floor. Any constant works for the angle math since
/// vertical angles are referenced to the head pitch, not to the floor.
inline constexpr double kEyeHeight = 1.5;

/// Unit steps for the eight headings, clockwise from +y.
inline constexpr int kHeadingDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr int kHeadingDy[8] = {1, 1, 0, -1, -1, -1, 0, 1};

/// Orthonormal camera frame. `yaw` is clockwise from +y, `pitch` positive up.
struct CameraFrame {
    Vec3 forward;
    Vec3 right;
    Vec3 up;

    static CameraFrame from_angles(double yawDeg, double pitchDeg) {
        const double sy = sin_deg(yawDeg), cy = cos_deg(yawDeg);
        const double sp = sin_deg(pitchDeg), cp = cos_deg(pitchDeg);
        CameraFrame f;
        f.forward = {sy * cp, cy * cp, sp};
        f.right = {cy, -sy, 0.0};
        f.up = {-sy * sp, -cy * sp, cp};
        return f;
    }

    /// Coordinates of a world-space offset in (right, up, forward).
    Vec3 to_camera(Vec3 offset) const { return {dot(offset, right), dot(offset, up), dot(offset, forward)}; }
};

/// True when `offset` (relative to the eye) lies inside the pinhole frustum of
/// a camera with full fields of view `fovX`, `fovY` (degrees).
inline bool in_pinhole_frustum(const CameraFrame& frame, Vec3 offset, double fovX, double fovY) {
    const Vec3 c = frame.to_camera(offset);
    if (c.z <= 0.0) return false;
    return std::abs(c.x / c.z) <= tan_deg(fovX / 2.0) && std::abs(c.y / c.z) <= tan_deg(fovY / 2.0);
}

} // namespace pano_nav
