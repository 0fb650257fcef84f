#pragma once

#include <cmath>

namespace pano_nav {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * (kPi / 180.0); }
inline constexpr double rad2deg(double rad) { return rad * (180.0 / kPi); }

inline double sin_deg(double deg) { return std::sin(deg2rad(deg)); }
inline double cos_deg(double deg) { return std::cos(deg2rad(deg)); }
inline double tan_deg(double deg) { return std::tan(deg2rad(deg)); }
inline double atan_deg(double x) { return rad2deg(std::atan(x)); }
inline double atan2_deg(double y, double x) { return rad2deg(std::atan2(y, x)); }

/// Maps any angle to (-180, 180].
inline double normalize_deg(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r <= -180.0) r += 360.0;
    else if (r > 180.0) r -= 360.0;
    return r;
}

/// Smallest absolute difference between two angles, in [0, 180].
inline double angular_distance_deg(double a, double b) {
    return std::abs(normalize_deg(a - b));
}

} // namespace pano_nav
