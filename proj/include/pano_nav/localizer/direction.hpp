#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pano_nav/core/angles.hpp"
#include "pano_nav/detector.hpp"
#include "pano_nav/panocam.hpp"
#include "pano_nav/scenegen.hpp"
#include "pano_nav/vocab.hpp"

namespace pano_nav {

/// d_t = (sin psi, cos psi): unit vector toward the goal, or zero outside
/// navigation subgoals.
struct GoalDirection {
    double dsin = 0.0;
    double dcos = 0.0;

    static GoalDirection zero() { return {0.0, 0.0}; }
    static GoalDirection from_degrees(double psi) { return {sin_deg(psi), cos_deg(psi)}; }

    bool is_zero() const { return dsin == 0.0 && dcos == 0.0; }
    double norm() const { return std::hypot(dsin, dcos); }

    /// Angle encoded by the vector; the zero vector reads as straight ahead.
    double degrees() const { return is_zero() ? 0.0 : atan2_deg(dsin, dcos); }

    friend bool operator==(const GoalDirection&, const GoalDirection&) = default;
};

inline GoalDirection oracle_direction(const AgentPose& pose, const std::vector<AgentPose>& goalPoses) {
    return GoalDirection::from_degrees(goal_direction(pose, goalPoses));
}

/// Class named by a navigation instruction: its first class-name token.
inline std::optional<int> instruction_target_class(const WordVocabulary& words, const Instruction& instr) {
    for (int t : instr.tokens)
        if (auto cls = words.class_of_token(t)) return cls;
    return std::nullopt;
}

enum class Side { None, Left, Right };

inline Side instruction_side(const WordVocabulary& words, const Instruction& instr) {
    const int left = words.id_of("left");
    const int right = words.id_of("right");
    for (int t : instr.tokens) {
        if (t == left) return Side::Left;
        if (t == right) return Side::Right;
    }
    return Side::None;
}

/// Geometric baseline: steer toward the detection matching the instruction's
/// target class. "left" picks the smallest theta, "right" the largest,
/// otherwise the largest box (ties to the smallest |theta|).
inline std::optional<GoalDirection> heuristic_direction(const std::vector<Detection>& detections, int targetClass,
                                                        Side side, const CameraIntrinsics& cam, double pitchDeg) {
    std::optional<GoalDirection> best;
    double bestTheta = 0.0, bestArea = 0.0;
    for (const auto& d : detections) {
        if (d.label() != targetClass) continue;
        const double theta = to_panoramic(d.box, cam, pitchDeg).theta;
        const double area = d.box.w * d.box.h;
        bool better = !best;
        if (!better) {
            switch (side) {
            case Side::Left: better = theta < bestTheta; break;
            case Side::Right: better = theta > bestTheta; break;
            case Side::None:
                better = area > bestArea || (area == bestArea && std::abs(theta) < std::abs(bestTheta));
                break;
            }
        }
        if (better) {
            best = GoalDirection::from_degrees(theta);
            bestTheta = theta;
            bestArea = area;
        }
    }
    return best;
}

inline std::optional<GoalDirection> heuristic_direction(const std::vector<Detection>& detections,
                                                        const WordVocabulary& words, const Instruction& instruction,
                                                        const CameraIntrinsics& cam, double pitchDeg) {
    const auto cls = instruction_target_class(words, instruction);
    if (!cls) return std::nullopt;
    return heuristic_direction(detections, *cls, instruction_side(words, instruction), cam, pitchDeg);
}

} // namespace pano_nav
