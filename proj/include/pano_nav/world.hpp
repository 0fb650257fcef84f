#pragma once

// Discrete world model: scenes, agent pose, primitive actions, tasks and
// goal-condition checking. Everything here is a value type; apply_action is a
// pure function from (scene, state, action) to the next state.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/geometry.hpp"
#include "pano_nav/vocab.hpp"

namespace pano_nav {

inline constexpr double kDefaultCellSize = 0.25;
inline constexpr int kMinPitch = -30;
inline constexpr int kMaxPitch = 30;
inline constexpr int kPitchStep = 15;

/// Field of view of the egocentric camera used to decide whether an
/// interaction target is in view.
inline constexpr double kInteractFovDeg = 90.0;

struct ObjectState {
    bool held = false;
    std::optional<int> placedOn;
    bool sliced = false;
    bool toggled = false;

    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct SceneObject {
    int objectId = 0;
    ObjectClass cls;
    Vec3 center;
    Vec3 extent;  // half-sizes
    bool isReceptacle = false;
    bool isPickable = false;
    ObjectState state;

    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
    int gridWidth = 0;
    int gridHeight = 0;
    double cellSize = kDefaultCellSize;
    std::vector<Cell> obstacles;  // kept sorted
    std::vector<SceneObject> objects;
    std::uint64_t sceneSeed = 0;
    int classVocabSize = kDefaultClassCount;

    friend bool operator==(const Scene&, const Scene&) = default;
};

struct AgentPose {
    Cell cell;
    int heading = 0;  // 0..7, 45 degree steps clockwise from +y
    int pitch = 0;    // degrees, multiple of 15 in [-30, 30]

    friend auto operator<=>(const AgentPose&, const AgentPose&) = default;
};

inline double heading_deg(int heading) { return 45.0 * heading; }

inline bool valid_pose_angles(const AgentPose& p) {
    return p.heading >= 0 && p.heading < 8 && p.pitch >= kMinPitch && p.pitch <= kMaxPitch &&
           p.pitch % kPitchStep == 0;
}

enum class Verb { PickUp, PutDown, Slice, Toggle };

inline const char* to_string(Verb v) {
    switch (v) {
    case Verb::PickUp: return "PickUp";
    case Verb::PutDown: return "PutDown";
    case Verb::Slice: return "Slice";
    case Verb::Toggle: return "Toggle";
    }
    return "?";
}

enum class ActionKind { MoveAhead, RotateLeft45, RotateRight45, LookUp15, LookDown15, Interact, Stop };

inline const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::MoveAhead: return "MoveAhead";
    case ActionKind::RotateLeft45: return "RotateLeft45";
    case ActionKind::RotateRight45: return "RotateRight45";
    case ActionKind::LookUp15: return "LookUp15";
    case ActionKind::LookDown15: return "LookDown15";
    case ActionKind::Interact: return "Interact";
    case ActionKind::Stop: return "Stop";
    }
    return "?";
}

struct Action {
    ActionKind kind = ActionKind::Stop;
    Verb verb = Verb::PickUp;  // meaningful for Interact only
    int objectId = -1;         // meaningful for Interact only

    static Action move_ahead() { return {ActionKind::MoveAhead}; }
    static Action rotate_left() { return {ActionKind::RotateLeft45}; }
    static Action rotate_right() { return {ActionKind::RotateRight45}; }
    static Action look_up() { return {ActionKind::LookUp15}; }
    static Action look_down() { return {ActionKind::LookDown15}; }
    static Action stop() { return {ActionKind::Stop}; }
    static Action interact(Verb v, int objectId) { return {ActionKind::Interact, v, objectId}; }

    friend bool operator==(const Action& a, const Action& b) {
        if (a.kind != b.kind) return false;
        return a.kind != ActionKind::Interact || (a.verb == b.verb && a.objectId == b.objectId);
    }
};

/// Class label of an action for metrics: the kind, with Interact split by verb.
inline std::string action_class(const Action& a) {
    if (a.kind == ActionKind::Interact) return std::string("Interact:") + to_string(a.verb);
    return to_string(a.kind);
}

enum class GoalKind { PlacedOn, Sliced, Toggled, Holding };

struct GoalCondition {
    GoalKind kind = GoalKind::PlacedOn;
    int objectId = 0;
    int receptacleId = -1;  // PlacedOn only

    friend bool operator==(const GoalCondition&, const GoalCondition&) = default;
};

enum class SubgoalKind { Nav, Manip };

struct Subgoal {
    SubgoalKind kind = SubgoalKind::Nav;
    int index = 0;
    int targetObjectId = 0;
    std::vector<AgentPose> goalPoses;  // Nav only, sorted
    Verb verb = Verb::PickUp;          // Manip only

    friend bool operator==(const Subgoal&, const Subgoal&) = default;
};

struct Task {
    std::vector<GoalCondition> goalConditions;
    std::vector<Subgoal> subgoals;
    Instruction goalInstruction;
    std::vector<Instruction> stepInstructions;
    std::uint64_t taskSeed = 0;
    std::uint64_t sceneSeed = 0;
    AgentPose startPose;

    friend bool operator==(const Task&, const Task&) = default;
};

struct WorldState {
    AgentPose pose;
    std::vector<ObjectState> objectStates;  // parallel to scene.objects
    std::vector<Vec3> objectCenters;        // current positions, parallel to scene.objects
    std::optional<int> heldObject;
    int apiErrorCount = 0;
    int timestep = 0;

    friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class ActionResult { Succeeded, Failed };

// ---------------------------------------------------------------------------
// Scene queries

inline bool in_bounds(const Scene& scene, Cell c) {
    return c.x >= 0 && c.y >= 0 && c.x < scene.gridWidth && c.y < scene.gridHeight;
}

inline bool is_obstacle(const Scene& scene, Cell c) {
    return std::binary_search(scene.obstacles.begin(), scene.obstacles.end(), c);
}

/// Navigable: inside the grid and not an obstacle. Objects never block.
inline bool is_free(const Scene& scene, Cell c) { return in_bounds(scene, c) && !is_obstacle(scene, c); }

inline Vec3 cell_center(const Scene& scene, Cell c) {
    return {(c.x + 0.5) * scene.cellSize, (c.y + 0.5) * scene.cellSize, 0.0};
}

inline Cell cell_of(const Scene& scene, Vec3 p) {
    return {static_cast<int>(std::floor(p.x / scene.cellSize)), static_cast<int>(std::floor(p.y / scene.cellSize))};
}

inline Vec3 eye_position(const Scene& scene, Cell c) {
    Vec3 e = cell_center(scene, c);
    e.z = kEyeHeight;
    return e;
}

inline std::size_t object_index(const Scene& scene, int objectId) {
    for (std::size_t i = 0; i < scene.objects.size(); ++i)
        if (scene.objects[i].objectId == objectId) return i;
    throw Error(ErrorKind::UnknownObjectId, "object " + std::to_string(objectId));
}

inline const SceneObject& object_by_id(const Scene& scene, int objectId) {
    return scene.objects[object_index(scene, objectId)];
}

inline WorldState initial_state(const Scene& scene, const AgentPose& start) {
    WorldState s;
    s.pose = start;
    for (const auto& o : scene.objects) {
        s.objectStates.push_back(o.state);
        s.objectCenters.push_back(o.center);
        if (o.state.held) s.heldObject = o.objectId;
    }
    return s;
}

inline Cell ahead_cell(Cell c, int heading) { return {c.x + kHeadingDx[heading], c.y + kHeadingDy[heading]}; }

inline bool blocked_ahead(const Scene& scene, const AgentPose& pose) {
    return !is_free(scene, ahead_cell(pose.cell, pose.heading));
}

/// Point used for reach and view tests: the centre of the object's top face.
inline Vec3 interaction_point(const SceneObject& obj, Vec3 center) {
    return {center.x, center.y, center.z + obj.extent.z};
}

/// Geometric reachability of an object from a pose, ignoring verb
/// preconditions: Chebyshev cell distance <= 1 and the interaction point in
/// the forward view frustum.
inline bool within_reach(const Scene& scene, const AgentPose& pose, const SceneObject& obj, Vec3 center) {
    if (chebyshev(pose.cell, cell_of(scene, center)) > 1) return false;
    const auto frame = CameraFrame::from_angles(heading_deg(pose.heading), pose.pitch);
    const Vec3 offset = interaction_point(obj, center) - eye_position(scene, pose.cell);
    return in_pinhole_frustum(frame, offset, kInteractFovDeg, kInteractFovDeg);
}

/// Every pose from which `objectId`, at `center`, is within reach.
inline std::vector<AgentPose> reach_poses(const Scene& scene, int objectId, Vec3 center) {
    const SceneObject& obj = object_by_id(scene, objectId);
    const Cell oc = cell_of(scene, center);
    std::vector<AgentPose> poses;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const Cell c{oc.x + dx, oc.y + dy};
            if (!is_free(scene, c)) continue;
            for (int h = 0; h < 8; ++h) {
                for (int p = kMinPitch; p <= kMaxPitch; p += kPitchStep) {
                    AgentPose pose{c, h, p};
                    if (within_reach(scene, pose, obj, center)) poses.push_back(pose);
                }
            }
        }
    }
    std::sort(poses.begin(), poses.end());
    return poses;
}

inline bool has_supported_objects(const WorldState& state, int objectId) {
    return std::any_of(state.objectStates.begin(), state.objectStates.end(),
                       [&](const ObjectState& s) { return s.placedOn == objectId; });
}

/// Verb preconditions on top of reachability.
inline bool interact_allowed(const Scene& scene, const WorldState& state, Verb verb, std::size_t target) {
    const SceneObject& obj = scene.objects[target];
    const ObjectState& st = state.objectStates[target];
    if (st.held) return false;
    if (!within_reach(scene, state.pose, obj, state.objectCenters[target])) return false;
    switch (verb) {
    case Verb::PickUp:
        return !state.heldObject && obj.isPickable && !has_supported_objects(state, obj.objectId);
    case Verb::PutDown:
        return state.heldObject.has_value() && obj.isReceptacle;
    case Verb::Slice: {
        if (!state.heldObject || st.sliced) return false;
        const SceneObject& tool = object_by_id(scene, *state.heldObject);
        return tool.cls.name == "knife";
    }
    case Verb::Toggle:
        return true;
    }
    return false;
}

inline std::pair<WorldState, ActionResult> apply_action(const Scene& scene, const WorldState& state,
                                                        const Action& action) {
    WorldState next = state;
    next.timestep += 1;
    bool ok = true;

    switch (action.kind) {
    case ActionKind::MoveAhead: {
        const Cell target = ahead_cell(state.pose.cell, state.pose.heading);
        if (is_free(scene, target)) next.pose.cell = target;
        else ok = false;
        break;
    }
    case ActionKind::RotateLeft45:
        next.pose.heading = (state.pose.heading + 7) % 8;
        break;
    case ActionKind::RotateRight45:
        next.pose.heading = (state.pose.heading + 1) % 8;
        break;
    case ActionKind::LookUp15:
        if (state.pose.pitch + kPitchStep <= kMaxPitch) next.pose.pitch += kPitchStep;
        else ok = false;
        break;
    case ActionKind::LookDown15:
        if (state.pose.pitch - kPitchStep >= kMinPitch) next.pose.pitch -= kPitchStep;
        else ok = false;
        break;
    case ActionKind::Interact: {
        const std::size_t target = object_index(scene, action.objectId);
        if (!interact_allowed(scene, state, action.verb, target)) {
            ok = false;
            break;
        }
        switch (action.verb) {
        case Verb::PickUp: {
            auto& st = next.objectStates[target];
            st.held = true;
            st.placedOn.reset();
            next.heldObject = action.objectId;
            break;
        }
        case Verb::PutDown: {
            const std::size_t held = object_index(scene, *state.heldObject);
            const SceneObject& recep = scene.objects[target];
            const SceneObject& item = scene.objects[held];
            auto& st = next.objectStates[held];
            st.held = false;
            st.placedOn = recep.objectId;
            const Vec3 rc = state.objectCenters[target];
            next.objectCenters[held] = {rc.x, rc.y, rc.z + recep.extent.z + item.extent.z};
            next.heldObject.reset();
            break;
        }
        case Verb::Slice:
            next.objectStates[target].sliced = true;
            break;
        case Verb::Toggle:
            next.objectStates[target].toggled = !next.objectStates[target].toggled;
            break;
        }
        break;
    }
    case ActionKind::Stop:
        break;
    }

    if (!ok) {
        next.pose = state.pose;
        next.objectStates = state.objectStates;
        next.objectCenters = state.objectCenters;
        next.heldObject = state.heldObject;
        next.apiErrorCount += 1;
    }
    return {std::move(next), ok ? ActionResult::Succeeded : ActionResult::Failed};
}

// ---------------------------------------------------------------------------
// Goal conditions

inline bool condition_holds(const Scene& scene, const WorldState& state, const GoalCondition& c) {
    const ObjectState& st = state.objectStates[object_index(scene, c.objectId)];
    switch (c.kind) {
    case GoalKind::PlacedOn: return st.placedOn == c.receptacleId;
    case GoalKind::Sliced: return st.sliced;
    case GoalKind::Toggled: return st.toggled;
    case GoalKind::Holding: return st.held;
    }
    return false;
}

struct GoalCount {
    int satisfied = 0;
    int total = 0;

    /// Vacuously 1.0 when there are no conditions.
    double fraction() const { return total == 0 ? 1.0 : static_cast<double>(satisfied) / total; }
    bool complete() const { return satisfied == total; }

    friend bool operator==(const GoalCount&, const GoalCount&) = default;
};

inline GoalCount check_goal_conditions(const Scene& scene, const WorldState& state, const Task& task) {
    GoalCount g{0, static_cast<int>(task.goalConditions.size())};
    for (const auto& c : task.goalConditions)
        if (condition_holds(scene, state, c)) ++g.satisfied;
    return g;
}

/// Set of cells covered by a Nav subgoal's goal poses, sorted.
inline std::vector<Cell> goal_cells(const std::vector<AgentPose>& goalPoses) {
    std::vector<Cell> cells;
    for (const auto& p : goalPoses) cells.push_back(p.cell);
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

inline bool in_goal_region(const AgentPose& pose, const std::vector<AgentPose>& goalPoses) {
    return std::any_of(goalPoses.begin(), goalPoses.end(), [&](const AgentPose& g) { return g.cell == pose.cell; });
}

/// Completion test for one subgoal. `atStart` is the world state when the
/// subgoal became active; PutDown and Toggle are judged relative to it.
inline bool subgoal_satisfied(const Scene& scene, const Subgoal& sg, const WorldState& atStart,
                              const WorldState& now) {
    if (sg.kind == SubgoalKind::Nav) return in_goal_region(now.pose, sg.goalPoses);
    const std::size_t target = object_index(scene, sg.targetObjectId);
    switch (sg.verb) {
    case Verb::PickUp:
        return now.heldObject == sg.targetObjectId;
    case Verb::PutDown: {
        if (!atStart.heldObject || now.heldObject) return false;
        return now.objectStates[object_index(scene, *atStart.heldObject)].placedOn == sg.targetObjectId;
    }
    case Verb::Slice:
        return now.objectStates[target].sliced;
    case Verb::Toggle:
        return now.objectStates[target].toggled != atStart.objectStates[target].toggled;
    }
    return false;
}

} // namespace pano_nav
