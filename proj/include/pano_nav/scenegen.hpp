#pragma once

// Seeded procedural scenes, stack-and-place tasks with templated
// instructions, shortest-path expert trajectories, and ground-truth goal
// directions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pano_nav/core/angles.hpp"
#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"
#include "pano_nav/panocam.hpp"
#include "pano_nav/world.hpp"

namespace pano_nav {

struct GenParams {
    int gridWidth = 8;
    int gridHeight = 8;
    double obstacleDensity = 0.1;
    int objectCount = 8;
    int classVocabSize = kDefaultClassCount;
    double receptacleFraction = 0.4;
    double cellSize = kDefaultCellSize;
    std::uint64_t seed = 0;

    friend bool operator==(const GenParams&, const GenParams&) = default;
};

struct SubgoalBoundary {
    int subgoalIndex = 0;
    int startTimestep = 0;

    friend bool operator==(const SubgoalBoundary&, const SubgoalBoundary&) = default;
};

struct Trajectory {
    std::vector<Action> actions;
    std::vector<AgentPose> poses;  // actions.size() + 1 entries
    std::vector<SubgoalBoundary> subgoalBoundaries;
    std::uint64_t sceneSeed = 0;
    std::uint64_t taskSeed = 0;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline constexpr int kMaxGenerationAttempts = 64;

// ---------------------------------------------------------------------------
// Connectivity

/// Cells reachable from `start` with MoveAhead in any of the eight headings.
inline std::vector<Cell> reachable_cells(const Scene& scene, Cell start) {
    std::vector<Cell> out;
    if (!is_free(scene, start)) return out;
    std::vector<char> seen(static_cast<std::size_t>(scene.gridWidth * scene.gridHeight), 0);
    auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y * scene.gridWidth + c.x); };
    std::deque<Cell> queue{start};
    seen[idx(start)] = 1;
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        out.push_back(c);
        for (int h = 0; h < 8; ++h) {
            const Cell n = ahead_cell(c, h);
            if (is_free(scene, n) && !seen[idx(n)]) {
                seen[idx(n)] = 1;
                queue.push_back(n);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Cell> free_cells(const Scene& scene) {
    std::vector<Cell> out;
    for (int y = 0; y < scene.gridHeight; ++y)
        for (int x = 0; x < scene.gridWidth; ++x)
            if (!is_obstacle(scene, {x, y})) out.push_back({x, y});
    return out;
}

/// A layout is usable when its free cells form one connected region with room
/// for every object plus the agent.
inline bool layout_valid(const Scene& scene, int objectCount) {
    const auto cells = free_cells(scene);
    if (static_cast<int>(cells.size()) < objectCount + 1) return false;
    return reachable_cells(scene, cells.front()).size() == cells.size();
}

// ---------------------------------------------------------------------------
// Scene generation

namespace detail {

inline Vec3 extent_for(ClassCategory category, Rng& rng) {
    switch (category) {
    case ClassCategory::FixedReceptacle: return {0.10 + 0.02 * rng.uniform(), 0.10 + 0.02 * rng.uniform(), 0.5};
    case ClassCategory::MovableReceptacle: return {0.05, 0.05, 0.04};
    case ClassCategory::Pickable: return {0.03, 0.03, 0.03};
    }
    return {0.03, 0.03, 0.03};
}

// Resting spots on a receptacle top, as offsets from its centre.
inline constexpr std::array<std::pair<double, double>, 5> kSlots{
    {{0.0, 0.0}, {-0.05, -0.05}, {0.05, 0.05}, {-0.05, 0.05}, {0.05, -0.05}}};

} // namespace detail

inline void validate(const GenParams& p) {
    if (p.gridWidth < 2 || p.gridHeight < 2) throw Error(ErrorKind::ConfigError, "grid must be at least 2x2");
    if (!(p.obstacleDensity >= 0.0 && p.obstacleDensity < 1.0))
        throw Error(ErrorKind::ConfigError, "obstacleDensity must lie in [0, 1)");
    if (p.objectCount < 3) throw Error(ErrorKind::ConfigError, "objectCount must be at least 3");
    if (!(p.receptacleFraction > 0.0 && p.receptacleFraction <= 1.0))
        throw Error(ErrorKind::ConfigError, "receptacleFraction must lie in (0, 1]");
    if (!(p.cellSize > 0.0)) throw Error(ErrorKind::ConfigError, "cellSize must be positive");
    (void)ClassVocabulary(p.classVocabSize);
}

inline Scene generate_scene(const GenParams& params) {
    validate(params);
    const ClassVocabulary classes(params.classVocabSize);
    const auto fixedIds = classes.ids_in(ClassCategory::FixedReceptacle);
    const auto movableIds = classes.ids_in(ClassCategory::MovableReceptacle);
    const auto pickableIds = classes.ids_in(ClassCategory::Pickable);

    const int cellCount = params.gridWidth * params.gridHeight;
    const int obstacleCount = static_cast<int>(std::lround(params.obstacleDensity * cellCount));
    const int fixedCount = std::clamp(static_cast<int>(std::lround(params.receptacleFraction * params.objectCount)), 1,
                                      params.objectCount - 2);

    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        Rng rng(hash_combine(params.seed, static_cast<std::uint64_t>(attempt)));
        Scene scene;
        scene.gridWidth = params.gridWidth;
        scene.gridHeight = params.gridHeight;
        scene.cellSize = params.cellSize;
        scene.sceneSeed = params.seed;
        scene.classVocabSize = params.classVocabSize;

        std::vector<Cell> cells;
        for (int y = 0; y < params.gridHeight; ++y)
            for (int x = 0; x < params.gridWidth; ++x) cells.push_back({x, y});
        rng.shuffle(cells);
        scene.obstacles.assign(cells.begin(), cells.begin() + obstacleCount);
        std::sort(scene.obstacles.begin(), scene.obstacles.end());
        if (!layout_valid(scene, params.objectCount)) continue;

        std::vector<Cell> open(cells.begin() + obstacleCount, cells.end());
        int nextId = 0;
        std::vector<std::size_t> receptacles;
        for (int i = 0; i < fixedCount; ++i) {
            SceneObject o;
            o.objectId = nextId++;
            o.cls = classes.at(fixedIds[rng.below(fixedIds.size())]);
            o.extent = detail::extent_for(ClassCategory::FixedReceptacle, rng);
            o.center = cell_center(scene, open[static_cast<std::size_t>(i)]);
            o.center.z = o.extent.z;
            o.isReceptacle = true;
            receptacles.push_back(scene.objects.size());
            scene.objects.push_back(o);
        }

        std::vector<int> slotsUsed(receptacles.size(), 0);
        bool placed = true;
        for (int i = fixedCount; i < params.objectCount && placed; ++i) {
            const bool movable = i == fixedCount || rng.bernoulli(0.3);
            const auto category = movable ? ClassCategory::MovableReceptacle : ClassCategory::Pickable;
            const auto& pool = movable ? movableIds : pickableIds;
            SceneObject o;
            o.objectId = nextId++;
            o.cls = classes.at(pool[rng.below(pool.size())]);
            o.extent = detail::extent_for(category, rng);
            o.isReceptacle = movable;
            o.isPickable = true;

            // Random receptacle with a free slot.
            std::vector<std::size_t> order(receptacles.size());
            for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
            rng.shuffle(order);
            placed = false;
            for (std::size_t k : order) {
                if (slotsUsed[k] >= static_cast<int>(detail::kSlots.size())) continue;
                const SceneObject& base = scene.objects[receptacles[k]];
                const auto [ox, oy] = detail::kSlots[static_cast<std::size_t>(slotsUsed[k]++)];
                o.center = {base.center.x + ox, base.center.y + oy, base.center.z + base.extent.z + o.extent.z};
                o.state.placedOn = base.objectId;
                placed = true;
                break;
            }
            if (placed) scene.objects.push_back(o);
        }
        if (!placed) continue;
        return scene;
    }
    throw Error(ErrorKind::GenerationFailed, "no valid layout after " + std::to_string(kMaxGenerationAttempts) +
                                                 " attempts (seed " + std::to_string(params.seed) + ")");
}

// ---------------------------------------------------------------------------
// Planning

namespace detail {

inline constexpr std::array<ActionKind, 3> kNavActions{ActionKind::MoveAhead, ActionKind::RotateLeft45,
                                                       ActionKind::RotateRight45};
inline constexpr std::array<ActionKind, 4> kAlignActions{ActionKind::RotateLeft45, ActionKind::RotateRight45,
                                                         ActionKind::LookUp15, ActionKind::LookDown15};

/// Pose change of a non-interacting action, ignoring validity checks.
inline AgentPose step_pose(const AgentPose& p, ActionKind k) {
    AgentPose n = p;
    switch (k) {
    case ActionKind::MoveAhead: n.cell = ahead_cell(p.cell, p.heading); break;
    case ActionKind::RotateLeft45: n.heading = (p.heading + 7) % 8; break;
    case ActionKind::RotateRight45: n.heading = (p.heading + 1) % 8; break;
    case ActionKind::LookUp15: n.pitch += kPitchStep; break;
    case ActionKind::LookDown15: n.pitch -= kPitchStep; break;
    default: break;
    }
    return n;
}

inline bool step_valid(const Scene& scene, const AgentPose& n) {
    return is_free(scene, n.cell) && n.pitch >= kMinPitch && n.pitch <= kMaxPitch;
}

} // namespace detail

/// Shortest sequence of moves and rotations from `start` to any goal cell.
/// Ties go to the lexicographically smallest action sequence with
/// MoveAhead < RotateLeft45 < RotateRight45.
inline std::optional<std::vector<Action>> plan_to_cells(const Scene& scene, const AgentPose& start,
                                                        const std::vector<Cell>& goals) {
    const int W = scene.gridWidth, H = scene.gridHeight;
    const auto idx = [&](Cell c, int h) { return static_cast<std::size_t>((c.y * W + c.x) * 8 + h); };
    constexpr int kUnset = std::numeric_limits<int>::max();
    std::vector<int> dist(static_cast<std::size_t>(W * H * 8), kUnset);
    std::deque<std::pair<Cell, int>> queue;
    for (Cell g : goals) {
        if (!is_free(scene, g)) continue;
        for (int h = 0; h < 8; ++h) {
            dist[idx(g, h)] = 0;
            queue.push_back({g, h});
        }
    }
    // Backward BFS: distance-to-goal for every (cell, heading).
    while (!queue.empty()) {
        const auto [c, h] = queue.front();
        queue.pop_front();
        const int d = dist[idx(c, h)];
        std::array<std::pair<Cell, int>, 3> preds{{{Cell{c.x - kHeadingDx[h], c.y - kHeadingDy[h]}, h},
                                                   {c, (h + 1) % 8},
                                                   {c, (h + 7) % 8}}};
        for (const auto& [pc, ph] : preds) {
            if (!is_free(scene, pc) || dist[idx(pc, ph)] != kUnset) continue;
            dist[idx(pc, ph)] = d + 1;
            queue.push_back({pc, ph});
        }
    }
    if (!is_free(scene, start.cell) || dist[idx(start.cell, start.heading)] == kUnset) return std::nullopt;

    std::vector<Action> actions;
    AgentPose pose = start;
    while (dist[idx(pose.cell, pose.heading)] > 0) {
        const int d = dist[idx(pose.cell, pose.heading)];
        for (ActionKind k : detail::kNavActions) {
            const AgentPose n = detail::step_pose(pose, k);
            if (detail::step_valid(scene, n) && dist[idx(n.cell, n.heading)] == d - 1) {
                actions.push_back({k});
                pose = n;
                break;
            }
        }
    }
    return actions;
}

/// Shortest rotation/look sequence at the current cell reaching any pose in
/// `targets`. Same lexicographic tie-break, LookUp15 < LookDown15 after the
/// rotations.
inline std::optional<std::vector<Action>> plan_alignment(const AgentPose& start, const std::vector<AgentPose>& targets) {
    const auto idx = [](int h, int pitch) { return static_cast<std::size_t>(h * 5 + (pitch - kMinPitch) / kPitchStep); };
    constexpr int kUnset = std::numeric_limits<int>::max();
    std::array<int, 40> dist;
    dist.fill(kUnset);
    std::deque<std::pair<int, int>> queue;
    for (const auto& t : targets) {
        if (t.cell != start.cell || dist[idx(t.heading, t.pitch)] == 0) continue;
        dist[idx(t.heading, t.pitch)] = 0;
        queue.push_back({t.heading, t.pitch});
    }
    while (!queue.empty()) {
        const auto [h, p] = queue.front();
        queue.pop_front();
        const int d = dist[idx(h, p)];
        const std::array<std::pair<int, int>, 4> preds{
            {{(h + 1) % 8, p}, {(h + 7) % 8, p}, {h, p - kPitchStep}, {h, p + kPitchStep}}};
        for (const auto& [ph, pp] : preds) {
            if (pp < kMinPitch || pp > kMaxPitch || dist[idx(ph, pp)] != kUnset) continue;
            dist[idx(ph, pp)] = d + 1;
            queue.push_back({ph, pp});
        }
    }
    if (dist[idx(start.heading, start.pitch)] == kUnset) return std::nullopt;

    std::vector<Action> actions;
    AgentPose pose = start;
    while (dist[idx(pose.heading, pose.pitch)] > 0) {
        const int d = dist[idx(pose.heading, pose.pitch)];
        for (ActionKind k : detail::kAlignActions) {
            const AgentPose n = detail::step_pose(pose, k);
            if (n.pitch >= kMinPitch && n.pitch <= kMaxPitch && dist[idx(n.heading, n.pitch)] == d - 1) {
                actions.push_back({k});
                pose = n;
                break;
            }
        }
    }
    return actions;
}

/// Navigation segment: shortest path into the goal region, then the
/// rotations and looks that bring the target into reach.
inline std::optional<std::vector<Action>> plan_nav_segment(const Scene& scene, const AgentPose& start,
                                                           const std::vector<AgentPose>& goalPoses) {
    auto path = plan_to_cells(scene, start, goal_cells(goalPoses));
    if (!path) return std::nullopt;
    AgentPose pose = start;
    for (const auto& a : *path) pose = detail::step_pose(pose, a.kind);
    auto align = plan_alignment(pose, goalPoses);
    if (!align) return std::nullopt;
    path->insert(path->end(), align->begin(), align->end());
    return path;
}

/// Angle from the agent's heading to the nearest goal cell, degrees in
/// (-180, 180]. Nearest is Euclidean on cell centres, ties to lowest (y, x).
inline double goal_direction(const AgentPose& pose, const std::vector<AgentPose>& goalPoses) {
    const auto cells = goal_cells(goalPoses);
    if (cells.empty()) throw Error(ErrorKind::ValidationError, "goal_direction needs at least one goal pose");
    const Cell* best = nullptr;
    long bestD2 = std::numeric_limits<long>::max();
    for (const Cell& c : cells) {
        const long dx = c.x - pose.cell.x, dy = c.y - pose.cell.y;
        const long d2 = dx * dx + dy * dy;
        if (d2 < bestD2 || (d2 == bestD2 && std::tie(c.y, c.x) < std::tie(best->y, best->x))) {
            bestD2 = d2;
            best = &c;
        }
    }
    if (bestD2 == 0) return 0.0;
    const double bearing = atan2_deg(best->x - pose.cell.x, best->y - pose.cell.y);
    return normalize_deg(bearing - heading_deg(pose.heading));
}

/// Replays `actions` from `state`, appending to `traj`; false on any failure.
inline bool replay_into(const Scene& scene, WorldState& state, const std::vector<Action>& actions, Trajectory& traj) {
    for (const auto& a : actions) {
        auto [next, result] = apply_action(scene, state, a);
        if (result == ActionResult::Failed) return false;
        state = std::move(next);
        traj.actions.push_back(a);
        traj.poses.push_back(state.pose);
    }
    return true;
}

/// Expert trajectory: a navigation segment per Nav subgoal, one Interact per
/// Manip subgoal, and a closing Stop.
inline Trajectory plan_expert(const Scene& scene, const Task& task) {
    Trajectory traj;
    traj.sceneSeed = task.sceneSeed;
    traj.taskSeed = task.taskSeed;
    WorldState state = initial_state(scene, task.startPose);
    traj.poses.push_back(state.pose);
    for (const auto& sg : task.subgoals) {
        traj.subgoalBoundaries.push_back({sg.index, static_cast<int>(traj.actions.size())});
        std::vector<Action> segment;
        if (sg.kind == SubgoalKind::Nav) {
            auto planned = plan_nav_segment(scene, state.pose, sg.goalPoses);
            if (!planned) throw Error(ErrorKind::InfeasibleTask, "no path for subgoal " + std::to_string(sg.index));
            segment = std::move(*planned);
        } else {
            segment.push_back(Action::interact(sg.verb, sg.targetObjectId));
        }
        if (!replay_into(scene, state, segment, traj))
            throw Error(ErrorKind::InfeasibleTask, "expert action failed in subgoal " + std::to_string(sg.index));
    }
    replay_into(scene, state, {Action::stop()}, traj);
    return traj;
}

// ---------------------------------------------------------------------------
// Task generation

namespace detail {

/// Object named in a navigation instruction: the support of a resting object,
/// otherwise the object itself.
inline std::size_t named_landmark(const Scene& scene, const WorldState& state, std::size_t target) {
    if (auto on = state.objectStates[target].placedOn) return object_index(scene, *on);
    return target;
}

/// "left"/"right" when other objects of the landmark's class are visible from
/// `state` and the landmark is the leftmost/rightmost of them.
inline std::string disambiguator(const Scene& scene, const WorldState& state, std::size_t landmark) {
    const CameraIntrinsics cam;
    const int cls = scene.objects[landmark].cls.id;
    std::vector<std::pair<double, int>> seen;  // (theta, objectId)
    std::vector<int> visibleIds;
    for (const auto& box : panoramic_sweep(scene, state, cam, ProjectionMode::CentroidExact))
        if (box.classId == cls) visibleIds.push_back(box.objectId);
    std::sort(visibleIds.begin(), visibleIds.end());
    visibleIds.erase(std::unique(visibleIds.begin(), visibleIds.end()), visibleIds.end());
    if (visibleIds.size() < 2) return {};
    const int landmarkId = scene.objects[landmark].objectId;
    if (!std::binary_search(visibleIds.begin(), visibleIds.end(), landmarkId)) return {};
    for (int id : visibleIds) {
        const std::size_t i = object_index(scene, id);
        seen.push_back({true_direction_angles(scene, state.pose, state.objectCenters[i]).theta, id});
    }
    std::sort(seen.begin(), seen.end());
    if (seen.front().second == landmarkId) return "left";
    if (seen.back().second == landmarkId) return "right";
    return {};
}

} // namespace detail

/// Builds the stack-and-place task: `movable` goes onto `receptacle`, then
/// `item` goes into `movable`. Throws InfeasibleTask when a goal region is
/// empty or unreachable.
inline Task make_stack_task(const Scene& scene, int movableId, int itemId, int receptacleId, const AgentPose& start,
                            std::uint64_t taskSeed) {
    const WordVocabulary words(scene.classVocabSize);
    const std::size_t a = object_index(scene, movableId);
    const std::size_t b = object_index(scene, itemId);
    const std::size_t r = object_index(scene, receptacleId);
    const auto& A = scene.objects[a];
    const auto& B = scene.objects[b];
    const auto& R = scene.objects[r];
    if (!A.isPickable || !A.isReceptacle || !B.isPickable || !R.isReceptacle || a == b || a == r || b == r)
        throw Error(ErrorKind::InfeasibleTask, "objects do not fit the stack-and-place template");
    if (!is_free(scene, start.cell) || !valid_pose_angles(start))
        throw Error(ErrorKind::InfeasibleTask, "start pose is not navigable");

    Task task;
    task.taskSeed = taskSeed;
    task.sceneSeed = scene.sceneSeed;
    task.startPose = start;
    task.goalConditions = {{GoalKind::PlacedOn, movableId, receptacleId}, {GoalKind::PlacedOn, itemId, movableId}};
    task.goalInstruction = words.make("put the " + B.cls.name + " in the " + A.cls.name + " on the " + R.cls.name);

    struct Step {
        Verb verb;
        std::size_t target;
        std::string manipText;
    };
    const std::array<Step, 4> steps{{{Verb::PickUp, a, "pick up the " + A.cls.name},
                                     {Verb::PutDown, r, "put the " + A.cls.name + " on the " + R.cls.name},
                                     {Verb::PickUp, b, "pick up the " + B.cls.name},
                                     {Verb::PutDown, a, "put the " + B.cls.name + " in the " + A.cls.name}}};

    WorldState state = initial_state(scene, start);
    Trajectory scratch;
    scratch.poses.push_back(state.pose);
    for (const auto& step : steps) {
        Subgoal nav;
        nav.kind = SubgoalKind::Nav;
        nav.index = static_cast<int>(task.subgoals.size());
        nav.targetObjectId = scene.objects[step.target].objectId;
        nav.goalPoses = reach_poses(scene, nav.targetObjectId, state.objectCenters[step.target]);
        if (nav.goalPoses.empty()) throw Error(ErrorKind::InfeasibleTask, "target cannot be reached from any pose");

        const std::size_t landmark = detail::named_landmark(scene, state, step.target);
        std::string navText = "walk to the " + scene.objects[landmark].cls.name;
        if (auto side = detail::disambiguator(scene, state, landmark); !side.empty()) navText += " on the " + side;

        auto segment = plan_nav_segment(scene, state.pose, nav.goalPoses);
        if (!segment || !replay_into(scene, state, *segment, scratch))
            throw Error(ErrorKind::InfeasibleTask, "goal region unreachable");

        Subgoal manip;
        manip.kind = SubgoalKind::Manip;
        manip.index = nav.index + 1;
        manip.targetObjectId = nav.targetObjectId;
        manip.verb = step.verb;
        if (!replay_into(scene, state, {Action::interact(step.verb, manip.targetObjectId)}, scratch))
            throw Error(ErrorKind::InfeasibleTask, "interaction preconditions fail");

        task.subgoals.push_back(std::move(nav));
        task.stepInstructions.push_back(words.make(navText));
        task.subgoals.push_back(std::move(manip));
        task.stepInstructions.push_back(words.make(step.manipText));
    }
    if (!check_goal_conditions(scene, state, task).complete())
        throw Error(ErrorKind::InfeasibleTask, "template does not reach the goal");
    return task;
}

inline Task generate_task(const Scene& scene, std::uint64_t seed) {
    Rng rng(hash_combine(seed, scene.sceneSeed ^ 0x7A5CULL));
    std::vector<int> movables, items, fixed;
    for (const auto& o : scene.objects) {
        if (o.isPickable && o.isReceptacle) movables.push_back(o.objectId);
        if (o.isPickable) items.push_back(o.objectId);
        if (o.isReceptacle && !o.isPickable) fixed.push_back(o.objectId);
    }
    if (movables.empty() || items.size() < 2 || fixed.empty())
        throw Error(ErrorKind::InfeasibleTask, "scene lacks the objects for stack-and-place");

    std::vector<std::tuple<int, int, int>> combos;
    for (int a : movables)
        for (int b : items)
            for (int r : fixed) {
                if (a == b) continue;
                if (object_by_id(scene, a).state.placedOn == r) continue;  // goal must start unsatisfied
                combos.emplace_back(a, b, r);
            }
    if (combos.empty()) throw Error(ErrorKind::InfeasibleTask, "every movable receptacle already rests on the target");
    rng.shuffle(combos);

    const auto cells = free_cells(scene);
    for (int attempt = 0; attempt < 32; ++attempt) {
        const auto& [a, b, r] = combos[static_cast<std::size_t>(attempt) % combos.size()];
        const AgentPose start{cells[rng.below(cells.size())], rng.below_int(8), 0};
        try {
            return make_stack_task(scene, a, b, r, start, seed);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InfeasibleTask) throw;
        }
    }
    throw Error(ErrorKind::InfeasibleTask, "no feasible stack-and-place task for seed " + std::to_string(seed));
}

} // namespace pano_nav
