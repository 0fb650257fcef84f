#pragma once

// Episode and subgoal execution.
//
// Subgoals advance on their own: after every action the runner checks the
// active subgoal against the world and moves on once it holds, so a policy
// only ever sees one subgoal at a time. When every subgoal is done the
// policy is expected to emit Stop.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"
#include "pano_nav/detector.hpp"
#include "pano_nav/localizer/direction.hpp"
#include "pano_nav/localizer/encoding.hpp"
#include "pano_nav/localizer/network.hpp"
#include "pano_nav/panocam.hpp"
#include "pano_nav/scenegen.hpp"
#include "pano_nav/world.hpp"

namespace pano_nav {

struct EpisodeLimits {
    int maxTimesteps = 200;
    int maxApiErrors = 10;
    int maxSubgoalTimesteps = 50;

    friend bool operator==(const EpisodeLimits&, const EpisodeLimits&) = default;
};

inline void validate(const EpisodeLimits& l) {
    if (l.maxTimesteps < 1 || l.maxApiErrors < 1 || l.maxSubgoalTimesteps < 1)
        throw Error(ErrorKind::ConfigError, "episode limits must be positive");
}

enum class StopReason { PredictedStop, TimestepLimit, ApiErrorLimit, SubgoalLimit };

inline const char* to_string(StopReason r) {
    switch (r) {
    case StopReason::PredictedStop: return "PredictedStop";
    case StopReason::TimestepLimit: return "TimestepLimit";
    case StopReason::ApiErrorLimit: return "ApiErrorLimit";
    case StopReason::SubgoalLimit: return "SubgoalLimit";
    }
    return "?";
}

/// Where d_t comes from during navigation.
enum class DirectionSource { Zero, Oracle, Heuristic, Localizer };

inline const char* to_string(DirectionSource s) {
    switch (s) {
    case DirectionSource::Zero: return "zero";
    case DirectionSource::Oracle: return "oracle";
    case DirectionSource::Heuristic: return "heuristic";
    case DirectionSource::Localizer: return "localizer";
    }
    return "?";
}

/// Sensing setup shared by every episode of a run.
struct Perception {
    CameraIntrinsics camera;
    NoiseModel noise;
    ProjectionMode mode = ProjectionMode::Corners;
    const LocalizerModel* localizer = nullptr;
    bool sweepCountsAsActions = false;
};

// ---------------------------------------------------------------------------
// Goal direction sensing

/// Instruction tokens for subgoal k and k+1 (empty past the end).
inline std::pair<std::vector<int>, std::vector<int>> instruction_pair(const Task& task, int k) {
    const auto n = static_cast<int>(task.stepInstructions.size());
    std::vector<int> next;
    if (k + 1 < n) next = task.stepInstructions[static_cast<std::size_t>(k + 1)].tokens;
    return {task.stepInstructions.at(static_cast<std::size_t>(k)).tokens, std::move(next)};
}

/// Sweep and detect at the current pose; `episodeSeed` and the timestep key
/// the detector noise.
inline std::vector<Detection> sense(const Scene& scene, const WorldState& state, const Perception& perception,
                                    std::uint64_t episodeSeed) {
    const auto boxes = panoramic_sweep(scene, state, perception.camera, perception.mode);
    return detect(boxes, perception.noise, draw_key(episodeSeed, state.timestep));
}

/// Localizer input for Nav subgoal k.
inline TokenSequence localizer_input(const Scene& scene, const Task& task, const WorldState& state, int k,
                                     const Perception& perception, std::uint64_t episodeSeed) {
    auto [cur, next] = instruction_pair(task, k);
    return build_input(sense(scene, state, perception, episodeSeed), perception.camera, state.pose.pitch, cur, next);
}

/// d_t for subgoal k; zero outside navigation.
inline GoalDirection sense_direction(DirectionSource source, const Scene& scene, const Task& task,
                                     const WorldState& state, int k, const Perception& perception,
                                     std::uint64_t episodeSeed) {
    if (k < 0 || k >= static_cast<int>(task.subgoals.size())) return GoalDirection::zero();
    const Subgoal& sg = task.subgoals[static_cast<std::size_t>(k)];
    if (sg.kind != SubgoalKind::Nav) return GoalDirection::zero();
    switch (source) {
    case DirectionSource::Zero:
        return GoalDirection::zero();
    case DirectionSource::Oracle:
        return oracle_direction(state.pose, sg.goalPoses);
    case DirectionSource::Heuristic: {
        const WordVocabulary words(scene.classVocabSize);
        const auto dets = sense(scene, state, perception, episodeSeed);
        return heuristic_direction(dets, words, task.stepInstructions.at(static_cast<std::size_t>(k)), perception.camera,
                                   state.pose.pitch)
            .value_or(GoalDirection::zero());
    }
    case DirectionSource::Localizer:
        if (!perception.localizer) throw Error(ErrorKind::ConfigError, "localizer policy needs a trained model");
        return predict(*perception.localizer, localizer_input(scene, task, state, k, perception, episodeSeed));
    }
    return GoalDirection::zero();
}

// ---------------------------------------------------------------------------
// Policies

struct Observation {
    const Scene& scene;
    const Task& task;
    const WorldState& state;
    const WorldState& subgoalStart;  // world when the active subgoal began
    int subgoalIndex;                // == subgoals.size() once all are done
    GoalDirection direction;

    bool all_done() const { return subgoalIndex >= static_cast<int>(task.subgoals.size()); }
    const Subgoal& subgoal() const { return task.subgoals.at(static_cast<std::size_t>(subgoalIndex)); }
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual DirectionSource direction_source() const { return DirectionSource::Zero; }
    /// Called once per episode (or subgoal run) before the first action.
    virtual void reset(std::uint64_t /*seed*/) {}
    virtual Action act(const Observation& obs) = 0;
};

/// Plays back a recorded trajectory, indexed by world timestep.
class ExpertReplayPolicy : public Policy {
public:
    explicit ExpertReplayPolicy(Trajectory expert) : expert_(std::move(expert)) {}
    std::string name() const override { return "expert"; }
    Action act(const Observation& obs) override {
        const auto t = static_cast<std::size_t>(obs.state.timestep);
        return t < expert_.actions.size() ? expert_.actions[t] : Action::stop();
    }

private:
    Trajectory expert_;
};

/// Uniform over the five movement actions, plus the subgoal's own
/// interaction during manipulation.
class RandomPolicy : public Policy {
public:
    std::string name() const override { return "random"; }
    void reset(std::uint64_t seed) override { rng_ = Rng(hash_combine(seed, 0x52414E44ULL)); }
    Action act(const Observation& obs) override {
        if (obs.all_done()) return Action::stop();
        static constexpr std::array<ActionKind, 5> kMoves{ActionKind::MoveAhead, ActionKind::RotateLeft45,
                                                          ActionKind::RotateRight45, ActionKind::LookUp15,
                                                          ActionKind::LookDown15};
        const Subgoal& sg = obs.subgoal();
        const bool manip = sg.kind == SubgoalKind::Manip;
        const auto pick = rng_.below(manip ? 6 : 5);
        if (pick == 5) return Action::interact(sg.verb, sg.targetObjectId);
        return {kMoves[pick]};
    }

private:
    Rng rng_{0};
};

/// Wraps a callable; handy for fixtures.
class FunctionPolicy : public Policy {
public:
    using Fn = std::function<Action(const Observation&)>;
    FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    Action act(const Observation& obs) override { return fn_(obs); }

private:
    std::string name_;
    Fn fn_;
};

/// Greedy consumer of d_t. The zero vector reads as straight ahead.
inline Action angle_follower_step(const GoalDirection& d, const WorldState& state, bool blockedAhead,
                                  bool inGoalRegion) {
    (void)state;
    if (inGoalRegion) return Action::stop();
    const double psi = d.is_zero() ? 0.0 : atan2_deg(d.dsin, d.dcos);
    if (psi < -22.5) return Action::rotate_left();
    if (psi > 22.5) return Action::rotate_right();
    return blockedAhead ? Action::rotate_right() : Action::move_ahead();
}

/// Manipulation step: interact when allowed, otherwise turn or look toward a
/// pose at this cell that reaches the target, otherwise give up.
inline Action manipulation_step(const Scene& scene, const WorldState& state, const Subgoal& sg) {
    const std::size_t target = object_index(scene, sg.targetObjectId);
    if (interact_allowed(scene, state, sg.verb, target)) return Action::interact(sg.verb, sg.targetObjectId);
    const auto align = plan_alignment(state.pose, reach_poses(scene, sg.targetObjectId, state.objectCenters[target]));
    if (align && !align->empty()) return align->front();
    return Action::stop();
}

/// Angle follower for navigation plus the manipulation executor; the four
/// guided variants differ only in where d_t comes from.
class GuidedPolicy : public Policy {
public:
    GuidedPolicy(std::string name, DirectionSource source) : name_(std::move(name)), source_(source) {}
    std::string name() const override { return name_; }
    DirectionSource direction_source() const override { return source_; }
    void reset(std::uint64_t) override { detour_ = false; }
    Action act(const Observation& obs) override {
        if (obs.all_done()) return Action::stop();
        const Subgoal& sg = obs.subgoal();
        if (sg.kind == SubgoalKind::Manip) return manipulation_step(obs.scene, obs.state, sg);
        const bool blocked = blocked_ahead(obs.scene, obs.state.pose);
        const bool arrived = in_goal_region(obs.state.pose, sg.goalPoses);
        // After turning away from a blocked cell, take the free step before
        // listening to d_t again; otherwise d_t turns the agent straight back.
        if (detour_ && !blocked && !arrived) {
            detour_ = false;
            return Action::move_ahead();
        }
        const Action a = angle_follower_step(obs.direction, obs.state, blocked, arrived);
        detour_ = blocked && a.kind == ActionKind::RotateRight45 &&
                  std::abs(obs.direction.is_zero() ? 0.0 : obs.direction.degrees()) <= 22.5;
        return a;
    }

private:
    std::string name_;
    DirectionSource source_;
    bool detour_ = false;
};

inline const std::vector<std::string>& policy_roster() {
    static const std::vector<std::string> roster{"expert", "random", "unguided", "heuristic", "localizer", "oracle"};
    return roster;
}

/// Fresh policy instance by roster name. `expert` is needed for "expert".
inline std::unique_ptr<Policy> make_policy(const std::string& name, const Trajectory* expert = nullptr) {
    if (name == "expert") {
        if (!expert) throw Error(ErrorKind::ConfigError, "expert policy needs the expert trajectory");
        return std::make_unique<ExpertReplayPolicy>(*expert);
    }
    if (name == "random") return std::make_unique<RandomPolicy>();
    if (name == "unguided") return std::make_unique<GuidedPolicy>(name, DirectionSource::Zero);
    if (name == "heuristic") return std::make_unique<GuidedPolicy>(name, DirectionSource::Heuristic);
    if (name == "localizer") return std::make_unique<GuidedPolicy>(name, DirectionSource::Localizer);
    if (name == "oracle") return std::make_unique<GuidedPolicy>(name, DirectionSource::Oracle);
    throw Error(ErrorKind::ConfigError, "unknown policy: " + name);
}

// ---------------------------------------------------------------------------
// Runners

/// Tracks the active subgoal by checking conditions after every action.
class SubgoalTracker {
public:
    SubgoalTracker(const Scene& scene, const Task& task, const WorldState& initial)
        : scene_(scene), task_(task), start_(initial), success_(task.subgoals.size(), false) {
        advance(initial);
    }

    /// Moves past every satisfied subgoal; returns the indices that started.
    std::vector<int> advance(const WorldState& now) {
        std::vector<int> started;
        while (index_ < static_cast<int>(task_.subgoals.size()) &&
               subgoal_satisfied(scene_, task_.subgoals[static_cast<std::size_t>(index_)], start_, now)) {
            success_[static_cast<std::size_t>(index_)] = true;
            ++index_;
            start_ = now;
            started.push_back(index_);
        }
        return started;
    }

    int index() const { return index_; }
    const WorldState& subgoal_start() const { return start_; }
    const std::vector<bool>& success() const { return success_; }

private:
    const Scene& scene_;
    const Task& task_;
    WorldState start_;
    std::vector<bool> success_;
    int index_ = 0;
};

/// One logged timestep.
struct StepRecord {
    int timestep = 0;
    AgentPose pose;  // before the action
    Action action;
    DirectionSource source = DirectionSource::Zero;
    GoalDirection direction;
    int subgoalIndex = 0;
    ActionResult result = ActionResult::Succeeded;
};

struct EpisodeOutcome {
    Trajectory trajectory;
    StopReason stopReason = StopReason::PredictedStop;
    GoalCount goalConditions;
    std::vector<bool> perSubgoalSuccess;
    std::vector<StepRecord> steps;
    int apiErrors = 0;
};

struct SubgoalOutcome {
    int subgoalIndex = 0;
    SubgoalKind kind = SubgoalKind::Nav;
    Verb verb = Verb::PickUp;  // Manip only
    bool success = false;
    std::optional<StopReason> stopReason;  // empty when the subgoal came true
    int steps = 0;
};

namespace detail {

// Applies one action and logs it. Returns the stop reason if the episode or
// subgoal run must end here.
inline std::optional<StopReason> step(const Scene& scene, WorldState& state, const Action& action,
                                      DirectionSource source, const GoalDirection& d, int subgoalIndex,
                                      const EpisodeLimits& limits, Trajectory& traj, std::vector<StepRecord>* log) {
    StepRecord rec{state.timestep, state.pose, action, source, d, subgoalIndex, ActionResult::Succeeded};
    auto [next, result] = apply_action(scene, state, action);
    state = std::move(next);
    rec.result = result;
    traj.actions.push_back(action);
    traj.poses.push_back(state.pose);
    if (log) log->push_back(rec);
    if (action.kind == ActionKind::Stop) return StopReason::PredictedStop;
    if (state.apiErrorCount >= limits.maxApiErrors) return StopReason::ApiErrorLimit;
    return std::nullopt;
}

// The costed sweep: eight right turns that bring the agent back to its
// heading. Returns a stop reason if the limits run out mid-sweep.
inline std::optional<StopReason> costed_sweep(const Scene& scene, WorldState& state, int subgoalIndex,
                                              const EpisodeLimits& limits, int budget, Trajectory& traj,
                                              std::vector<StepRecord>* log) {
    for (int i = 0; i < kPanoramicViews; ++i) {
        if (static_cast<int>(traj.actions.size()) >= budget) return StopReason::TimestepLimit;
        if (auto r = step(scene, state, Action::rotate_right(), DirectionSource::Zero, GoalDirection::zero(),
                          subgoalIndex, limits, traj, log))
            return r;
    }
    return std::nullopt;
}

inline bool sweeps(DirectionSource s) { return s == DirectionSource::Heuristic || s == DirectionSource::Localizer; }

} // namespace detail

/// Full episode from the task's start pose. `seed` keys the detector draws
/// and the policy's own randomness.
inline EpisodeOutcome run_episode(const Scene& scene, const Task& task, Policy& policy, const Perception& perception,
                                  const EpisodeLimits& limits, std::uint64_t seed) {
    validate(limits);
    EpisodeOutcome out;
    WorldState state = initial_state(scene, task.startPose);
    out.trajectory.sceneSeed = task.sceneSeed;
    out.trajectory.taskSeed = task.taskSeed;
    out.trajectory.poses.push_back(state.pose);
    SubgoalTracker tracker(scene, task, state);
    for (int k = 0; k <= tracker.index() && k < static_cast<int>(task.subgoals.size()); ++k)
        out.trajectory.subgoalBoundaries.push_back({k, 0});
    policy.reset(seed);
    const DirectionSource source = policy.direction_source();

    std::optional<StopReason> reason;
    while (!reason) {
        if (static_cast<int>(out.trajectory.actions.size()) >= limits.maxTimesteps) {
            reason = StopReason::TimestepLimit;
            break;
        }
        const int k = tracker.index();
        const bool nav = k < static_cast<int>(task.subgoals.size()) &&
                         task.subgoals[static_cast<std::size_t>(k)].kind == SubgoalKind::Nav;
        if (nav && perception.sweepCountsAsActions && detail::sweeps(source)) {
            reason = detail::costed_sweep(scene, state, k, limits, limits.maxTimesteps, out.trajectory, &out.steps);
            if (reason) break;
            if (static_cast<int>(out.trajectory.actions.size()) >= limits.maxTimesteps) {
                reason = StopReason::TimestepLimit;
                break;
            }
        }
        const GoalDirection d = sense_direction(source, scene, task, state, k, perception, seed);
        const Observation obs{scene, task, state, tracker.subgoal_start(), k, d};
        const Action action = policy.act(obs);
        reason = detail::step(scene, state, action, source, d, k, limits, out.trajectory, &out.steps);
        for (int started : tracker.advance(state))
            if (started < static_cast<int>(task.subgoals.size()))
                out.trajectory.subgoalBoundaries.push_back({started, static_cast<int>(out.trajectory.actions.size())});
    }
    out.stopReason = *reason;
    out.goalConditions = check_goal_conditions(scene, state, task);
    out.perSubgoalSuccess = tracker.success();
    out.apiErrors = state.apiErrorCount;
    return out;
}

/// World after the expert's actions up to the start of `subgoalIndex`.
inline WorldState fast_forward(const Scene& scene, const Task& task, const Trajectory& expert, int subgoalIndex) {
    WorldState state = initial_state(scene, task.startPose);
    int end = 0;
    for (const auto& b : expert.subgoalBoundaries)
        if (b.subgoalIndex == subgoalIndex) end = b.startTimestep;
    for (int t = 0; t < end; ++t) {
        auto [next, result] = apply_action(scene, state, expert.actions[static_cast<std::size_t>(t)]);
        if (result == ActionResult::Failed) throw Error(ErrorKind::InfeasibleTask, "expert fast-forward failed");
        state = std::move(next);
    }
    return state;
}

/// One subgoal in isolation: the expert drives up to it, then the policy
/// runs until the subgoal holds, it predicts Stop, or a limit is hit.
inline SubgoalOutcome run_subgoal(const Scene& scene, const Task& task, const Trajectory& expert, int subgoalIndex,
                                  Policy& policy, const Perception& perception, const EpisodeLimits& limits,
                                  std::uint64_t seed) {
    validate(limits);
    if (subgoalIndex < 0 || subgoalIndex >= static_cast<int>(task.subgoals.size()))
        throw Error(ErrorKind::ValidationError, "subgoal index out of range");
    const Subgoal& sg = task.subgoals[static_cast<std::size_t>(subgoalIndex)];
    SubgoalOutcome out{subgoalIndex, sg.kind, sg.verb, false, std::nullopt, 0};

    WorldState state = fast_forward(scene, task, expert, subgoalIndex);
    const WorldState atStart = state;
    const std::uint64_t runSeed = hash_combine(seed, static_cast<std::uint64_t>(subgoalIndex));
    policy.reset(runSeed);
    const DirectionSource source = policy.direction_source();
    Trajectory scratch;

    while (!(out.success = subgoal_satisfied(scene, sg, atStart, state))) {
        if (out.steps >= limits.maxSubgoalTimesteps) {
            out.stopReason = StopReason::SubgoalLimit;
            return out;
        }
        if (sg.kind == SubgoalKind::Nav && perception.sweepCountsAsActions && detail::sweeps(source)) {
            const int before = static_cast<int>(scratch.actions.size());
            const int budget = before + (limits.maxSubgoalTimesteps - out.steps);
            auto r = detail::costed_sweep(scene, state, subgoalIndex, limits, budget, scratch, nullptr);
            out.steps += static_cast<int>(scratch.actions.size()) - before;
            if (r) {
                out.stopReason = *r == StopReason::TimestepLimit ? StopReason::SubgoalLimit : *r;
                return out;
            }
            if (out.steps >= limits.maxSubgoalTimesteps) return out;
        }
        const GoalDirection d = sense_direction(source, scene, task, state, subgoalIndex, perception, runSeed);
        const Observation obs{scene, task, state, atStart, subgoalIndex, d};
        const Action action = policy.act(obs);
        ++out.steps;
        if (auto r = detail::step(scene, state, action, source, d, subgoalIndex, limits, scratch, nullptr)) {
            out.stopReason = *r;
            out.success = subgoal_satisfied(scene, sg, atStart, state);
            return out;
        }
    }
    return out;
}

} // namespace pano_nav
