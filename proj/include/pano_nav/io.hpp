#pragma once

// JSON forms of the domain types, versioned documents, and file helpers.
//
// Field names follow the type definitions. Angles are degrees and lengths
// meters throughout. Output goes through ordered_json so key order, and
// therefore bytes, are stable.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pano_nav/core/error.hpp"
#include "pano_nav/detector.hpp"
#include "pano_nav/localizer/model.hpp"
#include "pano_nav/localizer/train.hpp"
#include "pano_nav/panocam.hpp"
#include "pano_nav/policy.hpp"
#include "pano_nav/scenegen.hpp"
#include "pano_nav/world.hpp"

namespace pano_nav {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSceneSchema = "pano_nav_scene_v1";
inline constexpr const char* kTrajectorySchema = "pano_nav_trajectory_v1";
inline constexpr const char* kManifestSchema = "pano_nav_manifest_v1";
inline constexpr const char* kModelSchema = "pano_nav_localizer_v1";
inline constexpr const char* kDataSchema = "pano_nav_localizer_data_v1";
inline constexpr const char* kSweepSchema = "pano_nav_sweep_v1";
inline constexpr const char* kStepLogSchema = "pano_nav_steps_v1";
inline constexpr const char* kReportSchema = "pano_nav_report_v1";

// ---------------------------------------------------------------------------
// Enums

namespace detail {

template <typename E, std::size_t N>
E enum_from(const std::string& s, const std::array<E, N>& values, const char* what) {
    for (E v : values)
        if (s == to_string(v)) return v;
    throw Error(ErrorKind::ValidationError, std::string("unknown ") + what + ": " + s);
}

inline constexpr std::array<Verb, 4> kVerbs{Verb::PickUp, Verb::PutDown, Verb::Slice, Verb::Toggle};
inline constexpr std::array<ActionKind, 7> kActionKinds{ActionKind::MoveAhead,     ActionKind::RotateLeft45,
                                                        ActionKind::RotateRight45, ActionKind::LookUp15,
                                                        ActionKind::LookDown15,    ActionKind::Interact,
                                                        ActionKind::Stop};
inline constexpr std::array<StopReason, 4> kStopReasons{StopReason::PredictedStop, StopReason::TimestepLimit,
                                                        StopReason::ApiErrorLimit, StopReason::SubgoalLimit};
inline constexpr std::array<DirectionSource, 4> kSources{DirectionSource::Zero, DirectionSource::Oracle,
                                                         DirectionSource::Heuristic, DirectionSource::Localizer};

inline const char* goal_kind_name(GoalKind k) {
    switch (k) {
    case GoalKind::PlacedOn: return "PlacedOn";
    case GoalKind::Sliced: return "Sliced";
    case GoalKind::Toggled: return "Toggled";
    case GoalKind::Holding: return "Holding";
    }
    return "?";
}

inline GoalKind goal_kind_from(const std::string& s) {
    for (GoalKind k : {GoalKind::PlacedOn, GoalKind::Sliced, GoalKind::Toggled, GoalKind::Holding})
        if (s == goal_kind_name(k)) return k;
    throw Error(ErrorKind::ValidationError, "unknown goal kind: " + s);
}

inline const char* projection_name(ProjectionMode m) { return m == ProjectionMode::Corners ? "Corners" : "CentroidExact"; }

inline ProjectionMode projection_from(const std::string& s) {
    if (s == "Corners") return ProjectionMode::Corners;
    if (s == "CentroidExact") return ProjectionMode::CentroidExact;
    throw Error(ErrorKind::ValidationError, "unknown projection mode: " + s);
}

} // namespace detail

inline Verb verb_from_string(const std::string& s) { return detail::enum_from(s, detail::kVerbs, "verb"); }
inline ActionKind action_kind_from_string(const std::string& s) {
    return detail::enum_from(s, detail::kActionKinds, "action");
}
inline StopReason stop_reason_from_string(const std::string& s) {
    return detail::enum_from(s, detail::kStopReasons, "stop reason");
}
inline DirectionSource direction_source_from_string(const std::string& s) {
    return detail::enum_from(s, detail::kSources, "direction source");
}

// ---------------------------------------------------------------------------
// Value types (ADL hooks for nlohmann)

template <typename J>
void to_json(J& j, const Cell& c) {
    j = J{{"cx", c.x}, {"cy", c.y}};
}
template <typename J>
void from_json(const J& j, Cell& c) {
    c.x = j.at("cx").template get<int>();
    c.y = j.at("cy").template get<int>();
}

template <typename J>
void to_json(J& j, const Vec3& v) {
    j = J::array({v.x, v.y, v.z});
}
template <typename J>
void from_json(const J& j, Vec3& v) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ValidationError, "expected [x, y, z]");
    v = {j[0].template get<double>(), j[1].template get<double>(), j[2].template get<double>()};
}

template <typename J>
void to_json(J& j, const ObjectClass& c) {
    j = J{{"id", c.id}, {"name", c.name}};
}
template <typename J>
void from_json(const J& j, ObjectClass& c) {
    c.id = j.at("id").template get<int>();
    c.name = j.at("name").template get<std::string>();
}

template <typename J>
void to_json(J& j, const ObjectState& s) {
    j = J{{"held", s.held},
          {"placedOn", s.placedOn ? J(*s.placedOn) : J(nullptr)},
          {"sliced", s.sliced},
          {"toggled", s.toggled}};
}
template <typename J>
void from_json(const J& j, ObjectState& s) {
    s.held = j.at("held").template get<bool>();
    s.placedOn.reset();
    if (!j.at("placedOn").is_null()) s.placedOn = j.at("placedOn").template get<int>();
    s.sliced = j.at("sliced").template get<bool>();
    s.toggled = j.at("toggled").template get<bool>();
}

template <typename J>
void to_json(J& j, const SceneObject& o) {
    j = J{{"objectId", o.objectId}, {"class", o.cls},         {"center", o.center},           {"extent", o.extent},
          {"isReceptacle", o.isReceptacle}, {"isPickable", o.isPickable}, {"state", o.state}};
}
template <typename J>
void from_json(const J& j, SceneObject& o) {
    o.objectId = j.at("objectId").template get<int>();
    o.cls = j.at("class").template get<ObjectClass>();
    o.center = j.at("center").template get<Vec3>();
    o.extent = j.at("extent").template get<Vec3>();
    o.isReceptacle = j.at("isReceptacle").template get<bool>();
    o.isPickable = j.at("isPickable").template get<bool>();
    o.state = j.at("state").template get<ObjectState>();
}

template <typename J>
void to_json(J& j, const Scene& s) {
    j = J{{"gridWidth", s.gridWidth}, {"gridHeight", s.gridHeight}, {"cellSize", s.cellSize},
          {"obstacles", s.obstacles}, {"objects", s.objects},       {"sceneSeed", s.sceneSeed},
          {"classVocabSize", s.classVocabSize}};
}
template <typename J>
void from_json(const J& j, Scene& s) {
    s.gridWidth = j.at("gridWidth").template get<int>();
    s.gridHeight = j.at("gridHeight").template get<int>();
    s.cellSize = j.at("cellSize").template get<double>();
    s.obstacles = j.at("obstacles").template get<std::vector<Cell>>();
    s.objects = j.at("objects").template get<std::vector<SceneObject>>();
    s.sceneSeed = j.at("sceneSeed").template get<std::uint64_t>();
    s.classVocabSize = j.at("classVocabSize").template get<int>();
}

template <typename J>
void to_json(J& j, const AgentPose& p) {
    j = J{{"cell", p.cell}, {"heading", p.heading}, {"pitch", p.pitch}};
}
template <typename J>
void from_json(const J& j, AgentPose& p) {
    p.cell = j.at("cell").template get<Cell>();
    p.heading = j.at("heading").template get<int>();
    p.pitch = j.at("pitch").template get<int>();
    if (!valid_pose_angles(p)) throw Error(ErrorKind::ValidationError, "pose heading or pitch out of range");
}

template <typename J>
void to_json(J& j, const Action& a) {
    j = J{{"kind", to_string(a.kind)}};
    if (a.kind == ActionKind::Interact) {
        j["verb"] = to_string(a.verb);
        j["objectId"] = a.objectId;
    }
}
template <typename J>
void from_json(const J& j, Action& a) {
    a = {};
    a.kind = action_kind_from_string(j.at("kind").template get<std::string>());
    if (a.kind == ActionKind::Interact) {
        a.verb = verb_from_string(j.at("verb").template get<std::string>());
        a.objectId = j.at("objectId").template get<int>();
    }
}

template <typename J>
void to_json(J& j, const GoalCondition& c) {
    j = J{{"kind", detail::goal_kind_name(c.kind)}, {"objectId", c.objectId}, {"receptacleId", c.receptacleId}};
}
template <typename J>
void from_json(const J& j, GoalCondition& c) {
    c.kind = detail::goal_kind_from(j.at("kind").template get<std::string>());
    c.objectId = j.at("objectId").template get<int>();
    c.receptacleId = j.at("receptacleId").template get<int>();
}

template <typename J>
void to_json(J& j, const Subgoal& s) {
    j = J{{"index", s.index}, {"kind", s.kind == SubgoalKind::Nav ? "Nav" : "Manip"}, {"targetObjectId", s.targetObjectId}};
    if (s.kind == SubgoalKind::Nav) j["goalPoses"] = s.goalPoses;
    else j["verb"] = to_string(s.verb);
}
template <typename J>
void from_json(const J& j, Subgoal& s) {
    s = {};
    s.index = j.at("index").template get<int>();
    const auto kind = j.at("kind").template get<std::string>();
    if (kind != "Nav" && kind != "Manip") throw Error(ErrorKind::ValidationError, "unknown subgoal kind: " + kind);
    s.kind = kind == "Nav" ? SubgoalKind::Nav : SubgoalKind::Manip;
    s.targetObjectId = j.at("targetObjectId").template get<int>();
    if (s.kind == SubgoalKind::Nav) s.goalPoses = j.at("goalPoses").template get<std::vector<AgentPose>>();
    else s.verb = verb_from_string(j.at("verb").template get<std::string>());
}

template <typename J>
void to_json(J& j, const Instruction& i) {
    j = J{{"tokens", i.tokens}, {"surface", i.surface}};
}
template <typename J>
void from_json(const J& j, Instruction& i) {
    i.tokens = j.at("tokens").template get<std::vector<int>>();
    i.surface = j.at("surface").template get<std::string>();
}

template <typename J>
void to_json(J& j, const Task& t) {
    j = J{{"goalConditions", t.goalConditions},   {"subgoals", t.subgoals},   {"goalInstruction", t.goalInstruction},
          {"stepInstructions", t.stepInstructions}, {"taskSeed", t.taskSeed}, {"sceneSeed", t.sceneSeed},
          {"startPose", t.startPose}};
}
template <typename J>
void from_json(const J& j, Task& t) {
    t.goalConditions = j.at("goalConditions").template get<std::vector<GoalCondition>>();
    t.subgoals = j.at("subgoals").template get<std::vector<Subgoal>>();
    t.goalInstruction = j.at("goalInstruction").template get<Instruction>();
    t.stepInstructions = j.at("stepInstructions").template get<std::vector<Instruction>>();
    t.taskSeed = j.at("taskSeed").template get<std::uint64_t>();
    t.sceneSeed = j.at("sceneSeed").template get<std::uint64_t>();
    t.startPose = j.at("startPose").template get<AgentPose>();
    if (t.stepInstructions.size() != t.subgoals.size())
        throw Error(ErrorKind::ValidationError, "task needs one instruction per subgoal");
}

template <typename J>
void to_json(J& j, const SubgoalBoundary& b) {
    j = J{{"subgoalIndex", b.subgoalIndex}, {"startTimestep", b.startTimestep}};
}
template <typename J>
void from_json(const J& j, SubgoalBoundary& b) {
    b.subgoalIndex = j.at("subgoalIndex").template get<int>();
    b.startTimestep = j.at("startTimestep").template get<int>();
}

template <typename J>
void to_json(J& j, const Trajectory& t) {
    j = J{{"actions", t.actions},     {"poses", t.poses},       {"subgoalBoundaries", t.subgoalBoundaries},
          {"sceneSeed", t.sceneSeed}, {"taskSeed", t.taskSeed}};
}
template <typename J>
void from_json(const J& j, Trajectory& t) {
    t.actions = j.at("actions").template get<std::vector<Action>>();
    t.poses = j.at("poses").template get<std::vector<AgentPose>>();
    t.subgoalBoundaries = j.at("subgoalBoundaries").template get<std::vector<SubgoalBoundary>>();
    t.sceneSeed = j.at("sceneSeed").template get<std::uint64_t>();
    t.taskSeed = j.at("taskSeed").template get<std::uint64_t>();
    if (t.poses.size() != t.actions.size() + 1)
        throw Error(ErrorKind::ValidationError, "trajectory needs one more pose than actions");
}

template <typename J>
void to_json(J& j, const BoundingBox2D& b) {
    j = J{{"p", b.p}, {"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}, {"objectId", b.objectId}, {"classId", b.classId}};
}
template <typename J>
void from_json(const J& j, BoundingBox2D& b) {
    b.p = j.at("p").template get<int>();
    b.cx = j.at("cx").template get<double>();
    b.cy = j.at("cy").template get<double>();
    b.w = j.at("w").template get<double>();
    b.h = j.at("h").template get<double>();
    b.objectId = j.at("objectId").template get<int>();
    b.classId = j.at("classId").template get<int>();
}

template <typename J>
void to_json(J& j, const Detection& d) {
    j = J{{"box", d.box},
          {"confidence", d.confidence},
          {"sourceObjectId", d.sourceObjectId ? J(*d.sourceObjectId) : J(nullptr)}};
}
template <typename J>
void from_json(const J& j, Detection& d) {
    d.box = j.at("box").template get<BoundingBox2D>();
    d.confidence = j.at("confidence").template get<double>();
    d.sourceObjectId.reset();
    if (!j.at("sourceObjectId").is_null()) d.sourceObjectId = j.at("sourceObjectId").template get<int>();
}

// ---------------------------------------------------------------------------
// Configuration pieces

template <typename J>
void to_json(J& j, const GenParams& g) {
    j = J{{"gridWidth", g.gridWidth},       {"gridHeight", g.gridHeight},
          {"obstacleDensity", g.obstacleDensity}, {"objectCount", g.objectCount},
          {"classVocabSize", g.classVocabSize},   {"receptacleFraction", g.receptacleFraction},
          {"cellSize", g.cellSize},         {"seed", g.seed}};
}
template <typename J>
void from_json(const J& j, GenParams& g) {
    g.gridWidth = j.at("gridWidth").template get<int>();
    g.gridHeight = j.at("gridHeight").template get<int>();
    g.obstacleDensity = j.at("obstacleDensity").template get<double>();
    g.objectCount = j.at("objectCount").template get<int>();
    g.classVocabSize = j.at("classVocabSize").template get<int>();
    g.receptacleFraction = j.at("receptacleFraction").template get<double>();
    g.cellSize = j.at("cellSize").template get<double>();
    g.seed = j.at("seed").template get<std::uint64_t>();
}

template <typename J>
void to_json(J& j, const CameraIntrinsics& c) {
    j = J{{"fovX", c.fovX}, {"fovY", c.fovY}};
}
template <typename J>
void from_json(const J& j, CameraIntrinsics& c) {
    c.fovX = j.at("fovX").template get<double>();
    c.fovY = j.at("fovY").template get<double>();
}

template <typename J>
void to_json(J& j, const NoiseModel& n) {
    j = J{{"centroidJitterStd", n.centroidJitterStd}, {"sizeJitterStd", n.sizeJitterStd},
          {"missRate", n.missRate},                   {"falsePositiveRate", n.falsePositiveRate},
          {"labelConfusionRate", n.labelConfusionRate}, {"seed", n.seed},
          {"classCount", n.classCount}};
}
template <typename J>
void from_json(const J& j, NoiseModel& n) {
    n.centroidJitterStd = j.at("centroidJitterStd").template get<double>();
    n.sizeJitterStd = j.at("sizeJitterStd").template get<double>();
    n.missRate = j.at("missRate").template get<double>();
    n.falsePositiveRate = j.at("falsePositiveRate").template get<double>();
    n.labelConfusionRate = j.at("labelConfusionRate").template get<double>();
    n.seed = j.at("seed").template get<std::uint64_t>();
    n.classCount = j.at("classCount").template get<int>();
}

template <typename J>
void to_json(J& j, const EpisodeLimits& l) {
    j = J{{"maxTimesteps", l.maxTimesteps}, {"maxApiErrors", l.maxApiErrors}, {"maxSubgoalTimesteps", l.maxSubgoalTimesteps}};
}
template <typename J>
void from_json(const J& j, EpisodeLimits& l) {
    l.maxTimesteps = j.at("maxTimesteps").template get<int>();
    l.maxApiErrors = j.at("maxApiErrors").template get<int>();
    l.maxSubgoalTimesteps = j.at("maxSubgoalTimesteps").template get<int>();
}

template <typename J>
void to_json(J& j, const TrainConfig& c) {
    j = J{{"learningRate", c.learningRate}, {"epochs", c.epochs},       {"batchSize", c.batchSize},
          {"seed", c.seed},                 {"initScale", c.initScale}, {"momentum", c.momentum},
          {"gradClip", c.gradClip}};
}
template <typename J>
void from_json(const J& j, TrainConfig& c) {
    c.learningRate = j.at("learningRate").template get<double>();
    c.epochs = j.at("epochs").template get<int>();
    c.batchSize = j.at("batchSize").template get<int>();
    c.seed = j.at("seed").template get<std::uint64_t>();
    c.initScale = j.at("initScale").template get<double>();
    c.momentum = j.at("momentum").template get<double>();
    c.gradClip = j.at("gradClip").template get<double>();
}

template <typename J>
void to_json(J& j, const ModelShape& s) {
    j = J{{"classCount", s.classCount}, {"vocabSize", s.vocabSize}, {"dim", s.dim}, {"heads", s.heads()}};
}
template <typename J>
void from_json(const J& j, ModelShape& s) {
    s.classCount = j.at("classCount").template get<int>();
    s.vocabSize = j.at("vocabSize").template get<int>();
    s.dim = j.at("dim").template get<int>();
    if (j.contains("heads") && j.at("heads").template get<int>() != kAttentionHeads)
        throw Error(ErrorKind::ValidationError, "unsupported head count");
}

// ---------------------------------------------------------------------------
// Records

/// One training example as stored on disk: the raw sensing, not the tokens.
struct LocalizerRecord {
    std::vector<Detection> detections;
    int delta = 0;  // head pitch, degrees
    std::vector<int> instrK;
    std::vector<int> instrK1;
    double psi = 0.0;  // degrees

    friend bool operator==(const LocalizerRecord&, const LocalizerRecord&) = default;
};

inline TrainingSample to_sample(const LocalizerRecord& r, const CameraIntrinsics& cam) {
    return {build_input(r.detections, cam, r.delta, r.instrK, r.instrK1), r.psi};
}

template <typename J>
void to_json(J& j, const LocalizerRecord& r) {
    j = J{{"detections", r.detections}, {"delta", r.delta}, {"instrK", r.instrK}, {"instrK1", r.instrK1}, {"psi", r.psi}};
}
template <typename J>
void from_json(const J& j, LocalizerRecord& r) {
    r.detections = j.at("detections").template get<std::vector<Detection>>();
    r.delta = j.at("delta").template get<int>();
    r.instrK = j.at("instrK").template get<std::vector<int>>();
    r.instrK1 = j.at("instrK1").template get<std::vector<int>>();
    r.psi = j.at("psi").template get<double>();
}

template <typename J>
void to_json(J& j, const StepRecord& s) {
    j = J{{"timestep", s.timestep},
          {"pose", s.pose},
          {"action", s.action},
          {"directionSource", to_string(s.source)},
          {"direction", J::array({s.direction.dsin, s.direction.dcos})},
          {"subgoalIndex", s.subgoalIndex},
          {"result", s.result == ActionResult::Succeeded ? "Succeeded" : "Failed"}};
}
template <typename J>
void from_json(const J& j, StepRecord& s) {
    s.timestep = j.at("timestep").template get<int>();
    s.pose = j.at("pose").template get<AgentPose>();
    s.action = j.at("action").template get<Action>();
    s.source = direction_source_from_string(j.at("directionSource").template get<std::string>());
    const auto& d = j.at("direction");
    s.direction = {d.at(0).template get<double>(), d.at(1).template get<double>()};
    s.subgoalIndex = j.at("subgoalIndex").template get<int>();
    s.result = j.at("result").template get<std::string>() == "Failed" ? ActionResult::Failed : ActionResult::Succeeded;
}

// ---------------------------------------------------------------------------
// Versioned documents

/// Wraps `body` under `key` with the schema tag and config digest.
inline Json document(const char* schema, const std::string& digest, const char* key, Json body) {
    Json j;
    j["schema"] = schema;
    j["configDigest"] = digest;
    j[key] = std::move(body);
    return j;
}

/// Checks the schema tag and, when `digest` is non-empty, the config digest.
inline void check_document(const nlohmann::json& j, const char* schema, const std::string& digest,
                           const std::string& what) {
    if (!j.is_object() || !j.contains("schema") || j.at("schema") != schema)
        throw Error(ErrorKind::ValidationError, what + ": expected schema " + schema);
    if (!digest.empty() && (!j.contains("configDigest") || j.at("configDigest") != digest))
        throw Error(ErrorKind::ValidationError, what + ": config digest mismatch");
}

template <typename T>
T from_document(const nlohmann::json& j, const char* schema, const char* key, const std::string& digest,
                const std::string& what) {
    check_document(j, schema, digest, what);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ValidationError, what + ": " + e.what());
    }
}

inline Json scene_document(const Scene& s, const std::string& digest = {}) {
    return document(kSceneSchema, digest, "scene", Json(s));
}
inline Json task_document(const Task& t, const std::string& digest = {}) {
    return document(kSceneSchema, digest, "task", Json(t));
}
inline Json trajectory_document(const Trajectory& t, const std::string& digest = {}) {
    return document(kTrajectorySchema, digest, "trajectory", Json(t));
}

/// Checkpoint: shape, seed, and every tensor by name.
inline Json model_document(const LocalizerModel& m, const std::string& digest = {}) {
    Json body;
    body["shape"] = m.shape;
    body["seed"] = m.seed;
    body["tensors"] = Json::array();
    const auto layout = m.layout();
    for (const TensorSlot* t : layout.slots()) {
        const auto values = m.tensor(*t);
        body["tensors"].push_back(Json{{"name", t->name},
                                       {"rows", t->rows},
                                       {"cols", t->cols},
                                       {"values", std::vector<double>(values.begin(), values.end())}});
    }
    return document(kModelSchema, digest, "model", std::move(body));
}

inline LocalizerModel model_from_document(const nlohmann::json& j, const std::string& digest = {}) {
    check_document(j, kModelSchema, digest, "checkpoint");
    try {
        const auto& body = j.at("model");
        LocalizerModel m(body.at("shape").get<ModelShape>());
        m.seed = body.at("seed").get<std::uint64_t>();
        const auto layout = m.layout();
        const auto slots = layout.slots();
        const auto& tensors = body.at("tensors");
        if (tensors.size() != slots.size()) throw Error(ErrorKind::ValidationError, "checkpoint tensor count mismatch");
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const auto& t = tensors.at(i);
            const auto values = t.at("values").get<std::vector<double>>();
            if (t.at("name") != slots[i]->name || t.at("rows") != slots[i]->rows || t.at("cols") != slots[i]->cols ||
                values.size() != slots[i]->size())
                throw Error(ErrorKind::ValidationError, "checkpoint tensor " + slots[i]->name + " has the wrong shape");
            std::copy(values.begin(), values.end(), m.tensor(*slots[i]).begin());
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ValidationError, std::string("checkpoint: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ValidationError, path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// JSON lines: a header object, then one record per line.
inline void write_jsonl(const std::filesystem::path& path, const Json& header, const std::vector<Json>& records) {
    std::string text = header.dump() + "\n";
    for (const auto& r : records) text += r.dump() + "\n";
    write_text(path, text);
}

/// Returns the records after checking the header's schema and digest.
inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path, const char* schema,
                                              const std::string& digest) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<nlohmann::json> records;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::ValidationError, path.string() + ": " + e.what());
        }
        if (header) {
            check_document(j, schema, digest, path.string());
            header = false;
        } else {
            records.push_back(std::move(j));
        }
    }
    if (header) throw Error(ErrorKind::ValidationError, path.string() + ": missing header line");
    return records;
}

inline Json jsonl_header(const char* schema, const std::string& digest) {
    return Json{{"schema", schema}, {"configDigest", digest}};
}

/// Sweep dump: one box per line.
inline void write_sweep(const std::filesystem::path& path, const std::vector<BoundingBox2D>& boxes,
                        const std::string& digest = {}) {
    std::vector<Json> lines;
    for (const auto& b : boxes) lines.emplace_back(b);
    write_jsonl(path, jsonl_header(kSweepSchema, digest), lines);
}

inline std::vector<BoundingBox2D> read_sweep(const std::filesystem::path& path, const std::string& digest = {}) {
    std::vector<BoundingBox2D> boxes;
    for (const auto& j : read_jsonl(path, kSweepSchema, digest)) boxes.push_back(j.get<BoundingBox2D>());
    return boxes;
}

} // namespace pano_nav
