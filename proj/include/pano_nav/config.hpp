#pragma once

// Run configuration: one JSON document drives every command.
//
// The digest hashes the canonical serialization of everything that can
// change a result. The output directory and job count are left out since
// they never do.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pano_nav/core/error.hpp"
#include "pano_nav/core/rng.hpp"
#include "pano_nav/io.hpp"

namespace pano_nav {

struct SplitConfig {
    int trainScenes = 100;
    int trainEpisodes = 400;
    int validSeenEpisodes = 100;
    int validUnseenEpisodes = 100;
    std::uint64_t trainSeed = 1;
    std::uint64_t validSeenSeed = 2;
    std::uint64_t validUnseenSeed = 3;

    friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

struct DataConfig {
    int maxTrainingSamples = 5000;
    int maxHeldOutSamples = 2000;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct GradCheckConfig {
    int pairs = 10;
    double eps = 1e-5;
    double tolerance = 1e-4;

    friend bool operator==(const GradCheckConfig&, const GradCheckConfig&) = default;
};

struct RunConfig {
    std::uint64_t seed = 0;
    GenParams gen;
    CameraIntrinsics camera;
    NoiseModel noise;
    ProjectionMode projection = ProjectionMode::Corners;
    TrainConfig train;
    int modelDim = kDefaultModelDim;
    EpisodeLimits limits;
    bool sweepCountsAsActions = false;
    std::vector<std::string> policies = policy_roster();
    SplitConfig splits;
    DataConfig data;
    GradCheckConfig gradcheck;
    std::string outDir = "out";
    int jobs = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

template <typename J>
void to_json(J& j, const SplitConfig& s) {
    j = J{{"trainScenes", s.trainScenes},         {"trainEpisodes", s.trainEpisodes},
          {"validSeenEpisodes", s.validSeenEpisodes}, {"validUnseenEpisodes", s.validUnseenEpisodes},
          {"trainSeed", s.trainSeed},             {"validSeenSeed", s.validSeenSeed},
          {"validUnseenSeed", s.validUnseenSeed}};
}
template <typename J>
void from_json(const J& j, SplitConfig& s) {
    s.trainScenes = j.at("trainScenes").template get<int>();
    s.trainEpisodes = j.at("trainEpisodes").template get<int>();
    s.validSeenEpisodes = j.at("validSeenEpisodes").template get<int>();
    s.validUnseenEpisodes = j.at("validUnseenEpisodes").template get<int>();
    s.trainSeed = j.at("trainSeed").template get<std::uint64_t>();
    s.validSeenSeed = j.at("validSeenSeed").template get<std::uint64_t>();
    s.validUnseenSeed = j.at("validUnseenSeed").template get<std::uint64_t>();
}

template <typename J>
void to_json(J& j, const DataConfig& d) {
    j = J{{"maxTrainingSamples", d.maxTrainingSamples}, {"maxHeldOutSamples", d.maxHeldOutSamples}};
}
template <typename J>
void from_json(const J& j, DataConfig& d) {
    d.maxTrainingSamples = j.at("maxTrainingSamples").template get<int>();
    d.maxHeldOutSamples = j.at("maxHeldOutSamples").template get<int>();
}

template <typename J>
void to_json(J& j, const GradCheckConfig& g) {
    j = J{{"pairs", g.pairs}, {"eps", g.eps}, {"tolerance", g.tolerance}};
}
template <typename J>
void from_json(const J& j, GradCheckConfig& g) {
    g.pairs = j.at("pairs").template get<int>();
    g.eps = j.at("eps").template get<double>();
    g.tolerance = j.at("tolerance").template get<double>();
}

template <typename J>
void to_json(J& j, const RunConfig& c) {
    j = J{{"seed", c.seed},
          {"gen", c.gen},
          {"camera", c.camera},
          {"noise", c.noise},
          {"projection", detail::projection_name(c.projection)},
          {"train", c.train},
          {"modelDim", c.modelDim},
          {"limits", c.limits},
          {"sweepCountsAsActions", c.sweepCountsAsActions},
          {"policies", c.policies},
          {"splits", c.splits},
          {"data", c.data},
          {"gradcheck", c.gradcheck},
          {"outDir", c.outDir},
          {"jobs", c.jobs}};
}
template <typename J>
void from_json(const J& j, RunConfig& c) {
    c.seed = j.at("seed").template get<std::uint64_t>();
    c.gen = j.at("gen").template get<GenParams>();
    c.camera = j.at("camera").template get<CameraIntrinsics>();
    c.noise = j.at("noise").template get<NoiseModel>();
    c.projection = detail::projection_from(j.at("projection").template get<std::string>());
    c.train = j.at("train").template get<TrainConfig>();
    c.modelDim = j.at("modelDim").template get<int>();
    c.limits = j.at("limits").template get<EpisodeLimits>();
    c.sweepCountsAsActions = j.at("sweepCountsAsActions").template get<bool>();
    c.policies = j.at("policies").template get<std::vector<std::string>>();
    c.splits = j.at("splits").template get<SplitConfig>();
    c.data = j.at("data").template get<DataConfig>();
    c.gradcheck = j.at("gradcheck").template get<GradCheckConfig>();
    c.outDir = j.at("outDir").template get<std::string>();
    c.jobs = j.at("jobs").template get<int>();
}

inline void validate(const RunConfig& c) {
    validate(c.gen);
    require_valid(c.camera);
    validate(c.noise);
    validate(c.train);
    validate(c.limits);
    if (c.noise.classCount != c.gen.classVocabSize)
        throw Error(ErrorKind::ConfigError, "noise.classCount must equal gen.classVocabSize");
    if (c.modelDim <= 0 || c.modelDim % kAttentionHeads != 0)
        throw Error(ErrorKind::ConfigError, "modelDim must be a positive multiple of the head count");
    const auto& s = c.splits;
    if (s.trainScenes < 1 || s.trainEpisodes < 1 || s.validSeenEpisodes < 0 || s.validUnseenEpisodes < 0)
        throw Error(ErrorKind::ConfigError, "split sizes out of range");
    if (c.data.maxTrainingSamples < 1 || c.data.maxHeldOutSamples < 0)
        throw Error(ErrorKind::ConfigError, "data sample caps out of range");
    if (c.gradcheck.pairs < 1 || !(c.gradcheck.eps >= 1e-6 && c.gradcheck.eps <= 1e-3) || !(c.gradcheck.tolerance > 0))
        throw Error(ErrorKind::ConfigError, "gradcheck settings out of range");
    if (c.jobs < 1) throw Error(ErrorKind::ConfigError, "jobs must be at least 1");
    if (c.outDir.empty()) throw Error(ErrorKind::ConfigError, "outDir must not be empty");
    const auto& roster = policy_roster();
    for (const auto& p : c.policies)
        if (std::find(roster.begin(), roster.end(), p) == roster.end())
            throw Error(ErrorKind::ConfigError, "unknown policy: " + p);
}

/// Hex FNV-1a of the canonical form, without outDir and jobs.
inline std::string config_digest(const RunConfig& c) {
    Json j = c;
    j.erase("outDir");
    j.erase("jobs");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

inline ModelShape model_shape(const RunConfig& c) {
    return {c.gen.classVocabSize, WordVocabulary(c.gen.classVocabSize).size(), c.modelDim};
}

inline Perception perception(const RunConfig& c, const LocalizerModel* model = nullptr) {
    return {c.camera, c.noise, c.projection, model, c.sweepCountsAsActions};
}

namespace detail {

// Every key in `patch` must already exist in `base`.
inline void check_known_keys(const nlohmann::json& base, const nlohmann::json& patch, const std::string& prefix) {
    if (!patch.is_object()) return;
    for (const auto& [key, value] : patch.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!base.is_object() || !base.contains(key)) throw Error(ErrorKind::ConfigError, "unknown config field: " + path);
        if (value.is_object()) check_known_keys(base.at(key), value, path);
    }
}

} // namespace detail

/// Sets a dotted path, e.g. "gen.gridWidth", to `value`. The value is read as
/// JSON when it parses, otherwise as a string.
inline void apply_override(nlohmann::json& j, const std::string& dotted, const std::string& value) {
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty() || !node->is_object() || !node->contains(key))
            throw Error(ErrorKind::ConfigError, "unknown config field: " + dotted);
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

/// Defaults, then the file (if any), then dotted overrides.
inline RunConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    nlohmann::json j = nlohmann::json(Json(RunConfig{}));
    if (file) {
        nlohmann::json user;
        try {
            user = nlohmann::json::parse(read_text(*file));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::ConfigError, file->string() + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorKind::ConfigError, e.what());
        }
        if (!user.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
        detail::check_known_keys(j, user, "");
        j.merge_patch(user);
    }
    for (const auto& [path, value] : overrides) apply_override(j, path, value);
    RunConfig c;
    try {
        c = j.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, e.what());
    }
    validate(c);
    return c;
}

} // namespace pano_nav
