#pragma once

// Batch commands: gen, build-data, train, gradcheck, eval, report.
//
// Layout under the output directory:
//   manifest.json, scenes/, tasks/, trajectories/
//   data/train.jsonl, data/heldout.jsonl
//   model.json, training.json, gradcheck.json
//   report.json, report.csv, logs/<policy>.jsonl, comparison.{csv,json}
//
// Every artifact carries the config digest, and readers reject artifacts
// whose digest differs from the running config's.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pano_nav/config.hpp"
#include "pano_nav/eval.hpp"
#include "pano_nav/io.hpp"
#include "pano_nav/localizer/gradcheck.hpp"
#include "pano_nav/localizer/train.hpp"
#include "pano_nav/policy.hpp"
#include "pano_nav/scenegen.hpp"

namespace pano_nav {

/// Runs fn(0..n-1) on up to `jobs` threads. Callers write results by index,
/// so the outcome never depends on scheduling. The first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failureMutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeSpec {
    std::string episodeId;
    std::string split;
    std::uint64_t sceneSeed = 0;
    std::uint64_t taskSeed = 0;
    std::uint64_t episodeSeed = 0;
};

struct Episode {
    EpisodeSpec spec;
    Scene scene;
    Task task;
    Trajectory expert;
};

inline const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names{"train", "valid_seen", "valid_unseen"};
    return names;
}

namespace detail {

inline constexpr int kSeedAttempts = 16;

inline std::optional<Scene> try_scene(GenParams params, std::uint64_t seed) {
    params.seed = seed;
    try {
        return generate_scene(params);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::GenerationFailed) throw;
        return std::nullopt;
    }
}

inline std::optional<Task> try_task(const Scene& scene, std::uint64_t seed) {
    try {
        return generate_task(scene, seed);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::InfeasibleTask) throw;
        return std::nullopt;
    }
}

// `count` scenes with seeds drawn from `base`, skipping failures and any seed
// in `exclude`.
inline std::vector<Scene> scene_pool(const GenParams& params, std::uint64_t base, int count,
                                     const std::set<std::uint64_t>& exclude) {
    std::vector<Scene> pool;
    for (std::uint64_t i = 0; static_cast<int>(pool.size()) < count; ++i) {
        if (i >= static_cast<std::uint64_t>(count) * kSeedAttempts)
            throw Error(ErrorKind::GenerationFailed, "could not generate enough scenes");
        const std::uint64_t seed = hash_combine(base, i);
        if (exclude.count(seed)) continue;
        if (auto s = try_scene(params, seed)) pool.push_back(std::move(*s));
    }
    return pool;
}

inline std::string episode_id(const std::string& split, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%04d", split.c_str(), i);
    return buf;
}

// Episode `i` of a split over a scene pool; scenes rotate on retries.
inline Episode make_episode(const std::string& split, int i, const std::vector<Scene>& pool, std::uint64_t base,
                            std::uint64_t runSeed, const std::set<std::uint64_t>& excludeTasks) {
    for (int attempt = 0; attempt < kSeedAttempts; ++attempt) {
        const Scene& scene = pool[(static_cast<std::size_t>(i) + static_cast<std::size_t>(attempt)) % pool.size()];
        const std::uint64_t taskSeed = hash_combine(hash_combine(base, static_cast<std::uint64_t>(i)),
                                                    static_cast<std::uint64_t>(attempt));
        if (excludeTasks.count(taskSeed)) continue;
        auto task = try_task(scene, taskSeed);
        if (!task) continue;
        Episode ep;
        ep.spec = {episode_id(split, i), split, scene.sceneSeed, taskSeed, 0};
        ep.spec.episodeSeed = hash_combine(runSeed, fnv1a64(ep.spec.episodeId));
        ep.scene = scene;
        ep.task = std::move(*task);
        ep.expert = plan_expert(ep.scene, ep.task);
        return ep;
    }
    throw Error(ErrorKind::InfeasibleTask, "no feasible task for " + episode_id(split, i));
}

} // namespace detail

/// Every episode of the three splits. valid_seen draws fresh tasks on the
/// training scenes; valid_unseen uses scenes whose seeds never appear in
/// training.
inline std::vector<Episode> generate_episodes(const RunConfig& cfg) {
    const auto& sp = cfg.splits;
    const std::uint64_t trainBase = hash_combine(cfg.seed, sp.trainSeed);
    const std::uint64_t seenBase = hash_combine(cfg.seed, sp.validSeenSeed);
    const std::uint64_t unseenBase = hash_combine(cfg.seed, sp.validUnseenSeed);

    const auto trainScenes = detail::scene_pool(cfg.gen, trainBase, sp.trainScenes, {});
    std::set<std::uint64_t> trainSceneSeeds;
    for (const auto& s : trainScenes) trainSceneSeeds.insert(s.sceneSeed);

    std::vector<Episode> out;
    std::set<std::uint64_t> trainTaskSeeds;
    for (int i = 0; i < sp.trainEpisodes; ++i) {
        out.push_back(detail::make_episode("train", i, trainScenes, hash_combine(trainBase, 1), cfg.seed, {}));
        trainTaskSeeds.insert(out.back().spec.taskSeed);
    }
    for (int i = 0; i < sp.validSeenEpisodes; ++i)
        out.push_back(detail::make_episode("valid_seen", i, trainScenes, seenBase, cfg.seed, trainTaskSeeds));
    if (sp.validUnseenEpisodes > 0) {
        const auto unseenScenes = detail::scene_pool(cfg.gen, unseenBase, sp.validUnseenEpisodes, trainSceneSeeds);
        for (int i = 0; i < sp.validUnseenEpisodes; ++i)
            out.push_back(
                detail::make_episode("valid_unseen", i, unseenScenes, hash_combine(unseenBase, 1), cfg.seed, {}));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Paths

struct OutputPaths {
    std::filesystem::path root;

    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path trainData() const { return root / "data" / "train.jsonl"; }
    std::filesystem::path heldOutData() const { return root / "data" / "heldout.jsonl"; }
    std::filesystem::path model() const { return root / "model.json"; }
    std::filesystem::path training() const { return root / "training.json"; }
    std::filesystem::path gradcheck() const { return root / "gradcheck.json"; }
    std::filesystem::path reportJson() const { return root / "report.json"; }
    std::filesystem::path reportCsv() const { return root / "report.csv"; }
    std::filesystem::path log(const std::string& policy) const { return root / "logs" / (policy + ".jsonl"); }
    std::filesystem::path comparisonCsv() const { return root / "comparison.csv"; }
    std::filesystem::path comparisonJson() const { return root / "comparison.json"; }
};

inline OutputPaths output_paths(const RunConfig& cfg) { return {cfg.outDir}; }

// ---------------------------------------------------------------------------
// gen

struct GenSummary {
    int episodes = 0;
    int scenes = 0;
    std::map<std::string, int> perSplit;
};

inline GenSummary cmd_gen(const RunConfig& cfg) {
    validate(cfg);
    const auto paths = output_paths(cfg);
    const std::string digest = config_digest(cfg);
    const auto episodes = generate_episodes(cfg);

    GenSummary summary;
    std::set<std::uint64_t> written;
    Json list = Json::array();
    for (const auto& ep : episodes) {
        char sceneName[40];
        std::snprintf(sceneName, sizeof sceneName, "scenes/%016llx.json",
                      static_cast<unsigned long long>(ep.spec.sceneSeed));
        const std::string taskName = "tasks/" + ep.spec.episodeId + ".json";
        const std::string trajName = "trajectories/" + ep.spec.episodeId + ".json";
        if (written.insert(ep.spec.sceneSeed).second) write_json(paths.root / sceneName, scene_document(ep.scene, digest));
        write_json(paths.root / taskName, task_document(ep.task, digest));
        write_json(paths.root / trajName, trajectory_document(ep.expert, digest));
        list.push_back(Json{{"episodeId", ep.spec.episodeId},
                            {"split", ep.spec.split},
                            {"sceneFile", sceneName},
                            {"taskFile", taskName},
                            {"trajectoryFile", trajName},
                            {"sceneSeed", ep.spec.sceneSeed},
                            {"taskSeed", ep.spec.taskSeed},
                            {"episodeSeed", ep.spec.episodeSeed}});
        ++summary.perSplit[ep.spec.split];
    }
    write_json(paths.manifest(), document(kManifestSchema, digest, "episodes", std::move(list)));
    summary.episodes = static_cast<int>(episodes.size());
    summary.scenes = static_cast<int>(written.size());
    return summary;
}

inline std::vector<ManifestEntry> read_manifest(const RunConfig& cfg) {
    const auto paths = output_paths(cfg);
    const auto j = read_json(paths.manifest());
    check_document(j, kManifestSchema, config_digest(cfg), "manifest");
    std::vector<ManifestEntry> entries;
    for (const auto& e : j.at("episodes"))
        entries.push_back({e.at("episodeId").get<std::string>(), e.at("split").get<std::string>(),
                           e.at("sceneFile").get<std::string>(), e.at("taskFile").get<std::string>(),
                           e.at("trajectoryFile").get<std::string>()});
    return entries;
}

/// Episodes of the listed splits, in manifest order, loaded from disk.
inline std::vector<Episode> load_episodes(const RunConfig& cfg, const std::set<std::string>& splits) {
    const auto paths = output_paths(cfg);
    const std::string digest = config_digest(cfg);
    const auto j = read_json(paths.manifest());
    check_document(j, kManifestSchema, digest, "manifest");
    std::map<std::string, Scene> scenes;
    std::vector<Episode> out;
    for (const auto& e : j.at("episodes")) {
        const auto split = e.at("split").get<std::string>();
        if (!splits.count(split)) continue;
        Episode ep;
        ep.spec = {e.at("episodeId").get<std::string>(), split, e.at("sceneSeed").get<std::uint64_t>(),
                   e.at("taskSeed").get<std::uint64_t>(), e.at("episodeSeed").get<std::uint64_t>()};
        const auto sceneFile = e.at("sceneFile").get<std::string>();
        if (!scenes.count(sceneFile))
            scenes[sceneFile] = from_document<Scene>(read_json(paths.root / sceneFile), kSceneSchema, "scene", digest,
                                                     sceneFile);
        ep.scene = scenes[sceneFile];
        const auto taskFile = e.at("taskFile").get<std::string>();
        ep.task = from_document<Task>(read_json(paths.root / taskFile), kSceneSchema, "task", digest, taskFile);
        const auto trajFile = e.at("trajectoryFile").get<std::string>();
        ep.expert = from_document<Trajectory>(read_json(paths.root / trajFile), kTrajectorySchema, "trajectory",
                                              digest, trajFile);
        out.push_back(std::move(ep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// build-data

/// One record per expert timestep spent navigating outside the goal region.
inline std::vector<LocalizerRecord> localizer_records(const Episode& ep, const Perception& perception) {
    std::vector<LocalizerRecord> out;
    WorldState state = initial_state(ep.scene, ep.task.startPose);
    SubgoalTracker tracker(ep.scene, ep.task, state);
    for (const Action& a : ep.expert.actions) {
        const int k = tracker.index();
        if (k < static_cast<int>(ep.task.subgoals.size())) {
            const Subgoal& sg = ep.task.subgoals[static_cast<std::size_t>(k)];
            if (sg.kind == SubgoalKind::Nav && !in_goal_region(state.pose, sg.goalPoses)) {
                auto [cur, next] = instruction_pair(ep.task, k);
                out.push_back({sense(ep.scene, state, perception, ep.spec.episodeSeed), state.pose.pitch, cur, next,
                               goal_direction(state.pose, sg.goalPoses)});
            }
        }
        state = apply_action(ep.scene, state, a).first;
        tracker.advance(state);
    }
    return out;
}

namespace detail {

inline std::vector<LocalizerRecord> collect_records(const std::vector<Episode>& eps, const Perception& perception,
                                                    int cap, std::uint64_t shuffleSeed) {
    std::vector<LocalizerRecord> all;
    for (const auto& ep : eps) {
        auto r = localizer_records(ep, perception);
        all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    Rng rng(shuffleSeed);
    rng.shuffle(all);
    if (static_cast<int>(all.size()) > cap) all.resize(static_cast<std::size_t>(cap));
    return all;
}

inline void write_records(const std::filesystem::path& path, const std::vector<LocalizerRecord>& records,
                          const std::string& digest) {
    std::vector<Json> lines;
    lines.reserve(records.size());
    for (const auto& r : records) lines.emplace_back(r);
    write_jsonl(path, jsonl_header(kDataSchema, digest), lines);
}

} // namespace detail

struct DataSummary {
    int trainSamples = 0;
    int heldOutSamples = 0;
};

/// Training samples from the train split, held-out samples from valid_unseen.
inline DataSummary cmd_build_data(const RunConfig& cfg) {
    validate(cfg);
    const auto paths = output_paths(cfg);
    const std::string digest = config_digest(cfg);
    const Perception perception = pano_nav::perception(cfg);
    const auto train = detail::collect_records(load_episodes(cfg, {"train"}), perception, cfg.data.maxTrainingSamples,
                                               hash_combine(cfg.seed, 0xDA7AULL));
    const auto held = detail::collect_records(load_episodes(cfg, {"valid_unseen"}), perception,
                                              cfg.data.maxHeldOutSamples, hash_combine(cfg.seed, 0x4E1DULL));
    if (train.empty()) throw Error(ErrorKind::ValidationError, "no training samples: the train split has no navigation");
    detail::write_records(paths.trainData(), train, digest);
    detail::write_records(paths.heldOutData(), held, digest);
    return {static_cast<int>(train.size()), static_cast<int>(held.size())};
}

inline std::vector<TrainingSample> read_samples(const std::filesystem::path& path, const RunConfig& cfg) {
    std::vector<TrainingSample> out;
    for (const auto& j : read_jsonl(path, kDataSchema, config_digest(cfg)))
        out.push_back(to_sample(j.get<LocalizerRecord>(), cfg.camera));
    return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainSummary {
    std::vector<double> lossCurve;
    double trainMae = 0.0;
    std::optional<double> heldOutMae;
};

inline TrainSummary cmd_train(const RunConfig& cfg) {
    validate(cfg);
    const auto paths = output_paths(cfg);
    const std::string digest = config_digest(cfg);
    const auto data = read_samples(paths.trainData(), cfg);
    const auto result = train(data, model_shape(cfg), cfg.train);

    TrainSummary summary;
    summary.lossCurve = result.lossCurve;
    summary.trainMae = mean_angular_error(result.model, data);
    if (std::filesystem::exists(paths.heldOutData())) {
        const auto held = read_samples(paths.heldOutData(), cfg);
        if (!held.empty()) summary.heldOutMae = mean_angular_error(result.model, held);
    }
    write_json(paths.model(), model_document(result.model, digest));
    Json t;
    t["schema"] = "pano_nav_training_v1";
    t["configDigest"] = digest;
    t["samples"] = data.size();
    t["lossCurve"] = summary.lossCurve;
    t["trainMeanAngularError"] = summary.trainMae;
    t["heldOutMeanAngularError"] = summary.heldOutMae ? Json(*summary.heldOutMae) : Json(nullptr);
    write_json(paths.training(), t);
    return summary;
}

inline LocalizerModel load_model(const RunConfig& cfg) {
    const auto m = model_from_document(read_json(output_paths(cfg).model()), config_digest(cfg));
    if (m.shape != model_shape(cfg)) throw Error(ErrorKind::ValidationError, "checkpoint shape does not match config");
    return m;
}

// ---------------------------------------------------------------------------
// gradcheck

/// Random (model, sample) pair `i`: a fresh initialization and one sensed
/// navigation step from a freshly generated episode.
inline std::pair<LocalizerModel, TrainingSample> gradcheck_pair(const RunConfig& cfg, int i) {
    const std::uint64_t base = hash_combine(hash_combine(cfg.seed, 0x6C4ECULL), static_cast<std::uint64_t>(i));
    for (int attempt = 0; attempt < detail::kSeedAttempts; ++attempt) {
        const std::uint64_t seed = hash_combine(base, static_cast<std::uint64_t>(attempt));
        auto scene = detail::try_scene(cfg.gen, seed);
        if (!scene) continue;
        auto task = detail::try_task(*scene, seed);
        if (!task) continue;
        Episode ep{{"gradcheck", "gradcheck", scene->sceneSeed, seed, seed}, *scene, *task, {}};
        ep.expert = plan_expert(ep.scene, ep.task);
        const auto records = localizer_records(ep, perception(cfg));
        if (records.empty()) continue;
        Rng rng(seed);
        const auto& r = records[rng.below(records.size())];
        return {init_model(model_shape(cfg), seed, cfg.train.initScale), to_sample(r, cfg.camera)};
    }
    throw Error(ErrorKind::GenerationFailed, "could not build a gradcheck sample");
}

struct GradCheckSummary {
    std::vector<double> errors;
    double maxError = 0.0;
    bool passed = false;
};

inline GradCheckSummary run_gradcheck(const RunConfig& cfg, int pairs) {
    GradCheckSummary s;
    s.errors.assign(static_cast<std::size_t>(pairs), 0.0);
    parallel_for(s.errors.size(), cfg.jobs, [&](std::size_t i) {
        const auto [model, sample] = gradcheck_pair(cfg, static_cast<int>(i));
        s.errors[i] = grad_check(model, sample, cfg.gradcheck.eps);
    });
    for (double e : s.errors) s.maxError = std::max(s.maxError, e);
    s.passed = s.maxError < cfg.gradcheck.tolerance;
    return s;
}

inline GradCheckSummary cmd_gradcheck(const RunConfig& cfg) {
    validate(cfg);
    auto s = run_gradcheck(cfg, cfg.gradcheck.pairs);
    Json j;
    j["schema"] = "pano_nav_gradcheck_v1";
    j["configDigest"] = config_digest(cfg);
    j["eps"] = cfg.gradcheck.eps;
    j["tolerance"] = cfg.gradcheck.tolerance;
    j["maxRelativeError"] = s.maxError;
    j["errors"] = s.errors;
    j["passed"] = s.passed;
    write_json(output_paths(cfg).gradcheck(), j);
    return s;
}

// ---------------------------------------------------------------------------
// eval

/// Everything one policy produces on one episode.
struct PolicyEpisodeRun {
    EpisodeResult result;
    EpisodeOutcome outcome;
};

inline PolicyEpisodeRun evaluate_episode(const std::string& policyName, const Episode& ep,
                                         const Perception& perception, const EpisodeLimits& limits) {
    PolicyEpisodeRun run;
    const std::uint64_t seed = ep.spec.episodeSeed;
    run.result.actionF1 = action_f1(*make_policy(policyName, &ep.expert), ep.scene, ep.task, ep.expert, perception, seed);
    for (int k = 0; k < static_cast<int>(ep.task.subgoals.size()); ++k) {
        auto policy = make_policy(policyName, &ep.expert);
        run.result.subgoals.push_back(run_subgoal(ep.scene, ep.task, ep.expert, k, *policy, perception, limits, seed));
    }
    auto policy = make_policy(policyName, &ep.expert);
    run.outcome = run_episode(ep.scene, ep.task, *policy, perception, limits, seed);
    run.result.goal = run.outcome.goalConditions;
    return run;
}

inline MetricsReport cmd_eval(const RunConfig& cfg) {
    validate(cfg);
    const auto paths = output_paths(cfg);
    const std::string digest = config_digest(cfg);
    const auto episodes = load_episodes(cfg, {"valid_seen", "valid_unseen"});
    std::vector<ManifestEntry> manifest;
    for (const auto& ep : episodes) manifest.push_back({ep.spec.episodeId, ep.spec.split, {}, {}, {}});

    std::optional<LocalizerModel> model;
    if (std::find(cfg.policies.begin(), cfg.policies.end(), "localizer") != cfg.policies.end()) model = load_model(cfg);
    const Perception perception = pano_nav::perception(cfg, model ? &*model : nullptr);

    const std::size_t nEp = episodes.size();
    std::vector<PolicyEpisodeRun> runs(cfg.policies.size() * nEp);
    parallel_for(runs.size(), cfg.jobs, [&](std::size_t i) {
        runs[i] = evaluate_episode(cfg.policies[i / nEp], episodes[i % nEp], perception, cfg.limits);
    });

    ResultsByPolicy results;
    for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
        std::vector<Json> lines;
        for (std::size_t e = 0; e < nEp; ++e) {
            const auto& run = runs[p * nEp + e];
            results[cfg.policies[p]][episodes[e].spec.episodeId] = run.result;
            for (const auto& step : run.outcome.steps) {
                Json line{{"episodeId", episodes[e].spec.episodeId}};
                const Json fields = step;
                for (const auto& [k, v] : fields.items()) line[k] = v;
                lines.push_back(std::move(line));
            }
            Json summary{{"episodeId", episodes[e].spec.episodeId},
                         {"stopReason", to_string(run.outcome.stopReason)},
                         {"goalConditions", Json::array({run.outcome.goalConditions.satisfied,
                                                         run.outcome.goalConditions.total})},
                         {"perSubgoalSuccess", run.outcome.perSubgoalSuccess},
                         {"actionF1", run.result.actionF1}};
            lines.push_back(std::move(summary));
        }
        write_jsonl(paths.log(cfg.policies[p]), jsonl_header(kStepLogSchema, digest), lines);
    }

    std::vector<std::uint64_t> seeds{cfg.seed, cfg.splits.trainSeed, cfg.splits.validSeenSeed,
                                     cfg.splits.validUnseenSeed, cfg.noise.seed, cfg.train.seed};
    auto report = build_report(manifest, results, digest, seeds);
    Json doc = report_json(report);
    doc["schema"] = kReportSchema;
    write_json(paths.reportJson(), doc);
    write_text(paths.reportCsv(), report_csv(report));
    return report;
}

inline MetricsReport read_report(const std::filesystem::path& path) {
    const auto j = read_json(path);
    check_document(j, kReportSchema, {}, path.string());
    return parse_report_json(j);
}

// ---------------------------------------------------------------------------
// report

/// Merges reports into one table, tagged by config digest.
inline std::vector<MetricsReport> cmd_report(const RunConfig& cfg, std::vector<std::filesystem::path> reports) {
    validate(cfg);
    const auto paths = output_paths(cfg);
    if (reports.empty()) reports.push_back(paths.reportJson());
    std::vector<MetricsReport> loaded;
    for (const auto& p : reports) loaded.push_back(read_report(p));

    std::string csv = std::string("config_digest,") + kReportCsvHeader + "\n";
    Json merged = Json::array();
    for (const auto& r : loaded) {
        const std::string body = report_csv(r);
        std::size_t pos = body.find('\n') + 1;
        while (pos < body.size()) {
            const std::size_t end = body.find('\n', pos);
            csv += r.configDigest + "," + body.substr(pos, end - pos) + "\n";
            pos = end + 1;
        }
        merged.push_back(report_json(r));
    }
    write_text(paths.comparisonCsv(), csv);
    write_json(paths.comparisonJson(), Json{{"schema", "pano_nav_comparison_v1"}, {"reports", merged}});
    return loaded;
}

} // namespace pano_nav
