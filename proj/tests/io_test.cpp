#include <gtest/gtest.h>

#include <functional>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "pano_nav/config.hpp"
#include "pano_nav/pipeline.hpp"

using namespace pano_nav;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("pano_nav_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::IoError;
}

RunConfig tiny(const fs::path& out) {
    return load_config(std::nullopt, {{"seed", "3"},
                                      {"splits.trainScenes", "3"},
                                      {"splits.trainEpisodes", "4"},
                                      {"splits.validSeenEpisodes", "2"},
                                      {"splits.validUnseenEpisodes", "2"},
                                      {"outDir", out.string()}});
}

} // namespace

TEST(Config, DefaultsAreValid) {
    const auto c = load_config(std::nullopt);
    EXPECT_EQ(c, RunConfig{});
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, OverridesParseAsJsonOrString) {
    const auto c = load_config(std::nullopt, {{"gen.gridWidth", "12"}, {"outDir", "somewhere"}, {"noise.missRate", "0.25"}});
    EXPECT_EQ(c.gen.gridWidth, 12);
    EXPECT_EQ(c.outDir, "somewhere");
    EXPECT_DOUBLE_EQ(c.noise.missRate, 0.25);
}

TEST(Config, UnknownOrInvalidFieldsAreConfigErrors) {
    EXPECT_EQ(kind_of([] { load_config(std::nullopt, {{"gen.nope", "1"}}); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([] { load_config(std::nullopt, {{"gen.gridWidth", "\"wide\""}}); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([] { load_config(std::nullopt, {{"jobs", "0"}}); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([] { load_config(std::nullopt, {{"policies", "[\"teleport\"]"}}); }), ErrorKind::ConfigError);

    const auto dir = scratch("config");
    write_text(dir / "bad.json", R"({"gen": {"gridWidht": 5}})");
    EXPECT_EQ(kind_of([&] { load_config(dir / "bad.json"); }), ErrorKind::ConfigError);
    write_text(dir / "broken.json", "{");
    EXPECT_EQ(kind_of([&] { load_config(dir / "broken.json"); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([&] { load_config(dir / "absent.json"); }), ErrorKind::ConfigError);
    write_text(dir / "ok.json", R"({"seed": 11, "gen": {"gridHeight": 9}})");
    const auto c = load_config(dir / "ok.json", {{"seed", "12"}});
    EXPECT_EQ(c.seed, 12u);
    EXPECT_EQ(c.gen.gridHeight, 9);
}

TEST(Config, DigestIgnoresOutputLocationAndThreads) {
    RunConfig a, b;
    b.outDir = "elsewhere";
    b.jobs = 8;
    EXPECT_EQ(config_digest(a), config_digest(b));
    b.seed = 1;
    EXPECT_NE(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
}

TEST(Io, DocumentsRoundTrip) {
    const auto g = fixtures::generated(21);
    const std::string digest = "0123456789abcdef";
    auto through_text = [](const Json& j) { return nlohmann::json::parse(j.dump()); };
    EXPECT_EQ(from_document<Scene>(through_text(scene_document(g.scene, digest)), kSceneSchema, "scene", digest, "s"),
              g.scene);
    EXPECT_EQ(from_document<Task>(through_text(task_document(g.task, digest)), kSceneSchema, "task", digest, "t"), g.task);
    EXPECT_EQ(from_document<Trajectory>(through_text(trajectory_document(g.expert, digest)), kTrajectorySchema,
                                        "trajectory", digest, "x"),
              g.expert);
    const auto m = init_model({32, WordVocabulary(32).size(), 8}, 4, 0.1);
    EXPECT_EQ(model_from_document(through_text(model_document(m, digest)), digest), m);
}

TEST(Io, DigestAndSchemaMismatchesRejected) {
    const auto g = fixtures::generated(21);
    const auto j = nlohmann::json::parse(scene_document(g.scene, "aaaa").dump());
    EXPECT_EQ(kind_of([&] { from_document<Scene>(j, kSceneSchema, "scene", "bbbb", "s"); }), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of([&] { from_document<Trajectory>(j, kTrajectorySchema, "trajectory", "", "s"); }),
              ErrorKind::ValidationError);
    // An empty expected digest skips the check.
    EXPECT_EQ(from_document<Scene>(j, kSceneSchema, "scene", "", "s"), g.scene);
}

TEST(Io, JsonlNeedsItsHeader) {
    const auto dir = scratch("jsonl");
    write_text(dir / "empty.jsonl", "");
    EXPECT_EQ(kind_of([&] { read_jsonl(dir / "empty.jsonl", kSweepSchema, ""); }), ErrorKind::ValidationError);
    std::vector<BoundingBox2D> boxes{{0, 0.5, 0.5, 0.1, 0.2, 3, 4}, {7, 0.25, 0.75, 0.3, 0.05, 9, 1}};
    write_sweep(dir / "sweep.jsonl", boxes, "d1");
    EXPECT_EQ(read_sweep(dir / "sweep.jsonl", "d1"), boxes);
    EXPECT_EQ(kind_of([&] { read_sweep(dir / "sweep.jsonl", "d2"); }), ErrorKind::ValidationError);
}

TEST(Pipeline, ParallelForIsOrderIndependent) {
    std::vector<int> one(257), four(257);
    parallel_for(one.size(), 1, [&](std::size_t i) { one[i] = static_cast<int>(i * i % 97); });
    parallel_for(four.size(), 4, [&](std::size_t i) { four[i] = static_cast<int>(i * i % 97); });
    EXPECT_EQ(one, four);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 6) throw Error(ErrorKind::IoError, "boom");
                 }),
                 Error);
}

TEST(Pipeline, SplitsAreSizedAndSeparated) {
    const auto cfg = tiny(scratch("splits"));
    const auto eps = generate_episodes(cfg);
    std::map<std::string, int> count;
    std::set<std::uint64_t> trainScenes, seenScenes, unseenScenes;
    for (const auto& e : eps) {
        ++count[e.spec.split];
        auto& bucket = e.spec.split == "train" ? trainScenes : e.spec.split == "valid_seen" ? seenScenes : unseenScenes;
        bucket.insert(e.spec.sceneSeed);
    }
    EXPECT_EQ(count["train"], 4);
    EXPECT_EQ(count["valid_seen"], 2);
    EXPECT_EQ(count["valid_unseen"], 2);
    for (auto s : seenScenes) EXPECT_TRUE(trainScenes.count(s));
    for (auto s : unseenScenes) EXPECT_FALSE(trainScenes.count(s));

    auto again = cfg;
    again.jobs = 3;
    const auto eps2 = generate_episodes(again);
    ASSERT_EQ(eps.size(), eps2.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        EXPECT_EQ(eps[i].task, eps2[i].task);
        EXPECT_EQ(eps[i].expert, eps2[i].expert);
    }
}

TEST(Pipeline, GenWritesWhatLoadReads) {
    const auto dir = scratch("gen");
    const auto cfg = tiny(dir);
    const auto summary = cmd_gen(cfg);
    EXPECT_EQ(summary.episodes, 8);
    const auto loaded = load_episodes(cfg, {"train", "valid_seen", "valid_unseen"});
    const auto fresh = generate_episodes(cfg);
    ASSERT_EQ(loaded.size(), fresh.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].spec.episodeId, fresh[i].spec.episodeId);
        EXPECT_EQ(loaded[i].scene, fresh[i].scene);
        EXPECT_EQ(loaded[i].task, fresh[i].task);
        EXPECT_EQ(loaded[i].expert, fresh[i].expert);
    }
    EXPECT_EQ(read_manifest(cfg).size(), 8u);

    // Same directory, different config: every artifact is stale.
    auto other = cfg;
    other.seed = 4;
    EXPECT_EQ(kind_of([&] { read_manifest(other); }), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of([&] { load_model(cfg); }), ErrorKind::IoError);
}

TEST(Pipeline, EvalWithoutGenIsAnError) {
    const auto cfg = tiny(scratch("nogen"));
    EXPECT_THROW(cmd_eval(cfg), Error);
}
