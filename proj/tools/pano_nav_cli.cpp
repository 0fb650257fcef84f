// pano_nav command line: gen, build-data, train, gradcheck, eval, report.
//
// Exit codes: 0 ok, 2 bad config, 3 failed validation, 1 anything else.
// Failures are written to stderr as one JSON object.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pano_nav/pipeline.hpp"

namespace {

using namespace pano_nav;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--set", c.sets, "Override a config field, e.g. --set gen.gridWidth=10");
}

RunConfig resolve(const Common& c) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::ConfigError, "--set expects key=value: " + s);
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) overrides.emplace_back("seed", std::to_string(*c.seed));
    if (c.jobs) overrides.emplace_back("jobs", std::to_string(*c.jobs));
    if (c.out) overrides.emplace_back("outDir", nlohmann::json(*c.out).dump());
    return load_config(c.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(c.config), overrides);
}

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::ConfigError: return 2;
    case ErrorKind::ValidationError:
    case ErrorKind::MissingResult:
    case ErrorKind::NonFiniteOutput:
    case ErrorKind::DivergedTraining: return 3;
    default: return 1;
    }
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
    return code;
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Panoramic goal-direction navigation toolkit"};
    app.require_subcommand(1);

    Common common;
    auto* gen = app.add_subcommand("gen", "Generate scenes, tasks and expert trajectories");
    auto* data = app.add_subcommand("build-data", "Collect localizer training and held-out samples");
    auto* trainCmd = app.add_subcommand("train", "Train the goal-direction localizer");
    auto* grad = app.add_subcommand("gradcheck", "Compare analytic and numerical gradients");
    auto* evalCmd = app.add_subcommand("eval", "Evaluate every policy on the validation splits");
    auto* report = app.add_subcommand("report", "Merge report.json files into a comparison table");
    for (auto* sub : {gen, data, trainCmd, grad, evalCmd, report}) add_common(sub, common);
    std::vector<std::string> reportFiles;
    report->add_option("reports", reportFiles, "report.json files (default: <out>/report.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("ConfigError", e.what(), 2);
    }

    try {
        const RunConfig cfg = resolve(common);
        const std::string digest = config_digest(cfg);
        if (gen->parsed()) {
            const auto s = cmd_gen(cfg);
            print(Json{{"configDigest", digest}, {"episodes", s.episodes}, {"scenes", s.scenes}, {"perSplit", s.perSplit}});
        } else if (data->parsed()) {
            const auto s = cmd_build_data(cfg);
            print(Json{{"configDigest", digest}, {"trainSamples", s.trainSamples}, {"heldOutSamples", s.heldOutSamples}});
        } else if (trainCmd->parsed()) {
            const auto s = cmd_train(cfg);
            print(Json{{"configDigest", digest},
                       {"finalLoss", s.lossCurve.empty() ? Json(nullptr) : Json(s.lossCurve.back())},
                       {"trainMeanAngularError", s.trainMae},
                       {"heldOutMeanAngularError", s.heldOutMae ? Json(*s.heldOutMae) : Json(nullptr)}});
        } else if (grad->parsed()) {
            const auto s = cmd_gradcheck(cfg);
            print(Json{{"configDigest", digest}, {"maxRelativeError", s.maxError}, {"passed", s.passed}});
            if (!s.passed) return fail("ValidationError", "gradient check exceeded tolerance", 3);
        } else if (evalCmd->parsed()) {
            std::cout << report_csv(cmd_eval(cfg));
        } else if (report->parsed()) {
            std::vector<std::filesystem::path> paths(reportFiles.begin(), reportFiles.end());
            cmd_report(cfg, paths);
            std::cout << read_text(output_paths(cfg).comparisonCsv());
        }
        return 0;
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what(), exit_code(e.kind()));
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), 1);
    }
}
