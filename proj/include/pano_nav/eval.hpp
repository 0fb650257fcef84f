#pragma once

// Metrics for the three evaluation modes and the report table.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "pano_nav/core/error.hpp"
#include "pano_nav/policy.hpp"

namespace pano_nav {

// ---------------------------------------------------------------------------
// Action-by-action

/// Macro-averaged F1 over the labels present in either sequence. A label's
/// precision or recall is 0 when undefined.
template <typename Label>
double macro_f1(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
    if (truth.size() != predicted.size()) throw Error(ErrorKind::ValidationError, "macro_f1 needs equal lengths");
    if (truth.empty()) return 1.0;
    std::map<Label, std::array<int, 3>> counts;  // true positives, predicted, actual
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++counts[predicted[i]][1];
        ++counts[truth[i]][2];
        if (truth[i] == predicted[i]) ++counts[truth[i]][0];
    }
    std::vector<double> perClass;
    for (const auto& [label, c] : counts) {
        const double precision = c[1] ? static_cast<double>(c[0]) / c[1] : 0.0;
        const double recall = c[2] ? static_cast<double>(c[0]) / c[2] : 0.0;
        perClass.push_back(precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0);
    }
    // Summing in value order keeps the result bit-identical under renaming.
    std::sort(perClass.begin(), perClass.end());
    double total = 0.0;
    for (double f : perClass) total += f;
    return total / static_cast<double>(perClass.size());
}

/// Teacher-forced action F1: the policy sees the expert's state at every
/// step and its single prediction is scored against the expert's action.
inline double action_f1(Policy& policy, const Scene& scene, const Task& task, const Trajectory& expert,
                        const Perception& perception, std::uint64_t seed) {
    WorldState state = initial_state(scene, task.startPose);
    SubgoalTracker tracker(scene, task, state);
    policy.reset(seed);
    std::vector<std::string> truth, predicted;
    for (const Action& expertAction : expert.actions) {
        const int k = tracker.index();
        const GoalDirection d = sense_direction(policy.direction_source(), scene, task, state, k, perception, seed);
        const Observation obs{scene, task, state, tracker.subgoal_start(), k, d};
        predicted.push_back(action_class(policy.act(obs)));
        truth.push_back(action_class(expertAction));
        auto [next, result] = apply_action(scene, state, expertAction);
        if (result == ActionResult::Failed) throw Error(ErrorKind::ValidationError, "expert action failed");
        state = std::move(next);
        tracker.advance(state);
    }
    return macro_f1(truth, predicted);
}

// ---------------------------------------------------------------------------
// Subgoal-by-subgoal and goal-by-goal

inline std::string subgoal_group(SubgoalKind kind, Verb verb) {
    return kind == SubgoalKind::Nav ? "Nav" : to_string(verb);
}

/// Success rate per group ("Nav", then one per verb). Groups without
/// attempts are absent.
inline std::map<std::string, double> subgoal_success_rates(const std::vector<SubgoalOutcome>& outcomes) {
    std::map<std::string, std::pair<int, int>> tally;
    for (const auto& o : outcomes) {
        auto& [ok, n] = tally[subgoal_group(o.kind, o.verb)];
        ok += o.success ? 1 : 0;
        ++n;
    }
    std::map<std::string, double> rates;
    for (const auto& [group, t] : tally) rates[group] = static_cast<double>(t.first) / t.second;
    return rates;
}

struct GoalMetrics {
    double goalSuccessRate = 0.0;
    double goalConditionRate = 0.0;

    friend bool operator==(const GoalMetrics&, const GoalMetrics&) = default;
};

inline GoalMetrics goal_metrics(const std::vector<GoalCount>& counts) {
    GoalMetrics m;
    if (counts.empty()) return m;
    for (const auto& c : counts) {
        m.goalSuccessRate += c.complete() ? 1.0 : 0.0;
        m.goalConditionRate += c.fraction();
    }
    m.goalSuccessRate /= static_cast<double>(counts.size());
    m.goalConditionRate /= static_cast<double>(counts.size());
    return m;
}

inline GoalMetrics goal_metrics(const std::vector<EpisodeOutcome>& outcomes) {
    std::vector<GoalCount> counts;
    for (const auto& o : outcomes) counts.push_back(o.goalConditions);
    return goal_metrics(counts);
}

// ---------------------------------------------------------------------------
// Report

/// Per-episode evaluation result for one policy.
struct EpisodeResult {
    double actionF1 = 0.0;
    std::vector<SubgoalOutcome> subgoals;
    GoalCount goal;
};

struct ManifestEntry {
    std::string episodeId;
    std::string split;
    std::string sceneFile, taskFile, trajectoryFile;
};

struct ReportRow {
    std::string policy;
    std::string split;
    double actionF1 = 0.0;
    std::optional<double> navSuccess;
    std::map<std::string, double> manipSuccess;  // by verb
    double goalSuccess = 0.0;
    double goalCondition = 0.0;
    int episodes = 0;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct MetricsReport {
    std::string configDigest;
    std::vector<std::uint64_t> seeds;
    std::vector<ReportRow> rows;  // sorted by (policy, split)

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

using ResultsByPolicy = std::map<std::string, std::map<std::string, EpisodeResult>>;

inline MetricsReport build_report(const std::vector<ManifestEntry>& manifest, const ResultsByPolicy& results,
                                  std::string configDigest = {}, std::vector<std::uint64_t> seeds = {}) {
    if (manifest.empty()) throw Error(ErrorKind::MissingResult, "manifest is empty");
    MetricsReport report{std::move(configDigest), std::move(seeds), {}};
    for (const auto& [policy, byEpisode] : results) {
        std::map<std::string, std::vector<const EpisodeResult*>> bySplit;
        for (const auto& e : manifest) {
            auto it = byEpisode.find(e.episodeId);
            if (it == byEpisode.end())
                throw Error(ErrorKind::MissingResult, "no " + policy + " result for episode " + e.episodeId);
            bySplit[e.split].push_back(&it->second);
        }
        for (const auto& [split, eps] : bySplit) {
            ReportRow row;
            row.policy = policy;
            row.split = split;
            row.episodes = static_cast<int>(eps.size());
            std::vector<SubgoalOutcome> subgoals;
            std::vector<GoalCount> goals;
            for (const auto* r : eps) {
                row.actionF1 += r->actionF1;
                subgoals.insert(subgoals.end(), r->subgoals.begin(), r->subgoals.end());
                goals.push_back(r->goal);
            }
            row.actionF1 /= static_cast<double>(eps.size());
            for (const auto& [group, rate] : subgoal_success_rates(subgoals)) {
                if (group == "Nav") row.navSuccess = rate;
                else row.manipSuccess[group] = rate;
            }
            const auto g = goal_metrics(goals);
            row.goalSuccess = g.goalSuccessRate;
            row.goalCondition = g.goalConditionRate;
            report.rows.push_back(std::move(row));
        }
    }
    if (report.rows.empty()) throw Error(ErrorKind::MissingResult, "no policy results");
    std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.policy, a.split) < std::tie(b.policy, b.split);
    });
    return report;
}

/// Shortest decimal that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error(ErrorKind::IoError, "number formatting failed");
    return std::string(buf, end);
}

inline double parse_number(const std::string& s) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw Error(ErrorKind::ValidationError, "bad number: " + s);
    return v;
}

inline constexpr const char* kReportCsvHeader = "policy,split,action_f1,nav_success,goal_success,goal_condition";

/// CSV rendition; an absent nav rate is an empty field.
inline std::string report_csv(const MetricsReport& r) {
    std::string out = std::string(kReportCsvHeader) + "\n";
    for (const auto& row : r.rows) {
        out += row.policy + "," + row.split + "," + format_number(row.actionF1) + "," +
               (row.navSuccess ? format_number(*row.navSuccess) : "") + "," + format_number(row.goalSuccess) + "," +
               format_number(row.goalCondition) + "\n";
    }
    return out;
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["configDigest"] = r.configDigest;
    j["seeds"] = r.seeds;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        nlohmann::ordered_json o;
        o["policy"] = row.policy;
        o["split"] = row.split;
        o["action_f1"] = row.actionF1;
        o["nav_success"] = row.navSuccess ? nlohmann::ordered_json(*row.navSuccess) : nlohmann::ordered_json(nullptr);
        o["goal_success"] = row.goalSuccess;
        o["goal_condition"] = row.goalCondition;
        o["manip_success"] = nlohmann::ordered_json::object();
        for (const auto& [verb, rate] : row.manipSuccess) o["manip_success"][verb] = rate;
        o["episodes"] = row.episodes;
        j["rows"].push_back(std::move(o));
    }
    return j;
}

inline MetricsReport parse_report_json(const nlohmann::json& j) {
    try {
        MetricsReport r;
        r.configDigest = j.at("configDigest").get<std::string>();
        r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        for (const auto& o : j.at("rows")) {
            ReportRow row;
            row.policy = o.at("policy").get<std::string>();
            row.split = o.at("split").get<std::string>();
            row.actionF1 = o.at("action_f1").get<double>();
            if (!o.at("nav_success").is_null()) row.navSuccess = o.at("nav_success").get<double>();
            row.goalSuccess = o.at("goal_success").get<double>();
            row.goalCondition = o.at("goal_condition").get<double>();
            row.manipSuccess = o.at("manip_success").get<std::map<std::string, double>>();
            row.episodes = o.at("episodes").get<int>();
            r.rows.push_back(std::move(row));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ValidationError, std::string("malformed report: ") + e.what());
    }
}

/// The six CSV columns of every row; what both renditions have in common.
struct ReportTableRow {
    std::string policy, split;
    double actionF1 = 0.0;
    std::optional<double> navSuccess;
    double goalSuccess = 0.0, goalCondition = 0.0;

    friend bool operator==(const ReportTableRow&, const ReportTableRow&) = default;
};

inline std::vector<ReportTableRow> report_table(const MetricsReport& r) {
    std::vector<ReportTableRow> t;
    for (const auto& row : r.rows)
        t.push_back({row.policy, row.split, row.actionF1, row.navSuccess, row.goalSuccess, row.goalCondition});
    return t;
}

inline std::vector<ReportTableRow> parse_report_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != kReportCsvHeader)
        throw Error(ErrorKind::ValidationError, "report.csv header mismatch");
    std::vector<ReportTableRow> t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 6) throw Error(ErrorKind::ValidationError, "report.csv row needs 6 fields: " + line);
        ReportTableRow row{f[0], f[1], parse_number(f[2]), std::nullopt, parse_number(f[4]), parse_number(f[5])};
        if (!f[3].empty()) row.navSuccess = parse_number(f[3]);
        t.push_back(std::move(row));
    }
    return t;
}

} // namespace pano_nav
