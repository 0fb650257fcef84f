#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "pano_nav/eval.hpp"

using namespace pano_nav;

namespace {

using Seq = std::vector<std::string>;

SubgoalOutcome nav(bool ok) { return {0, SubgoalKind::Nav, Verb::PickUp, ok, std::nullopt, 1}; }
SubgoalOutcome manip(Verb v, bool ok) { return {1, SubgoalKind::Manip, v, ok, std::nullopt, 1}; }

std::vector<ManifestEntry> two_splits() {
    return {{"a", "valid_seen", "", "", ""},
            {"b", "valid_seen", "", "", ""},
            {"c", "valid_unseen", "", "", ""}};
}

ResultsByPolicy fake_results() {
    ResultsByPolicy r;
    r["oracle"]["a"] = {0.5, {nav(true), manip(Verb::PickUp, true)}, {2, 2}};
    r["oracle"]["b"] = {1.0, {nav(false)}, {1, 2}};
    r["oracle"]["c"] = {0.25, {manip(Verb::PutDown, false)}, {0, 3}};
    r["unguided"]["a"] = {0.1, {nav(false)}, {0, 2}};
    r["unguided"]["b"] = {0.2, {nav(true)}, {2, 2}};
    r["unguided"]["c"] = {1.0 / 3.0, {nav(true), nav(false), nav(false)}, {1, 3}};
    return r;
}

} // namespace

TEST(MacroF1, IdenticalSequencesScoreOne) {
    const Seq s{"MoveAhead", "RotateLeft45", "PickUp", "Stop"};
    EXPECT_DOUBLE_EQ(macro_f1(s, s), 1.0);
}

// Truth has three classes besides Stop; only Stop overlaps. Stop: P=1/5,
// R=1, F1=1/3. The others score 0, so the macro mean is 1/9.
TEST(MacroF1, AlwaysStopOnFiveSteps) {
    const Seq truth{"MoveAhead", "MoveAhead", "RotateRight45", "MoveAhead", "Stop"};
    const Seq pred(5, "Stop");
    EXPECT_NEAR(macro_f1(truth, pred), 1.0 / 9.0, 1e-15);
}

// Steps 4 and 6 swap RotateLeft and RotateRight. Each rotation class ends
// up with one hit out of two predicted and two actual, so F1 = 1/2.
// MoveAhead and Stop are perfect: (1 + 1/2 + 1/2 + 1) / 4.
TEST(MacroF1, TwoSwappedPredictionsOnTenSteps) {
    const Seq truth{"MoveAhead", "MoveAhead", "MoveAhead", "MoveAhead", "RotateLeft45",
                    "RotateLeft45", "RotateRight45", "RotateRight45", "MoveAhead", "Stop"};
    Seq pred = truth;
    pred[4] = "RotateRight45";
    pred[6] = "RotateLeft45";
    EXPECT_DOUBLE_EQ(macro_f1(truth, pred), 0.75);
}

TEST(MacroF1, LengthMismatchRejected) { EXPECT_THROW(macro_f1(Seq{"a"}, Seq{}), Error); }

TEST(MacroF1Property, InvariantUnderRelabeling) {
    std::mt19937_64 gen(5);
    const Seq classes{"MoveAhead", "RotateLeft45", "RotateRight45", "LookUp15", "LookDown15", "PickUp", "PutDown", "Stop"};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        Seq truth, pred;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back(classes[gen() % classes.size()]);
            pred.push_back(gen() % 3 ? truth.back() : classes[gen() % classes.size()]);
        }
        std::vector<int> perm(classes.size());
        std::iota(perm.begin(), perm.end(), 100);
        std::shuffle(perm.begin(), perm.end(), gen);
        auto relabel = [&](const Seq& s) {
            std::vector<int> out;
            for (const auto& c : s)
                out.push_back(perm[static_cast<std::size_t>(std::find(classes.begin(), classes.end(), c) - classes.begin())]);
            return out;
        };
        EXPECT_EQ(macro_f1(truth, pred), macro_f1(relabel(truth), relabel(pred)));
    }
}

TEST(ActionF1, ExpertScoresOneAndStopScoresLow) {
    const auto g = fixtures::generated(12);
    Perception p;
    p.noise = NoiseModel::zero();
    ExpertReplayPolicy expert(g.expert);
    EXPECT_DOUBLE_EQ(action_f1(expert, g.scene, g.task, g.expert, p, 0), 1.0);

    FunctionPolicy stop("stop", [](const Observation&) { return Action::stop(); });
    Seq truth;
    for (const auto& a : g.expert.actions) truth.push_back(action_class(a));
    const double expected = macro_f1(truth, Seq(truth.size(), "Stop"));
    EXPECT_DOUBLE_EQ(action_f1(stop, g.scene, g.task, g.expert, p, 0), expected);
    EXPECT_LT(expected, 0.2);
}

TEST(SubgoalRates, Arithmetic) {
    std::vector<SubgoalOutcome> o;
    for (int i = 0; i < 10; ++i) o.push_back(nav(i < 3));
    auto r = subgoal_success_rates(o);
    EXPECT_DOUBLE_EQ(r.at("Nav"), 0.3);
    EXPECT_EQ(r.count("PickUp"), 0u);

    o = {manip(Verb::PickUp, true), manip(Verb::PickUp, true), manip(Verb::PutDown, true)};
    r = subgoal_success_rates(o);
    EXPECT_DOUBLE_EQ(r.at("PickUp"), 1.0);
    EXPECT_DOUBLE_EQ(r.at("PutDown"), 1.0);
    EXPECT_EQ(r.count("Nav"), 0u);
}

TEST(GoalMetrics, Examples) {
    EXPECT_EQ(goal_metrics(std::vector<GoalCount>{{2, 2}, {3, 3}}), (GoalMetrics{1.0, 1.0}));
    EXPECT_EQ(goal_metrics(std::vector<GoalCount>{{1, 2}}), (GoalMetrics{0.0, 0.5}));
    EXPECT_EQ(goal_metrics(std::vector<GoalCount>{{2, 2}, {1, 2}, {0, 2}, {4, 4}}), (GoalMetrics{0.5, 0.625}));
}

TEST(GoalMetricsProperty, ConditionRateBoundsSuccessRate) {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<GoalCount> c;
        const int n = 1 + static_cast<int>(gen() % 20);
        for (int i = 0; i < n; ++i) {
            const int total = 1 + static_cast<int>(gen() % 6);
            c.push_back({static_cast<int>(gen() % static_cast<unsigned>(total + 1)), total});
        }
        const auto m = goal_metrics(c);
        EXPECT_GE(m.goalConditionRate, m.goalSuccessRate);
    }
}

TEST(Report, EmptyManifestIsMissingResult) {
    try {
        build_report({}, fake_results());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingResult);
    }
}

TEST(Report, AbsentEpisodeIsMissingResult) {
    auto r = fake_results();
    r["unguided"].erase("b");
    try {
        build_report(two_splits(), r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingResult);
    }
}

TEST(Report, RowsPerPolicyAndSplit) {
    const auto rep = build_report(two_splits(), fake_results(), "abc", {1, 2});
    ASSERT_EQ(rep.rows.size(), 4u);
    EXPECT_EQ(rep.rows[0].policy, "oracle");
    EXPECT_EQ(rep.rows[0].split, "valid_seen");
    EXPECT_EQ(rep.rows[1].split, "valid_unseen");
    EXPECT_EQ(rep.rows[2].policy, "unguided");

    const auto& seen = rep.rows[0];
    EXPECT_EQ(seen.episodes, 2);
    EXPECT_DOUBLE_EQ(seen.actionF1, 0.75);
    EXPECT_DOUBLE_EQ(*seen.navSuccess, 0.5);
    EXPECT_DOUBLE_EQ(seen.manipSuccess.at("PickUp"), 1.0);
    EXPECT_DOUBLE_EQ(seen.goalSuccess, 0.5);
    EXPECT_DOUBLE_EQ(seen.goalCondition, 0.75);
    // No navigation attempts on the unseen split: the rate is absent.
    EXPECT_FALSE(rep.rows[1].navSuccess.has_value());
    EXPECT_DOUBLE_EQ(rep.rows[1].manipSuccess.at("PutDown"), 0.0);
    EXPECT_NEAR(*rep.rows[3].navSuccess, 1.0 / 3.0, 1e-15);
    for (const auto& row : rep.rows) EXPECT_GE(row.goalCondition, row.goalSuccess);
}

TEST(Report, CsvAndJsonRoundTrip) {
    const auto rep = build_report(two_splits(), fake_results(), "abc", {7, 9});
    const auto csv = report_csv(rep);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "policy,split,action_f1,nav_success,goal_success,goal_condition");
    EXPECT_EQ(parse_report_csv(csv), report_table(rep));
    const auto text = report_json(rep).dump();
    const auto back = parse_report_json(nlohmann::json::parse(text));
    EXPECT_EQ(back, rep);
    EXPECT_EQ(report_table(back), parse_report_csv(csv));
}

TEST(Report, MalformedInputsRejected) {
    EXPECT_THROW(parse_report_csv("wrong header\n"), Error);
    EXPECT_THROW(parse_report_csv(std::string(kReportCsvHeader) + "\na,b,1,2\n"), Error);
    EXPECT_THROW(parse_report_json(nlohmann::json::object()), Error);
    EXPECT_THROW(parse_number("1.5x"), Error);
}
