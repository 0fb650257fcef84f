#include <gtest/gtest.h>

#include <deque>
#include <set>

#include "fixtures.hpp"

using namespace pano_nav;

namespace {

// Independent flood fill over the eight-neighbourhood.
std::set<Cell> flood(const Scene& s, Cell start) {
    std::set<Cell> seen{start};
    std::deque<Cell> q{start};
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                const Cell n{c.x + dx, c.y + dy};
                if (n.x < 0 || n.y < 0 || n.x >= s.gridWidth || n.y >= s.gridHeight) continue;
                if (std::find(s.obstacles.begin(), s.obstacles.end(), n) != s.obstacles.end()) continue;
                if (seen.insert(n).second) q.push_back(n);
            }
    }
    return seen;
}

std::vector<std::string> words_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

} // namespace

TEST(SceneGen, SameSeedSameScene) {
    GenParams p;
    p.gridWidth = 8;
    p.gridHeight = 8;
    p.obstacleDensity = 0.0;
    p.objectCount = 3;
    p.seed = 7;
    EXPECT_EQ(generate_scene(p), generate_scene(p));
    p.seed = 8;
    GenParams q = p;
    q.seed = 7;
    EXPECT_NE(generate_scene(p), generate_scene(q));
}

TEST(SceneGen, DenseSmallGridFails) {
    GenParams p;
    p.gridWidth = 4;
    p.gridHeight = 4;
    p.obstacleDensity = 0.9;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        p.seed = seed;
        try {
            generate_scene(p);
            FAIL() << "expected GenerationFailed";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::GenerationFailed);
        }
    }
}

TEST(SceneGen, BadParamsAreConfigErrors) {
    GenParams p;
    p.obstacleDensity = 1.0;
    EXPECT_THROW(generate_scene(p), Error);
    p = {};
    p.objectCount = 2;
    EXPECT_THROW(generate_scene(p), Error);
    p = {};
    p.gridWidth = 1;
    EXPECT_THROW(generate_scene(p), Error);
}

TEST(SceneGenProperty, FreeCellsFormOneRegion) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GenParams p;
        p.obstacleDensity = 0.2;
        p.seed = seed;
        Scene s;
        try {
            s = generate_scene(p);
        } catch (const Error&) {
            continue;
        }
        const auto cells = free_cells(s);
        ASSERT_FALSE(cells.empty());
        const auto reached = flood(s, cells.front());
        EXPECT_EQ(reached.size(), cells.size()) << "seed " << seed;
        for (Cell c : cells) EXPECT_EQ(flood(s, c).size(), cells.size());
    }
}

TEST(SceneGenProperty, ObjectsRestOnReceptacles) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto g = fixtures::generated(seed);
        for (const auto& o : g.scene.objects) {
            EXPECT_TRUE(is_free(g.scene, cell_of(g.scene, o.center)));
            if (!o.state.placedOn) continue;
            const auto& base = object_by_id(g.scene, *o.state.placedOn);
            EXPECT_TRUE(base.isReceptacle);
            EXPECT_NEAR(o.center.z - o.extent.z, base.center.z + base.extent.z, 1e-12);
        }
    }
}

TEST(TaskGen, SubgoalsAlternateStartingWithNav) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto g = fixtures::generated(seed);
        ASSERT_FALSE(g.task.subgoals.empty());
        ASSERT_EQ(g.task.subgoals.size(), g.task.stepInstructions.size());
        for (std::size_t i = 0; i < g.task.subgoals.size(); ++i) {
            EXPECT_EQ(g.task.subgoals[i].kind, i % 2 == 0 ? SubgoalKind::Nav : SubgoalKind::Manip);
            EXPECT_EQ(g.task.subgoals[i].index, static_cast<int>(i));
        }
    }
}

TEST(TaskGen, InstructionPairsFollowTheTemplate) {
    const ClassVocabulary classes;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto g = fixtures::generated(seed);
        for (std::size_t i = 0; i + 1 < g.task.stepInstructions.size(); i += 2) {
            const auto nav = words_of(g.task.stepInstructions[i].surface);
            const auto manip = words_of(g.task.stepInstructions[i + 1].surface);
            ASSERT_GE(nav.size(), 4u);
            EXPECT_EQ(nav[0], "walk");
            EXPECT_EQ(nav[1], "to");
            EXPECT_EQ(nav[2], "the");
            EXPECT_TRUE(classes.find(nav[3]).has_value()) << nav[3];
            const auto verb = g.task.subgoals[i + 1].verb;
            EXPECT_EQ(manip[0], verb == Verb::PickUp ? "pick" : "put");
            // The manipulation line names the target class.
            const auto& target = object_by_id(g.scene, g.task.subgoals[i + 1].targetObjectId).cls.name;
            EXPECT_NE(std::find(manip.begin(), manip.end(), target), manip.end());
        }
    }
}

TEST(TaskGen, TokensRenderBackToTheSurface) {
    const auto g = fixtures::generated(3);
    const WordVocabulary words(g.scene.classVocabSize);
    for (const auto& instr : g.task.stepInstructions) EXPECT_EQ(words.render(instr.tokens), instr.surface);
}

TEST(TaskGen, GoalsStartUnsatisfiedAndExpertCompletesThem) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto g = fixtures::generated(seed);
        WorldState st = initial_state(g.scene, g.task.startPose);
        const auto total = static_cast<int>(g.task.goalConditions.size());
        EXPECT_EQ(check_goal_conditions(g.scene, st, g.task), (GoalCount{0, total}));
        int failures = 0;
        for (const auto& a : g.expert.actions) {
            auto [next, r] = apply_action(g.scene, st, a);
            failures += r == ActionResult::Failed;
            st = next;
        }
        EXPECT_EQ(failures, 0) << "seed " << seed;
        EXPECT_EQ(check_goal_conditions(g.scene, st, g.task), (GoalCount{total, total}));
        EXPECT_EQ(g.expert.actions.back(), Action::stop());
        EXPECT_EQ(g.expert.poses.size(), g.expert.actions.size() + 1);
    }
}

// Two counters in view from the start: the first navigation instruction has
// to say which one. Counter A at x=1 lies left of the agent at x=3 facing +y;
// both tops are about 32 degrees below the eye, inside the vertical view.
TEST(TaskGen, DuplicateClassGetsASideWord) {
    using fixtures::floor_object;
    using fixtures::object_on;
    Scene s = fixtures::open_scene(7, 10);
    const auto left = floor_object(s, 0, "counter", {1, 6}, true, false);
    const auto right = floor_object(s, 1, "counter", {5, 6}, true, false);
    s.objects = {left, right, floor_object(s, 2, "table", {3, 9}, true, false),
                 object_on(left, 3, "bowl", {0.05, 0.05, 0.04}, true), object_on(right, 4, "knife", {0.03, 0.03, 0.03}, false)};
    const Task t = make_stack_task(s, 3, 4, 2, {{3, 0}, 0, 0}, 1);
    EXPECT_EQ(t.stepInstructions[0].surface, "walk to the counter on the left");
    EXPECT_EQ(t.stepInstructions[1].surface, "pick up the bowl");
}

TEST(TaskGen, SingleClassInstanceHasNoSideWord) {
    const Scene s = fixtures::kitchen();
    const Task t = make_stack_task(s, 2, 1, 3, {{4, 0}, 0, 0}, 1);
    EXPECT_EQ(t.stepInstructions[0].surface, "walk to the counter");
    EXPECT_EQ(t.stepInstructions[1].surface, "pick up the bowl");
    EXPECT_EQ(t.stepInstructions[3].surface, "put the bowl on the table");
}

TEST(Planner, StartInsideGoalRegionNeedsOnlyTurns) {
    const Scene s = fixtures::kitchen();
    const auto goals = reach_poses(s, 1, s.objects[1].center);
    const auto inside = goals.front();
    const auto exact = plan_nav_segment(s, inside, goals);
    ASSERT_TRUE(exact);
    EXPECT_TRUE(exact->empty());
    AgentPose turned = inside;
    turned.heading = (turned.heading + 4) % 8;
    const auto seg = plan_nav_segment(s, turned, goals);
    ASSERT_TRUE(seg);
    for (const auto& a : *seg) EXPECT_NE(a.kind, ActionKind::MoveAhead);
}

// One-wide corridor of 7 cells with a counter at the far end. Only the cell
// just before it reaches the counter top, five moves from the start.
TEST(Planner, CorridorTakesFiveMoves) {
    Scene s = fixtures::open_scene(1, 7);
    s.objects = {fixtures::floor_object(s, 0, "counter", {0, 6}, true, false)};
    const auto goals = reach_poses(s, 0, s.objects[0].center);
    ASSERT_EQ(goal_cells(goals), (std::vector<Cell>{{0, 5}}));
    const auto seg = plan_nav_segment(s, {{0, 0}, 0, 0}, goals);
    ASSERT_TRUE(seg);
    std::size_t moves = 0, lastMove = 0;
    for (std::size_t i = 0; i < seg->size(); ++i)
        if ((*seg)[i].kind == ActionKind::MoveAhead) {
            ++moves;
            lastMove = i;
        }
    EXPECT_EQ(moves, 5u);
    EXPECT_EQ(lastMove, 4u);
}

TEST(Planner, ExpertBoundariesMatchSubgoals) {
    const auto g = fixtures::generated(11);
    ASSERT_EQ(g.expert.subgoalBoundaries.size(), g.task.subgoals.size());
    for (std::size_t i = 1; i < g.expert.subgoalBoundaries.size(); ++i)
        EXPECT_LE(g.expert.subgoalBoundaries[i - 1].startTimestep, g.expert.subgoalBoundaries[i].startTimestep);
}

TEST(GoalDirection, HandCases) {
    const std::vector<AgentPose> ahead{{{0, 3}, 0, 0}};
    EXPECT_DOUBLE_EQ(goal_direction({{0, 0}, 0, 0}, ahead), 0.0);
    const std::vector<AgentPose> behind{{{0, 0}, 0, 0}};
    EXPECT_DOUBLE_EQ(goal_direction({{0, 3}, 0, 0}, behind), 180.0);
    const std::vector<AgentPose> diagonal{{{1, 1}, 0, 0}};
    EXPECT_NEAR(goal_direction({{0, 0}, 0, 0}, diagonal), 45.0, 1e-12);
    // Same goal, agent facing east: the goal is 45 degrees to the left.
    EXPECT_NEAR(goal_direction({{0, 0}, 2, 0}, diagonal), -45.0, 1e-12);
    // Inside the region the direction is straight ahead.
    EXPECT_DOUBLE_EQ(goal_direction({{1, 1}, 5, 0}, diagonal), 0.0);
}
