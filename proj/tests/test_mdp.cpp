#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imoc/four_rooms.hpp"
#include "imoc/mdp.hpp"
#include "imoc/rng.hpp"

#include <set>

using namespace imoc;

TEST_CASE("transition rows of every built MDP are probability vectors") {
    auto rng = make_rng(1);
    std::vector<mdp::TabularMDP> mdps;
    mdps.push_back(mdp::build_test_mdp(mdp::TestMdpKind::chain, 5, rng));
    mdps.push_back(mdp::build_test_mdp(mdp::TestMdpKind::random, 4, rng));
    mdps.push_back(mdp::build_four_rooms(mdp::default_four_rooms()));
    for (const auto& m : mdps) {
        CHECK_NOTHROW(m.validate());
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                CHECK(m.row(s, a).sum() == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(m.row(s, a).minCoeff() >= 0.0);
            }
    }
}

TEST_CASE("chain(2) has two states with deterministic left/right moves") {
    auto rng = make_rng(2);
    auto m = mdp::build_test_mdp(mdp::TestMdpKind::chain, 2, rng);
    CHECK(m.n_states == 2);
    CHECK(m.transition(0 * 2 + 1, 1) == 1.0);  // right from 0
    CHECK(m.transition(1 * 2 + 0, 0) == 1.0);  // left from 1
    CHECK(m.transition(0 * 2 + 0, 0) == 1.0);  // left edge clamps
}

TEST_CASE("random test MDP is reproducible and normalized") {
    auto rng_a = make_rng(3);
    auto rng_b = make_rng(3);
    auto a = mdp::build_test_mdp(mdp::TestMdpKind::random, 5, rng_a);
    auto b = mdp::build_test_mdp(mdp::TestMdpKind::random, 5, rng_b);
    CHECK(a.transition == b.transition);
    auto m = mdp::build_test_mdp(mdp::TestMdpKind::random, 4, rng_a);
    for (int s = 0; s < 4; ++s)
        for (int act = 0; act < m.n_actions; ++act)
            CHECK(m.row(s, act).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS(mdp::build_test_mdp(mdp::TestMdpKind::chain, 1, rng_a));
}

TEST_CASE("steps are reproducible under equal seeds") {
    auto m = mdp::build_four_rooms(mdp::default_four_rooms());
    auto rng_a = make_rng(4);
    auto rng_b = make_rng(4);
    for (int i = 0; i < 50; ++i) {
        auto sa = mdp::step(m, rng_a, 0, i % 4);
        auto sb = mdp::step(m, rng_b, 0, i % 4);
        CHECK(sa.next_state == sb.next_state);
        CHECK(sa.reward == sb.reward);
    }
}

TEST_CASE("stepping a terminal state is a usage error") {
    mdp::GridWorld gw(mdp::default_four_rooms());
    auto rng = make_rng(5);
    int goal = gw.state_of(11, 11);
    CHECK_THROWS_AS(mdp::step(gw.mdp(), rng, goal, 0), std::invalid_argument);
}

TEST_CASE("four rooms: walls block movement, penalties and goals pay out") {
    mdp::GridWorld gw(mdp::default_four_rooms());
    const auto& m = gw.mdp();

    // moving up from the start corner hits the wall: the agent stays put
    int start = gw.start_state();
    auto rng = make_rng(6);
    mdp::FourRoomsConfig cfg = mdp::default_four_rooms();
    cfg.action_noise = 0.0;
    mdp::GridWorld det(cfg);
    auto step_up = mdp::step(det.mdp(), rng, det.start_state(), 0);
    CHECK(step_up.next_state == det.start_state());
    CHECK(step_up.reward == doctest::Approx(-0.002));

    // stepping onto a goal pays its listed reward and ends the episode
    int before_goal = det.state_of(11, 10);
    auto onto_goal = mdp::step(det.mdp(), rng, before_goal, 3);  // move right
    CHECK(onto_goal.next_state == det.state_of(11, 11));
    CHECK(onto_goal.reward == doctest::Approx(2.0));
    CHECK(onto_goal.done);

    auto near_plus_one = mdp::step(det.mdp(), rng, det.state_of(11, 2), 2);  // left into (11,1)
    CHECK(onto_goal.done);
    CHECK(near_plus_one.reward == doctest::Approx(1.0));
    CHECK(m.n_states == static_cast<int>(104));
    CHECK(start == det.start_state());
}

TEST_CASE("action noise frequency: intended move executes ~92.5% of the time") {
    mdp::FourRoomsConfig cfg = mdp::default_four_rooms();
    mdp::GridWorld gw(cfg);
    // an open cell with all four neighbours free: room centre (3,3)
    int s = gw.state_of(3, 3);
    int intended = gw.state_of(4, 3);  // down
    auto rng = make_rng(7);
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (mdp::step(gw.mdp(), rng, s, 1).next_state == intended) ++hits;
    CHECK(static_cast<double>(hits) / n == doctest::Approx(0.925).epsilon(0.011));
}

TEST_CASE("episodes truncate at the step limit") {
    mdp::FourRoomsConfig cfg = mdp::default_four_rooms();
    cfg.action_noise = 0.0;
    mdp::GridWorld gw(cfg);
    auto rng = make_rng(8);
    mdp::Episode ep(gw.mdp(), rng);
    mdp::EpisodeStep last;
    for (int t = 0; t < 100; ++t) last = ep.step(rng, 0);  // bump the wall forever
    CHECK(last.truncated);
    CHECK(!last.done);
    CHECK(ep.steps() == 100);
}

TEST_CASE("every free cell reaches every goal (BFS connectivity)") {
    mdp::GridWorld gw(mdp::default_four_rooms());
    for (const auto& g : gw.goals()) {
        auto reach = gw.reachable_from(g.row, g.col);
        for (int s = 0; s < gw.n_states(); ++s) {
            auto [r, c] = gw.cell_of(s);
            CHECK(reach[static_cast<std::size_t>(r) * gw.cols() + c]);
        }
    }
}

TEST_CASE("bad layouts are rejected with the offending cell named") {
    mdp::FourRoomsConfig cfg = mdp::default_four_rooms();
    cfg.start_row = 0;
    cfg.start_col = 0;  // a wall
    CHECK_THROWS_WITH_AS(mdp::GridWorld{cfg}, doctest::Contains("(0,0)"), mdp::ConfigError);

    mdp::FourRoomsConfig sealed = mdp::default_four_rooms();
    sealed.layout = {
        "#####",
        "#S#1#",
        "#####",
    };
    sealed.goals = {{1, 3, 1.0}};
    sealed.start_row = sealed.start_col = -1;
    CHECK_THROWS_WITH_AS(mdp::GridWorld{sealed}, doctest::Contains("unreachable"),
                         mdp::ConfigError);
}

TEST_CASE("goal relocation changes rewards only") {
    mdp::GridWorld gw(mdp::default_four_rooms());
    auto before = gw.mdp().transition;
    auto goals = gw.goals();
    std::swap(goals[0].reward, goals[2].reward);
    gw.apply_goals(goals);
    CHECK(gw.mdp().transition == before);
    CHECK(gw.mdp().arrival_reward[gw.state_of(5, 11)] == doctest::Approx(2.0));
    CHECK(gw.mdp().arrival_reward[gw.state_of(11, 11)] == doctest::Approx(1.0));
}

TEST_CASE("rotating goal schedule cycles the +2 goal") {
    auto cfg = mdp::default_four_rooms();
    auto schedule = mdp::rotating_goal_schedule(cfg, 1000, 3500);
    REQUIRE(schedule.size() == 3);
    CHECK(schedule[0].env_step == 1000);
    // after one rotation the high goal sits on the first listed cell
    CHECK(schedule[0].goals[2].reward == doctest::Approx(1.0));
    double high = 0;
    for (const auto& g : schedule[0].goals) high = std::max(high, g.reward);
    CHECK(high == doctest::Approx(2.0));
}

TEST_CASE("expected reward table matches sampled arrival rewards") {
    mdp::GridWorld gw(mdp::default_four_rooms());
    const auto& m = gw.mdp();
    int s = gw.state_of(11, 10);
    auto rng = make_rng(9);
    double mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) mean += mdp::step(m, rng, s, 3).reward;
    mean /= n;
    CHECK(mean == doctest::Approx(m.reward(s, 3)).epsilon(0.02));
}
