#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "imac/env.hpp"
#include "imac/rng.hpp"

using namespace imac;

namespace {
EnvSpec maze_spec() {
    EnvSpec s;
    s.env_id = EnvId::GridMaze;
    return s;
}
EnvSpec lava_spec() {
    EnvSpec s;
    s.env_id = EnvId::LavaRun;
    return s;
}
}  // namespace

TEST_CASE("level generation is deterministic in (env, seed)") {
    for (auto spec : {maze_spec(), lava_spec()}) {
        const Level a = generate_level(spec, 17);
        const Level b = generate_level(spec, 17);
        REQUIRE(a.cells == b.cells);
        REQUIRE(a.start_r == b.start_r);
        REQUIRE(a.goal_r == b.goal_r);
        REQUIRE(a.goal_c == b.goal_c);
    }
}

TEST_CASE("different seeds give different layouts") {
    int distinct = 0;
    for (auto spec : {maze_spec(), lava_spec()}) {
        const Level a = generate_level(spec, 0);
        const Level b = generate_level(spec, 1);
        if (a.cells != b.cells || a.goal_r != b.goal_r || a.goal_c != b.goal_c) ++distinct;
    }
    REQUIRE(distinct == 2);
}

TEST_CASE("every generated level is solvable (seeds 0..999)") {
    for (auto spec : {maze_spec(), lava_spec()}) {
        for (uint64_t seed = 0; seed < 1000; ++seed) {
            const Level level = generate_level(spec, seed);
            const auto dist = bfs_distances(level, level.start_r, level.start_c);
            REQUIRE(dist[static_cast<size_t>(level.goal_r * level.grid_size + level.goal_c)] > 0);
        }
    }
}

TEST_CASE("observation shape and one-hot structure") {
    const EnvSpec spec = maze_spec();
    auto [state, obs] = reset(spec, 3);
    REQUIRE(obs.values.size() == 196);  // 7*7*4
    int agent_bits = 0;
    for (int i = 0; i < 49; ++i) agent_bits += obs.values[static_cast<size_t>(49 + i)] != 0.0;
    REQUIRE(agent_bits == 1);
    for (double v : obs.values) REQUIRE((v == 0.0 || v == 1.0));
}

TEST_CASE("reset twice produces identical observations") {
    const EnvSpec spec = lava_spec();
    auto [s1, o1] = reset(spec, 12);
    auto [s2, o2] = reset(spec, 12);
    REQUIRE(o1.values == o2.values);
}

TEST_CASE("moving into a wall leaves the position unchanged") {
    const EnvSpec spec = maze_spec();
    auto [state, obs] = reset(spec, 0);
    // start is (1,1); (0,1) is the border wall
    const StepResult r = step(spec, state, kUp);
    REQUIRE(state.agent_r == 1);
    REQUIRE(state.agent_c == 1);
    REQUIRE(r.reward == 0.0);
    REQUIRE_FALSE(r.done);
}

TEST_CASE("stepping onto the goal terminates with reward 1") {
    const EnvSpec spec = maze_spec();
    const Level level = generate_level(spec, 5);
    auto [state, obs] = reset(spec, level);
    const auto plan = solve_level(level);
    double total = 0.0;
    for (int a : plan) {
        REQUIRE_FALSE(state.done);
        total += step(spec, state, a).reward;
    }
    REQUIRE(state.done);
    REQUIRE(total == 1.0);
}

TEST_CASE("noop-only episode times out with return 0") {
    const EnvSpec spec = maze_spec();
    auto [state, obs] = reset(spec, 9);
    double total = 0.0;
    for (int i = 0; i < spec.max_steps; ++i) total += step(spec, state, kNoop).reward;
    REQUIRE(state.done);
    REQUIRE(total == 0.0);
    REQUIRE(state.step_count == spec.max_steps);
}

TEST_CASE("stepping a finished episode throws") {
    const EnvSpec spec = maze_spec();
    auto [state, obs] = reset(spec, 9);
    for (int i = 0; i < spec.max_steps; ++i) step(spec, state, kNoop);
    REQUIRE_THROWS_AS(step(spec, state, kNoop), Error);
}

TEST_CASE("solutions execute to return 1 on 100 random levels") {
    Rng rng(77);
    for (int k = 0; k < 100; ++k) {
        EnvSpec spec = rng.bernoulli(0.5) ? maze_spec() : lava_spec();
        const uint64_t seed = rng.uniform_int(0, 100000);
        const Level level = generate_level(spec, seed);
        const auto plan = solve_level(level);
        const auto dist = bfs_distances(level, level.start_r, level.start_c);
        REQUIRE(static_cast<int>(plan.size()) ==
                dist[static_cast<size_t>(level.goal_r * level.grid_size + level.goal_c)]);
        auto [state, obs] = reset(spec, level);
        double total = 0.0;
        for (int a : plan) total += step(spec, state, a).reward;
        REQUIRE(total == 1.0);
        REQUIRE(state.done);
    }
}

TEST_CASE("lava hazards terminate the episode without reward") {
    const EnvSpec spec = lava_spec();
    // find a level with a hazard adjacent to a reachable open cell
    for (uint64_t seed = 0; seed < 200; ++seed) {
        Level level = generate_level(spec, seed);
        bool exercised = false;
        const auto dist = bfs_distances(level, level.start_r, level.start_c);
        for (int r = 1; r < level.grid_size - 1 && !exercised; ++r)
            for (int c = 1; c < level.grid_size - 1 && !exercised; ++c) {
                if (level.at(r, c) != Cell::Hazard) continue;
                for (int a = 0; a < 4; ++a) {
                    const int pr = r + kActionDr[a], pc = c + kActionDc[a];
                    if (!level.in_bounds(pr, pc) || !level.walkable(pr, pc)) continue;
                    if (dist[static_cast<size_t>(pr * level.grid_size + pc)] < 0) continue;
                    // walk to (pr,pc) via BFS plan on a copy, then step into the hazard
                    auto [state, obs] = reset(spec, level);
                    state.agent_r = pr;
                    state.agent_c = pc;
                    const int back = (a == kUp) ? kDown : (a == kDown) ? kUp
                                     : (a == kLeft) ? kRight : kLeft;
                    const StepResult res = step(spec, state, back);
                    REQUIRE(res.done);
                    REQUIRE(res.reward == 0.0);
                    exercised = true;
                    break;
                }
            }
        if (exercised) return;
    }
    FAIL("no hazard field found in 200 seeds");
}

TEST_CASE("expert policy reaches the goal from the start") {
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        EnvSpec spec = k % 2 ? maze_spec() : lava_spec();
        const Level level = generate_level(spec, rng.uniform_int(0, 999));
        auto [state, obs] = reset(spec, level);
        ExpertPolicy expert(level);
        double total = 0.0;
        while (!state.done) total += step(spec, state, expert.action(state)).reward;
        REQUIRE(total == 1.0);
    }
}

TEST_CASE("spec validation rejects bad grids") {
    EnvSpec spec = maze_spec();
    spec.grid_size = 6;
    REQUIRE_THROWS_AS(spec.validate(), Error);
    spec.grid_size = 3;
    REQUIRE_THROWS_AS(spec.validate(), Error);
    spec = maze_spec();
    spec.max_steps = 5;
    REQUIRE_THROWS_AS(spec.validate(), Error);
}
