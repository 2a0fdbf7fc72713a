#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "imac/rng.hpp"
#include "imac/tensor.hpp"

namespace imac {

// Seeded toy POMDP suite. Two families:
//   GridMaze - perfect maze carved by randomized DFS, goal at the BFS-farthest
//              cell from the start corner.
//   LavaRun  - open room traversed left to right with scattered hazard cells.
// Layouts are pure functions of (env_id, seed). Reward is sparse: 1.0 on
// reaching the goal, otherwise 0.0; stepping on a hazard or running out the
// step budget ends the episode with reward 0.0.

enum class EnvId : uint8_t { GridMaze = 0, LavaRun = 1 };

inline const char* env_id_name(EnvId id) {
    return id == EnvId::GridMaze ? "grid_maze" : "lava_run";
}
inline EnvId env_id_from_name(const std::string& s) {
    if (s == "grid_maze") return EnvId::GridMaze;
    if (s == "lava_run") return EnvId::LavaRun;
    throw Error("unknown env id: " + s);
}

struct EnvSpec {
    EnvId env_id = EnvId::GridMaze;
    int grid_size = 7;
    int max_steps = 64;
    int channels = 4;  // one-hot planes: wall, agent, goal, hazard

    int action_count() const { return 5; }  // up, down, left, right, noop
    int64_t obs_dim() const { return static_cast<int64_t>(grid_size) * grid_size * channels; }

    void validate() const {
        if (grid_size < 5 || grid_size % 2 == 0)
            throw Error("EnvSpec: grid_size must be odd and >= 5");
        if (max_steps < 2 * grid_size) throw Error("EnvSpec: max_steps must be >= 2*grid_size");
        if (channels != 4) throw Error("EnvSpec: expected 4 observation channels");
    }
};

enum class Cell : uint8_t { Open = 0, Wall = 1, Hazard = 2 };

enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoop = 4 };

constexpr int kActionDr[5] = {-1, 1, 0, 0, 0};
constexpr int kActionDc[5] = {0, 0, -1, 1, 0};

struct Level {
    EnvId env_id = EnvId::GridMaze;
    uint64_t seed = 0;
    int grid_size = 0;
    std::vector<Cell> cells;  // row-major
    int start_r = 0, start_c = 0;
    int goal_r = 0, goal_c = 0;

    Cell at(int r, int c) const { return cells[static_cast<size_t>(r * grid_size + c)]; }
    Cell& at(int r, int c) { return cells[static_cast<size_t>(r * grid_size + c)]; }
    bool walkable(int r, int c) const { return at(r, c) == Cell::Open; }
    bool in_bounds(int r, int c) const {
        return r >= 0 && r < grid_size && c >= 0 && c < grid_size;
    }
};

// BFS distances from (r0,c0) through Open cells; -1 = unreachable.
inline std::vector<int> bfs_distances(const Level& level, int r0, int c0) {
    const int gs = level.grid_size;
    std::vector<int> dist(static_cast<size_t>(gs) * gs, -1);
    std::deque<std::pair<int, int>> q;
    dist[static_cast<size_t>(r0 * gs + c0)] = 0;
    q.emplace_back(r0, c0);
    while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop_front();
        const int d = dist[static_cast<size_t>(r * gs + c)];
        for (int a = 0; a < 4; ++a) {
            const int nr = r + kActionDr[a], nc = c + kActionDc[a];
            if (!level.in_bounds(nr, nc) || !level.walkable(nr, nc)) continue;
            int& dd = dist[static_cast<size_t>(nr * gs + nc)];
            if (dd < 0) {
                dd = d + 1;
                q.emplace_back(nr, nc);
            }
        }
    }
    return dist;
}

namespace detail {

inline Level generate_grid_maze(const EnvSpec& spec, uint64_t seed) {
    const int gs = spec.grid_size;
    Level level;
    level.env_id = EnvId::GridMaze;
    level.seed = seed;
    level.grid_size = gs;
    level.cells.assign(static_cast<size_t>(gs) * gs, Cell::Wall);

    Rng rng = Rng(seed).fork("grid_maze.layout");
    const int rooms = (gs - 1) / 2;  // room lattice at odd coordinates
    std::vector<uint8_t> visited(static_cast<size_t>(rooms) * rooms, 0);
    std::vector<std::pair<int, int>> stack;
    auto open_room = [&](int i, int j) { level.at(2 * i + 1, 2 * j + 1) = Cell::Open; };

    // Carving is rooted at a seeded room (the agent start stays at the
    // corner); a fixed root collapses the 3x3 lattice to a handful of shapes.
    const int root_i = static_cast<int>(rng.index(static_cast<size_t>(rooms)));
    const int root_j = static_cast<int>(rng.index(static_cast<size_t>(rooms)));
    visited[static_cast<size_t>(root_i * rooms + root_j)] = 1;
    open_room(root_i, root_j);
    stack.emplace_back(root_i, root_j);
    while (!stack.empty()) {
        auto [i, j] = stack.back();
        int dirs[4] = {0, 1, 2, 3};
        for (int k = 3; k > 0; --k) std::swap(dirs[k], dirs[rng.index(static_cast<size_t>(k + 1))]);
        bool advanced = false;
        for (int d : dirs) {
            const int ni = i + kActionDr[d], nj = j + kActionDc[d];
            if (ni < 0 || ni >= rooms || nj < 0 || nj >= rooms) continue;
            if (visited[static_cast<size_t>(ni * rooms + nj)]) continue;
            visited[static_cast<size_t>(ni * rooms + nj)] = 1;
            open_room(ni, nj);
            level.at(i + ni + 1, j + nj + 1) = Cell::Open;  // wall between the rooms
            stack.emplace_back(ni, nj);
            advanced = true;
            break;
        }
        if (!advanced) stack.pop_back();
    }

    level.start_r = 1;
    level.start_c = 1;
    const auto dist = bfs_distances(level, 1, 1);
    int best = -1;
    std::vector<std::pair<int, int>> candidates;
    for (int r = 0; r < gs; ++r)
        for (int c = 0; c < gs; ++c) {
            const int d = dist[static_cast<size_t>(r * gs + c)];
            if (d > best) {
                best = d;
                candidates.clear();
            }
            if (d == best) candidates.emplace_back(r, c);
        }
    const auto [gr, gc] = candidates[rng.index(candidates.size())];
    level.goal_r = gr;
    level.goal_c = gc;
    return level;
}

inline Level generate_lava_run(const EnvSpec& spec, uint64_t seed) {
    const int gs = spec.grid_size;
    Level level;
    level.env_id = EnvId::LavaRun;
    level.seed = seed;
    level.grid_size = gs;
    level.start_r = gs / 2;
    level.start_c = 1;
    level.goal_r = gs / 2;
    level.goal_c = gs - 2;

    Rng rng = Rng(seed).fork("lava_run.layout");
    double density = 0.2;
    for (int attempt = 1;; ++attempt) {
        level.cells.assign(static_cast<size_t>(gs) * gs, Cell::Open);
        for (int r = 0; r < gs; ++r)
            for (int c = 0; c < gs; ++c)
                if (r == 0 || c == 0 || r == gs - 1 || c == gs - 1) level.at(r, c) = Cell::Wall;
        if (density >= 1e-4) {
            for (int r = 1; r < gs - 1; ++r)
                for (int c = 1; c < gs - 1; ++c) {
                    if (r == level.start_r && c == level.start_c) continue;
                    if (r == level.goal_r && c == level.goal_c) continue;
                    if (rng.bernoulli(density)) level.at(r, c) = Cell::Hazard;
                }
        }
        const auto dist = bfs_distances(level, level.start_r, level.start_c);
        if (dist[static_cast<size_t>(level.goal_r * gs + level.goal_c)] >= 0) break;
        if (attempt % 20 == 0) density *= 0.5;
    }
    return level;
}

}  // namespace detail

inline Level generate_level(const EnvSpec& spec, uint64_t seed) {
    spec.validate();
    return spec.env_id == EnvId::GridMaze ? detail::generate_grid_maze(spec, seed)
                                          : detail::generate_lava_run(spec, seed);
}

struct Observation {
    std::vector<double> values;  // one-hot planes, flattened, entries in {0,1}
};

struct EnvState {
    Level level;
    int agent_r = 0, agent_c = 0;
    int step_count = 0;
    bool done = false;
};

inline Observation make_observation(const EnvSpec& spec, const EnvState& state) {
    const int gs = spec.grid_size;
    const int plane = gs * gs;
    Observation obs;
    obs.values.assign(static_cast<size_t>(spec.obs_dim()), 0.0);
    for (int r = 0; r < gs; ++r)
        for (int c = 0; c < gs; ++c) {
            const Cell cell = state.level.at(r, c);
            const size_t idx = static_cast<size_t>(r * gs + c);
            if (cell == Cell::Wall) obs.values[idx] = 1.0;
            if (cell == Cell::Hazard) obs.values[3 * plane + idx] = 1.0;
        }
    obs.values[plane + static_cast<size_t>(state.agent_r * gs + state.agent_c)] = 1.0;
    obs.values[2 * plane + static_cast<size_t>(state.level.goal_r * gs + state.level.goal_c)] = 1.0;
    return obs;
}

inline std::pair<EnvState, Observation> reset(const EnvSpec& spec, uint64_t level_seed) {
    EnvState state;
    state.level = generate_level(spec, level_seed);
    state.agent_r = state.level.start_r;
    state.agent_c = state.level.start_c;
    return {state, make_observation(spec, state)};
}

inline std::pair<EnvState, Observation> reset(const EnvSpec& spec, Level level) {
    EnvState state;
    state.level = std::move(level);
    state.agent_r = state.level.start_r;
    state.agent_c = state.level.start_c;
    return {state, make_observation(spec, state)};
}

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
};

inline StepResult step(const EnvSpec& spec, EnvState& state, int action) {
    if (state.done) throw Error("env step: episode already done");
    if (action < 0 || action >= spec.action_count())
        throw Error(detail::str("env step: invalid action ", action));
    const int nr = state.agent_r + kActionDr[action];
    const int nc = state.agent_c + kActionDc[action];
    if (state.level.in_bounds(nr, nc) && state.level.at(nr, nc) != Cell::Wall) {
        state.agent_r = nr;
        state.agent_c = nc;
    }
    state.step_count += 1;

    StepResult out;
    if (state.agent_r == state.level.goal_r && state.agent_c == state.level.goal_c) {
        out.reward = 1.0;
        out.done = true;
    } else if (state.level.at(state.agent_r, state.agent_c) == Cell::Hazard) {
        out.reward = 0.0;
        out.done = true;
    } else if (state.step_count >= spec.max_steps) {
        out.reward = 0.0;
        out.done = true;
    }
    state.done = out.done;
    out.obs = make_observation(spec, state);
    return out;
}

// Shortest start->goal action sequence via BFS; throws if the level violates
// the solvability contract.
inline std::vector<int> solve_level(const Level& level) {
    const int gs = level.grid_size;
    const auto dist = bfs_distances(level, level.start_r, level.start_c);
    if (dist[static_cast<size_t>(level.goal_r * gs + level.goal_c)] < 0)
        throw Error("solve_level: goal unreachable");
    std::vector<int> actions;
    int r = level.goal_r, c = level.goal_c;
    while (r != level.start_r || c != level.start_c) {
        const int d = dist[static_cast<size_t>(r * gs + c)];
        for (int a = 0; a < 4; ++a) {
            const int pr = r + kActionDr[a], pc = c + kActionDc[a];
            if (!level.in_bounds(pr, pc) || !level.walkable(pr, pc)) continue;
            if (dist[static_cast<size_t>(pr * gs + pc)] == d - 1) {
                // a moves goal->start; record the reverse move
                const int rev = (a == kUp) ? kDown : (a == kDown) ? kUp : (a == kLeft) ? kRight : kLeft;
                actions.push_back(rev);
                r = pr;
                c = pc;
                break;
            }
        }
    }
    std::reverse(actions.begin(), actions.end());
    return actions;
}

// Greedy-on-BFS-distance expert usable from any reachable cell.
class ExpertPolicy {
public:
    explicit ExpertPolicy(const Level& level) : grid_size_(level.grid_size) {
        Level tmp = level;
        dist_to_goal_ = bfs_distances(tmp, level.goal_r, level.goal_c);
    }

    int action(const EnvState& state) const {
        const int r = state.agent_r, c = state.agent_c;
        const int here = dist_to_goal_[static_cast<size_t>(r * grid_size_ + c)];
        if (here <= 0) return kNoop;
        for (int a = 0; a < 4; ++a) {
            const int nr = r + kActionDr[a], nc = c + kActionDc[a];
            if (nr < 0 || nr >= grid_size_ || nc < 0 || nc >= grid_size_) continue;
            const int d = dist_to_goal_[static_cast<size_t>(nr * grid_size_ + nc)];
            if (d >= 0 && d == here - 1) return a;
        }
        return kNoop;  // off the reachable set; should not happen for live states
    }

private:
    int grid_size_;
    std::vector<int> dist_to_goal_;
};

}  // namespace imac
