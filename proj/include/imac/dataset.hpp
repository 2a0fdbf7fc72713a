#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "imac/binio.hpp"
#include "imac/env.hpp"
#include "imac/rng.hpp"

namespace imac {

// Mixed-quality offline dataset: equal thirds of expert (BFS planner), medium
// (expert action with probability 0.5, uniform otherwise) and uniform-random
// behavior, collected from training levels only.

enum class PolicyTag : uint8_t { Expert = 0, Medium = 1, Random = 2 };

inline const char* policy_tag_name(PolicyTag t) {
    switch (t) {
        case PolicyTag::Expert: return "expert";
        case PolicyTag::Medium: return "medium";
        default: return "random";
    }
}

struct Transition {
    std::vector<uint8_t> obs;  // one-hot cells, {0,1}
    uint8_t action = 0;
    float reward = 0.0f;
    bool done = false;
};

struct Episode {
    uint64_t level_seed = 0;
    PolicyTag policy_tag = PolicyTag::Random;
    std::vector<Transition> transitions;

    double total_return() const {
        double s = 0.0;
        for (const auto& t : transitions) s += t.reward;
        return s;
    }
};

struct Dataset {
    static constexpr uint16_t kFormatVersion = 1;

    EnvId env_id = EnvId::GridMaze;
    uint8_t grid_size = 7;
    uint8_t channels = 4;
    uint8_t action_count = 5;
    std::vector<Episode> episodes;

    int64_t obs_dim() const {
        return static_cast<int64_t>(grid_size) * grid_size * channels;
    }
    int64_t transition_count() const {
        int64_t n = 0;
        for (const auto& e : episodes) n += static_cast<int64_t>(e.transitions.size());
        return n;
    }
    int64_t transition_count(PolicyTag tag) const {
        int64_t n = 0;
        for (const auto& e : episodes)
            if (e.policy_tag == tag) n += static_cast<int64_t>(e.transitions.size());
        return n;
    }
    double mean_return(PolicyTag tag) const {
        double s = 0.0;
        int64_t n = 0;
        for (const auto& e : episodes)
            if (e.policy_tag == tag) {
                s += e.total_return();
                ++n;
            }
        return n ? s / static_cast<double>(n) : 0.0;
    }
};

// --- collection ------------------------------------------------------------

namespace detail {

inline Episode roll_episode(const EnvSpec& spec, uint64_t level_seed, PolicyTag tag, Rng& rng) {
    Episode ep;
    ep.level_seed = level_seed;
    ep.policy_tag = tag;
    auto [state, obs] = reset(spec, level_seed);
    ExpertPolicy expert(state.level);
    while (!state.done) {
        int action;
        switch (tag) {
            case PolicyTag::Expert: action = expert.action(state); break;
            case PolicyTag::Medium:
                action = rng.bernoulli(0.5) ? expert.action(state)
                                            : static_cast<int>(rng.uniform_int(0, 4));
                break;
            default: action = static_cast<int>(rng.uniform_int(0, 4)); break;
        }
        Transition t;
        t.obs.resize(obs.values.size());
        for (size_t i = 0; i < obs.values.size(); ++i)
            t.obs[i] = obs.values[i] != 0.0 ? 1 : 0;
        t.action = static_cast<uint8_t>(action);
        StepResult r = step(spec, state, action);
        t.reward = static_cast<float>(r.reward);
        t.done = r.done;
        ep.transitions.push_back(std::move(t));
        obs = std::move(r.obs);
    }
    return ep;
}

}  // namespace detail

inline Dataset collect_dataset(const EnvSpec& spec, int64_t train_level_count,
                               int64_t total_transitions, Rng& rng) {
    spec.validate();
    if (train_level_count < 1) throw Error("collect_dataset: need at least one training level");
    if (total_transitions < 3 * spec.max_steps)
        throw Error("collect_dataset: total_transitions must be >= 3*max_steps");

    Dataset ds;
    ds.env_id = spec.env_id;
    ds.grid_size = static_cast<uint8_t>(spec.grid_size);
    ds.channels = static_cast<uint8_t>(spec.channels);
    ds.action_count = static_cast<uint8_t>(spec.action_count());

    const int64_t target = total_transitions / 3;
    const PolicyTag tags[3] = {PolicyTag::Expert, PolicyTag::Medium, PolicyTag::Random};
    for (PolicyTag tag : tags) {
        int64_t collected = 0;
        uint64_t next_level = 0;  // round-robin within each third
        while (collected < target) {
            const uint64_t seed = next_level % static_cast<uint64_t>(train_level_count);
            next_level += 1;
            Episode ep = detail::roll_episode(spec, seed, tag, rng);
            collected += static_cast<int64_t>(ep.transitions.size());
            ds.episodes.push_back(std::move(ep));
        }
    }
    return ds;
}

// --- serialization ----------------------------------------------------------
//
// Header: magic "IMAC", version u16, env_id u8, grid_size u8, channels u8,
// action_count u8, episode_count u32. Episode: level_seed u64, policy_tag u8,
// length u32, then per transition the observation packed 8 cells per byte
// (LSB first), action u8, reward f32, done u8. Everything little-endian.

inline void write_dataset(const Dataset& ds, std::ostream& os) {
    binio::write_bytes(os, "IMAC", 4);
    binio::write_le<uint16_t>(os, Dataset::kFormatVersion);
    binio::write_le<uint8_t>(os, static_cast<uint8_t>(ds.env_id));
    binio::write_le<uint8_t>(os, ds.grid_size);
    binio::write_le<uint8_t>(os, ds.channels);
    binio::write_le<uint8_t>(os, ds.action_count);
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(ds.episodes.size()));
    const size_t obs_len = static_cast<size_t>(ds.obs_dim());
    const size_t packed_len = (obs_len + 7) / 8;
    std::vector<uint8_t> packed(packed_len);
    for (const auto& ep : ds.episodes) {
        binio::write_le<uint64_t>(os, ep.level_seed);
        binio::write_le<uint8_t>(os, static_cast<uint8_t>(ep.policy_tag));
        binio::write_le<uint32_t>(os, static_cast<uint32_t>(ep.transitions.size()));
        for (const auto& t : ep.transitions) {
            if (t.obs.size() != obs_len) throw Error("write_dataset: observation length mismatch");
            std::fill(packed.begin(), packed.end(), 0);
            for (size_t i = 0; i < obs_len; ++i)
                if (t.obs[i]) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
            binio::write_bytes(os, packed.data(), packed.size());
            binio::write_le<uint8_t>(os, t.action);
            binio::write_f32(os, t.reward);
            binio::write_le<uint8_t>(os, t.done ? 1 : 0);
        }
    }
}

inline Dataset read_dataset(std::istream& is) {
    binio::expect_magic(is, "IMAC", "dataset");
    const auto version = binio::read_le<uint16_t>(is, "dataset version");
    if (version != Dataset::kFormatVersion)
        throw Error(detail::str("dataset version mismatch: ", version));
    Dataset ds;
    ds.env_id = static_cast<EnvId>(binio::read_le<uint8_t>(is, "env id"));
    ds.grid_size = binio::read_le<uint8_t>(is, "grid size");
    ds.channels = binio::read_le<uint8_t>(is, "channels");
    ds.action_count = binio::read_le<uint8_t>(is, "action count");
    const auto episode_count = binio::read_le<uint32_t>(is, "episode count");
    const size_t obs_len = static_cast<size_t>(ds.obs_dim());
    const size_t packed_len = (obs_len + 7) / 8;
    std::vector<uint8_t> packed(packed_len);
    ds.episodes.resize(episode_count);
    for (auto& ep : ds.episodes) {
        ep.level_seed = binio::read_le<uint64_t>(is, "level seed");
        ep.policy_tag = static_cast<PolicyTag>(binio::read_le<uint8_t>(is, "policy tag"));
        const auto len = binio::read_le<uint32_t>(is, "episode length");
        ep.transitions.resize(len);
        for (auto& t : ep.transitions) {
            binio::read_bytes(is, packed.data(), packed.size(), "observation");
            t.obs.assign(obs_len, 0);
            for (size_t i = 0; i < obs_len; ++i)
                t.obs[i] = (packed[i / 8] >> (i % 8)) & 1u;
            t.action = binio::read_le<uint8_t>(is, "action");
            t.reward = binio::read_f32(is, "reward");
            t.done = binio::read_le<uint8_t>(is, "done flag") != 0;
        }
    }
    is.peek();
    if (!is.eof()) throw Error("dataset: trailing bytes after declared episodes");
    return ds;
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
    auto os = binio::open_out(path);
    write_dataset(ds, os);
}

inline Dataset read_dataset(const std::string& path) {
    auto is = binio::open_in(path);
    return read_dataset(is);
}

// --- segment sampling --------------------------------------------------------

// A window of L context transitions followed by 1..H post-context transitions
// from a single episode. Windows whose context would start before the episode
// begins are left-padded by repeating the first observation with noop actions.
struct Segment {
    std::vector<Transition> steps;
    int context_len = 0;

    int64_t post_context_len() const {
        return static_cast<int64_t>(steps.size()) - context_len;
    }
};

class SegmentSampler {
public:
    SegmentSampler(const Dataset& ds, int context_len, int horizon)
        : ds_(&ds), context_len_(context_len), horizon_(horizon) {
        if (context_len < 1 || horizon < 1)
            throw Error("SegmentSampler: context and horizon must be positive");
        for (size_t i = 0; i < ds.episodes.size(); ++i)
            if (ds.episodes[i].transitions.size() >= 2) eligible_.push_back(i);
        if (eligible_.empty())
            throw Error("SegmentSampler: no episode long enough for a training segment");
    }

    Segment sample(Rng& rng) const { return sample(rng, horizon_); }

    // Same draw with a per-call horizon (1 <= h <= construction horizon).
    Segment sample(Rng& rng, int horizon) const {
        if (horizon < 1 || horizon > horizon_)
            throw Error("SegmentSampler: per-call horizon out of range");
        const Episode& ep = ds_->episodes[eligible_[rng.index(eligible_.size())]];
        const int64_t len = static_cast<int64_t>(ep.transitions.size());
        // j = index of the last context transition; always non-terminal.
        const int64_t j = rng.uniform_int(0, len - 2);
        return build(ep, j, horizon);
    }

    // Context window only (for imagination starts): the newest transition is
    // non-terminal by construction.
    Segment sample_context(Rng& rng) const {
        Segment s = sample(rng);
        s.steps.resize(static_cast<size_t>(s.context_len));
        return s;
    }

    Segment build(const Episode& ep, int64_t j) const { return build(ep, j, horizon_); }

    Segment build(const Episode& ep, int64_t j, int horizon) const {
        const int64_t len = static_cast<int64_t>(ep.transitions.size());
        if (j < 0 || j > len - 2) throw Error("SegmentSampler: bad window anchor");
        Segment seg;
        seg.context_len = context_len_;
        for (int64_t k = j - context_len_ + 1; k <= j; ++k) {
            if (k < 0) {
                Transition pad;
                pad.obs = ep.transitions[0].obs;
                pad.action = static_cast<uint8_t>(kNoop);
                pad.reward = 0.0f;
                pad.done = false;
                seg.steps.push_back(std::move(pad));
            } else {
                seg.steps.push_back(ep.transitions[static_cast<size_t>(k)]);
            }
        }
        const int64_t end = std::min(j + static_cast<int64_t>(horizon), len - 1);
        for (int64_t k = j + 1; k <= end; ++k)
            seg.steps.push_back(ep.transitions[static_cast<size_t>(k)]);
        return seg;
    }

private:
    const Dataset* ds_;
    int context_len_;
    int horizon_;
    std::vector<size_t> eligible_;
};

}  // namespace imac
