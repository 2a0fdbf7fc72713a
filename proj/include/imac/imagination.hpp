#pragma once

#include <cstdint>
#include <vector>

#include "imac/agent.hpp"
#include "imac/dataset.hpp"
#include "imac/reward_term.hpp"
#include "imac/rng.hpp"
#include "imac/world_model.hpp"

namespace imac {

struct HorizonPolicy {
    enum class Mode { Fixed, Random };
    Mode mode = Mode::Fixed;
    int fixed_h = 15;
    int h_min = 5;
    int h_max = 22;

    void validate() const {
        if (fixed_h < 1) throw Error("HorizonPolicy: fixed_h must be >= 1");
        if (h_min < 1 || h_min > h_max) throw Error("HorizonPolicy: need 1 <= h_min <= h_max");
    }
};

inline int sample_horizon(const HorizonPolicy& policy, Rng& rng) {
    policy.validate();
    if (policy.mode == HorizonPolicy::Mode::Fixed) return policy.fixed_h;
    return static_cast<int>(rng.uniform_int(policy.h_min, policy.h_max));
}

enum class RewardDecode { Argmax, Expected };

// Plane structure of grid observations; lets re-binarization restore the
// one-hot invariants (exactly one agent cell, exactly one goal cell) instead
// of thresholding blindly.
struct ObsLayout {
    int grid_size = 0;
    int channels = 0;
    bool valid() const { return grid_size > 0 && channels > 0; }
};

struct ImaginationConfig {
    NoiseSchedule schedule{};
    double gamma = 0.985;
    RewardDecode reward_decode = RewardDecode::Argmax;
    bool rebinarize = true;  // project sampled frames back onto {-1, +1}
    ObsLayout layout{};      // enables one-hot plane projection when set
    double sampler_churn = 0.0;
};

// Snap a sampled frame back onto the binary observation manifold. Without a
// layout this is a plain sign threshold; with one, the agent and goal planes
// keep exactly their argmax cell (a drifting frame must not lose the agent).
inline void rebinarize_frame(std::vector<double>& x, const ObsLayout& layout) {
    if (!layout.valid()) {
        for (auto& v : x) v = v > 0.0 ? 1.0 : -1.0;
        return;
    }
    const size_t plane = static_cast<size_t>(layout.grid_size) * layout.grid_size;
    for (int ch = 0; ch < layout.channels; ++ch) {
        double* p = x.data() + static_cast<size_t>(ch) * plane;
        if (ch == 1 || ch == 2) {  // agent, goal: one-hot planes
            size_t best = 0;
            for (size_t i = 1; i < plane; ++i)
                if (p[i] > p[best]) best = i;
            for (size_t i = 0; i < plane; ++i) p[i] = i == best ? 1.0 : -1.0;
        } else {
            for (size_t i = 0; i < plane; ++i) p[i] = p[i] > 0.0 ? 1.0 : -1.0;
        }
    }
}

inline double decode_reward(const RtPrediction& pred, RewardDecode mode) {
    if (mode == RewardDecode::Expected) return pred.reward_probs[1];
    return pred.reward_probs[1] > pred.reward_probs[0] ? 1.0 : 0.0;
}

// L-frame context whose newest frame is non-terminal, drawn uniformly from
// the offline dataset. Observations arrive normalized.
inline ConditioningBuffer initial_context_from_dataset(const SegmentSampler& sampler, Rng& rng) {
    return ConditioningBuffer::from_segment(sampler.sample_context(rng));
}

// Roll the policy through the frozen world model for up to `horizon` steps,
// stopping at the first predicted termination. Recurrent states are burned in
// on the stored context; the newest context frame is the rollout's x_0 and is
// consumed by the loop itself, so burn-in covers the L-1 older frames.
inline ImaginedTrajectory imagine(const DenoiserModel& wm, const RTModel& rt,
                                  const ActorCritic& actor, const ConditioningBuffer& ctx,
                                  int horizon, const ImaginationConfig& cfg, Rng& rng) {
    if (!wm.frozen || !rt.frozen) throw Error("imagine: world and reward models must be frozen");
    if (!ctx.full()) throw Error("imagine: conditioning buffer not full");
    if (horizon < 1) throw Error("imagine: horizon must be >= 1");

    ImaginedTrajectory traj;
    traj.context = ctx;

    const size_t burn = ctx.obs.size() - 1;
    RecurrentState rt_state = rt_burn_in(rt, ctx, burn);
    std::vector<std::vector<double>> ctx_obs(ctx.obs.begin(), ctx.obs.begin() + static_cast<long>(burn));
    AgentState actor_state = actor_burn_in(actor, ctx_obs);

    ConditioningBuffer window = ctx;
    std::vector<double> x = ctx.newest_obs();
    traj.obs.push_back(x);

    for (int i = 0; i < horizon; ++i) {
        ActResult a = act(actor, x, actor_state, rng);
        actor_state = a.next_state;

        RtPrediction pred = rt_step(rt, x, a.action, rt_state);
        rt_state = pred.next_state;
        const double reward = decode_reward(pred, cfg.reward_decode);
        const bool done = pred.done_probs[1] > 0.5;

        std::vector<double> x_next =
            sample_next_obs(wm, cfg.schedule, window, a.action, rng, cfg.sampler_churn);
        if (cfg.rebinarize) rebinarize_frame(x_next, cfg.layout);
        window.advance(x_next, a.action);

        traj.actions.push_back(a.action);
        traj.log_probs.push_back(a.log_prob);
        traj.values.push_back(a.value);
        traj.rewards.push_back(reward);
        traj.dones.push_back(done ? 1 : 0);
        traj.obs.push_back(x_next);
        x = std::move(x_next);

        if (done) break;
    }

    auto [v_last, ignored] = value_of(actor, x, actor_state);
    traj.values.push_back(v_last);
    traj.deltas = td_errors(traj.rewards, traj.values, traj.dones, cfg.gamma);
    return traj;
}

}  // namespace imac
