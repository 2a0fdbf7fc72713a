#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imac/autodiff.hpp"
#include "imac/dataset.hpp"
#include "imac/env.hpp"
#include "imac/nn.hpp"
#include "imac/optim.hpp"
#include "imac/world_model.hpp"

namespace imac {

struct AgentHyperparams {
    double gamma = 0.985;
    double lam = 0.95;
    double entropy_weight = 0.001;
    double value_coeff = 0.5;

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("AgentHyperparams: gamma in [0,1)");
        if (!(lam >= 0.0 && lam <= 1.0)) throw Error("AgentHyperparams: lambda in [0,1]");
    }
};

// Shared recurrent backbone with policy and value heads. BC reuses the same
// network built without the value head.
struct ActorCritic {
    int64_t obs_dim = 0;
    int64_t action_count = 0;
    int64_t feature_dim = 128;
    int64_t hidden_dim = 128;
    bool has_value_head = true;

    Mlp encoder;  // obs -> feature
    LstmCell cell;
    Linear policy_head;
    Linear value_head;

    ActorCritic() = default;
    ActorCritic(int64_t obs, int64_t actions, int64_t feature, int64_t hidden, Rng& rng,
                bool with_value = true)
        : obs_dim(obs),
          action_count(actions),
          feature_dim(feature),
          hidden_dim(hidden),
          has_value_head(with_value),
          encoder(obs, {feature}, feature, rng),
          cell(feature, hidden, rng),
          policy_head(hidden, actions, rng, 0.01) {
        if (with_value) value_head = Linear(hidden, 1, rng, 1.0);
    }

    ParamList params() {
        ParamList out;
        encoder.collect("ac.encoder", out);
        cell.collect("ac.lstm", out);
        policy_head.collect("ac.policy", out);
        if (has_value_head) value_head.collect("ac.value", out);
        return out;
    }
};

using AgentState = LstmCell::State;

struct ActResult {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    AgentState next_state;
    std::vector<double> probs;
};

namespace detail {
inline Tensor obs_row(std::span<const double> obs) {
    Tensor t({1, static_cast<int64_t>(obs.size())});
    std::copy(obs.begin(), obs.end(), t.data.begin());
    return t;
}
}  // namespace detail

inline ActResult act(const ActorCritic& model, std::span<const double> obs_normalized,
                     const AgentState& state, Rng& rng, bool greedy = false) {
    Tensor feat = model.encoder.forward_values(detail::obs_row(obs_normalized));
    ActResult out;
    out.next_state = model.cell.step_values(feat, state);
    Tensor logits = model.policy_head.forward_values(out.next_state.h);
    Tensor probs = softmax_values(logits);
    out.probs = probs.data;
    if (greedy) {
        out.action = 0;
        for (size_t i = 1; i < probs.data.size(); ++i)
            if (probs.data[i] > probs.data[static_cast<size_t>(out.action)])
                out.action = static_cast<int>(i);
    } else {
        out.action = static_cast<int>(rng.categorical(probs.data));
    }
    out.log_prob = std::log(probs.data[static_cast<size_t>(out.action)]);
    if (model.has_value_head)
        out.value = model.value_head.forward_values(out.next_state.h).data[0];
    return out;
}

// Value of an observation without sampling (bootstrap at truncation).
inline std::pair<double, AgentState> value_of(const ActorCritic& model,
                                              std::span<const double> obs_normalized,
                                              const AgentState& state) {
    Tensor feat = model.encoder.forward_values(detail::obs_row(obs_normalized));
    AgentState next = model.cell.step_values(feat, state);
    const double v = model.has_value_head ? model.value_head.forward_values(next.h).data[0] : 0.0;
    return {v, next};
}

inline AgentState actor_burn_in(const ActorCritic& model,
                                std::span<const std::vector<double>> obs_seq) {
    AgentState state = model.cell.zero_state(1);
    for (const auto& o : obs_seq) {
        Tensor feat = model.encoder.forward_values(detail::obs_row(o));
        state = model.cell.step_values(feat, state);
    }
    return state;
}

// --- lambda returns and TD errors -------------------------------------------

// G_t = r_t + gamma*(1-d_t)*[(1-lambda)*V_{t+1} + lambda*G_{t+1}], closing on
// values[T] at the truncation boundary.
inline std::vector<double> lambda_returns(std::span<const double> rewards,
                                          std::span<const double> values,
                                          std::span<const uint8_t> dones, double gamma,
                                          double lam) {
    const size_t T = rewards.size();
    if (values.size() != T + 1 || dones.size() != T)
        throw Error("lambda_returns: length mismatch (need values = T+1, dones = T)");
    std::vector<double> G(T, 0.0);
    double next = values[T];
    for (size_t i = T; i-- > 0;) {
        const double nd = dones[i] ? 0.0 : 1.0;
        G[i] = rewards[i] + gamma * nd * ((1.0 - lam) * values[i + 1] + lam * next);
        next = G[i];
    }
    return G;
}

// delta_t = r_t + gamma*(1-d_t)*V_{t+1} - V_t (the discount-corrected form).
inline std::vector<double> td_errors(std::span<const double> rewards,
                                     std::span<const double> values,
                                     std::span<const uint8_t> dones, double gamma) {
    const size_t T = rewards.size();
    if (values.size() != T + 1 || dones.size() != T)
        throw Error("td_errors: length mismatch");
    std::vector<double> d(T, 0.0);
    for (size_t i = 0; i < T; ++i) {
        const double nd = dones[i] ? 0.0 : 1.0;
        d[i] = rewards[i] + gamma * nd * values[i + 1] - values[i];
    }
    return d;
}

// --- imagined trajectories ----------------------------------------------------

// Autoregressive rollout inside the frozen world model. obs[0] is the newest
// context frame; obs has length T+1 and the per-step sequences length T.
struct ImaginedTrajectory {
    ConditioningBuffer context;
    std::vector<std::vector<double>> obs;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<uint8_t> dones;
    std::vector<double> log_probs;
    std::vector<double> values;  // length T+1, raw V(x_i)
    std::vector<double> deltas;

    int64_t length() const { return static_cast<int64_t>(actions.size()); }
    bool ended_early() const { return !dones.empty() && dones.back() != 0; }
};

struct A2cLosses {
    Graph graph;
    int policy_loss = -1;
    int value_loss = -1;
    int entropy = -1;
    int total = -1;
    std::vector<double> values;      // recomputed under current parameters
    std::vector<double> returns;     // lambda returns used as value targets
    std::vector<double> advantages;  // detached G_i - V_i
};

// Targets are detached constants of the objective; tests can pin them to probe
// the gradient of the same mathematical function the update uses.
struct A2cTargets {
    std::vector<double> returns;
    std::vector<double> advantages;
};

// Replays a trajectory through the network with gradients and assembles the
// A2C objective: L_pi = -sum_i log pi(a_i|x_i) * A_i with detached advantages,
// L_V = sum_i (V(x_i) - G_i)^2, total = L_pi + c_v*L_V - eta*entropy.
inline void build_a2c_losses(A2cLosses& out, ActorCritic& model, const ImaginedTrajectory& traj,
                             const AgentHyperparams& hp, const A2cTargets* fixed = nullptr) {
    hp.validate();
    const int64_t T = traj.length();
    if (T < 1) throw Error("build_a2c_losses: empty trajectory");
    if (traj.obs.size() != static_cast<size_t>(T) + 1)
        throw Error("build_a2c_losses: need T+1 observations");
    if (!model.has_value_head) throw Error("build_a2c_losses: model lacks a value head");

    Graph& g = out.graph;
    auto enc_bd = model.encoder.bind(g);
    auto cell_bd = model.cell.bind(g);
    auto pol_bd = model.policy_head.bind(g);
    auto val_bd = model.value_head.bind(g);

    // Burn-in on the stored context (state only; the newest frame is obs[0]).
    auto state = model.cell.zero_state_nodes(g, 1);
    for (size_t i = 0; i + 1 < traj.context.obs.size(); ++i) {
        const int feat = model.encoder.apply(g, enc_bd, g.input(detail::obs_row(traj.context.obs[i])));
        state = model.cell.step(g, cell_bd, feat, state);
    }

    std::vector<int> value_nodes, logit_nodes;
    out.values.clear();
    for (int64_t i = 0; i <= T; ++i) {
        const int feat = model.encoder.apply(
            g, enc_bd, g.input(detail::obs_row(traj.obs[static_cast<size_t>(i)])));
        state = model.cell.step(g, cell_bd, feat, state);
        const int v = model.value_head.apply(g, val_bd, state.h);
        value_nodes.push_back(v);
        out.values.push_back(g.val(v).data[0]);
        if (i < T) logit_nodes.push_back(model.policy_head.apply(g, pol_bd, state.h));
    }

    if (fixed) {
        out.returns = fixed->returns;
        out.advantages = fixed->advantages;
    } else {
        std::vector<double> boot = out.values;
        if (traj.ended_early()) boot[static_cast<size_t>(T)] = 0.0;
        out.returns = lambda_returns(traj.rewards, boot, traj.dones, hp.gamma, hp.lam);
        out.advantages.resize(static_cast<size_t>(T));
        for (int64_t i = 0; i < T; ++i)
            out.advantages[static_cast<size_t>(i)] =
                out.returns[static_cast<size_t>(i)] - out.values[static_cast<size_t>(i)];
    }

    int policy_acc = -1, value_acc = -1, entropy_acc = -1;
    for (int64_t i = 0; i < T; ++i) {
        const double advantage = out.advantages[static_cast<size_t>(i)];
        const int lp = g.gather_last(g.log_softmax(logit_nodes[static_cast<size_t>(i)]),
                                     {traj.actions[static_cast<size_t>(i)]});
        const int p_term = g.scale(g.sum(lp), -advantage);
        policy_acc = policy_acc < 0 ? p_term : g.add(policy_acc, p_term);

        const int diff = g.sub(value_nodes[static_cast<size_t>(i)],
                               g.input(Tensor({1, 1}, out.returns[static_cast<size_t>(i)])));
        const int v_term = g.sum(g.square(diff));
        value_acc = value_acc < 0 ? v_term : g.add(value_acc, v_term);

        const int probs = g.softmax(logit_nodes[static_cast<size_t>(i)]);
        const int logp = g.log_softmax(logit_nodes[static_cast<size_t>(i)]);
        const int e_term = g.scale(g.sum(g.mul(probs, logp)), -1.0);
        entropy_acc = entropy_acc < 0 ? e_term : g.add(entropy_acc, e_term);
    }
    out.policy_loss = policy_acc;
    out.value_loss = value_acc;
    out.entropy = entropy_acc;
    out.total = g.add(g.add(policy_acc, g.scale(value_acc, hp.value_coeff)),
                      g.scale(entropy_acc, -hp.entropy_weight));
}

// --- evaluation ---------------------------------------------------------------

struct EvalReport {
    std::vector<uint64_t> level_seeds;
    std::vector<double> level_returns;  // mean over episodes per level
    double mean_return = 0.0;
};

// Generic rollouts in the real environment over a level list; the policy
// functor sees (state, observation) and returns an action.
template <typename PolicyFn>
EvalReport evaluate_policy_fn(PolicyFn&& policy, const EnvSpec& spec,
                              std::span<const uint64_t> level_seeds, int episodes_per_level) {
    EvalReport report;
    double total = 0.0;
    for (uint64_t seed : level_seeds) {
        double level_total = 0.0;
        for (int e = 0; e < episodes_per_level; ++e) {
            auto [state, obs] = reset(spec, seed);
            double ep_return = 0.0;
            while (!state.done) {
                const int action = policy(state, obs);
                StepResult r = step(spec, state, action);
                ep_return += r.reward;
                obs = std::move(r.obs);
            }
            level_total += ep_return;
        }
        report.level_seeds.push_back(seed);
        report.level_returns.push_back(level_total / episodes_per_level);
        total += level_total / episodes_per_level;
    }
    report.mean_return = level_seeds.empty() ? 0.0 : total / static_cast<double>(level_seeds.size());
    return report;
}

// Actor-critic rollouts; the recurrent state starts at zero on reset (no
// context is available outside imagination).
inline EvalReport evaluate_policy(const ActorCritic& model, const EnvSpec& spec,
                                  std::span<const uint64_t> level_seeds, int episodes_per_level,
                                  Rng& rng, bool sampled = true) {
    EvalReport report;
    double total = 0.0;
    for (uint64_t seed : level_seeds) {
        double level_total = 0.0;
        for (int e = 0; e < episodes_per_level; ++e) {
            auto [state, obs] = reset(spec, seed);
            AgentState h = model.cell.zero_state(1);
            double ep_return = 0.0;
            while (!state.done) {
                const auto norm = normalize_obs(obs);
                ActResult a = act(model, norm, h, rng, !sampled);
                h = a.next_state;
                StepResult r = step(spec, state, a.action);
                ep_return += r.reward;
                obs = std::move(r.obs);
            }
            level_total += ep_return;
        }
        report.level_seeds.push_back(seed);
        report.level_returns.push_back(level_total / episodes_per_level);
        total += level_total / episodes_per_level;
    }
    report.mean_return = level_seeds.empty() ? 0.0 : total / static_cast<double>(level_seeds.size());
    return report;
}

// --- behavior cloning ----------------------------------------------------------

struct BcBatchLoss {
    Graph graph;
    int loss = -1;  // mean NLL over labeled steps
    double correct = 0.0;
    double labeled = 0.0;
};

// Supervised next-action prediction on dataset segments, same burn-in
// convention as the reward model.
inline void build_bc_batch_loss(BcBatchLoss& out, ActorCritic& model,
                                const std::vector<Segment>& batch) {
    if (batch.empty()) throw Error("build_bc_batch_loss: empty batch");
    const int64_t B = static_cast<int64_t>(batch.size());
    const int L = batch[0].context_len;
    int64_t t_max = 0;
    for (const auto& seg : batch)
        t_max = std::max<int64_t>(t_max, static_cast<int64_t>(seg.steps.size()));

    Graph& g = out.graph;
    auto enc_bd = model.encoder.bind(g);
    auto cell_bd = model.cell.bind(g);
    auto pol_bd = model.policy_head.bind(g);
    auto state = model.cell.zero_state_nodes(g, B);

    int loss_acc = -1;
    out.labeled = 0.0;
    out.correct = 0.0;
    for (int64_t t = 0; t < t_max; ++t) {
        Tensor in({B, model.obs_dim});
        std::vector<int64_t> labels(static_cast<size_t>(B), 0);
        Tensor mask({B, 1});
        for (int64_t b = 0; b < B; ++b) {
            const auto& steps = batch[static_cast<size_t>(b)].steps;
            const size_t k = std::min(static_cast<size_t>(t), steps.size() - 1);
            for (int64_t i = 0; i < model.obs_dim; ++i)
                in.at(b, i) = steps[k].obs[static_cast<size_t>(i)] ? 1.0 : -1.0;
            const bool labeled = t >= L - 1 && static_cast<size_t>(t) < steps.size();
            mask.at(b, 0) = labeled ? 1.0 : 0.0;
            if (labeled) {
                labels[static_cast<size_t>(b)] = steps[k].action;
                out.labeled += 1.0;
            }
        }
        const int feat = model.encoder.apply(g, enc_bd, g.input(std::move(in)));
        state = model.cell.step(g, cell_bd, feat, state);
        if (t < L - 1) continue;
        const int logits = model.policy_head.apply(g, pol_bd, state.h);
        const int lp = g.log_softmax(logits);
        const Tensor& lpv = g.val(lp);
        for (int64_t b = 0; b < B; ++b) {
            const auto& steps = batch[static_cast<size_t>(b)].steps;
            if (!(t >= L - 1 && static_cast<size_t>(t) < steps.size())) continue;
            int best = 0;
            for (int64_t c = 1; c < model.action_count; ++c)
                if (lpv.at(b, c) > lpv.at(b, best)) best = static_cast<int>(c);
            if (best == static_cast<int>(steps[static_cast<size_t>(t)].action)) out.correct += 1.0;
        }
        const int mask_id = g.input(std::move(mask));
        const int nll = g.scale(g.sum(g.mul(g.gather_last(lp, labels), mask_id)), -1.0);
        loss_acc = loss_acc < 0 ? nll : g.add(loss_acc, nll);
    }
    if (loss_acc < 0 || out.labeled == 0.0) throw Error("build_bc_batch_loss: no labeled steps");
    out.loss = g.scale(loss_acc, 1.0 / out.labeled);
}

}  // namespace imac
