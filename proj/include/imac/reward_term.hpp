#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "imac/autodiff.hpp"
#include "imac/dataset.hpp"
#include "imac/nn.hpp"
#include "imac/optim.hpp"
#include "imac/world_model.hpp"

namespace imac {

// Recurrent reward/termination predictor with an ensemble of E independent
// 2-class head pairs (reward sign in {0,+} and done). Heads share the
// backbone and LSTM state; ensemble diversity comes from initialization only.
// The aggregate prediction is the arithmetic mean of per-head probabilities.

struct RTModel {
    int64_t obs_dim = 0;
    int64_t action_count = 0;
    int64_t feature_dim = 128;
    int64_t hidden_dim = 128;
    int ensemble_size = 10;
    bool frozen = false;

    Mlp backbone;  // (obs ++ one-hot action) -> feature
    LstmCell cell;
    std::vector<Linear> reward_heads;
    std::vector<Linear> done_heads;

    RTModel() = default;
    RTModel(int64_t obs, int64_t actions, int64_t feature, int64_t hidden, int ensemble, Rng& rng)
        : obs_dim(obs),
          action_count(actions),
          feature_dim(feature),
          hidden_dim(hidden),
          ensemble_size(ensemble),
          backbone(obs + actions, {feature}, feature, rng),
          cell(feature, hidden, rng) {
        if (ensemble < 1) throw Error("RTModel: ensemble_size must be >= 1");
        for (int e = 0; e < ensemble; ++e) {
            reward_heads.emplace_back(hidden, 2, rng, 1.0);
            done_heads.emplace_back(hidden, 2, rng, 1.0);
        }
    }

    ParamList params() {
        ParamList out;
        backbone.collect("rt.backbone", out);
        cell.collect("rt.lstm", out);
        for (int e = 0; e < ensemble_size; ++e) {
            reward_heads[static_cast<size_t>(e)].collect("rt.reward" + std::to_string(e), out);
            done_heads[static_cast<size_t>(e)].collect("rt.done" + std::to_string(e), out);
        }
        return out;
    }

    Tensor encode_input(std::span<const double> obs_normalized, int action) const {
        Tensor in({1, obs_dim + action_count});
        for (int64_t i = 0; i < obs_dim; ++i) in.data[static_cast<size_t>(i)] = obs_normalized[static_cast<size_t>(i)];
        in.data[static_cast<size_t>(obs_dim + action)] = 1.0;
        return in;
    }
};

using RecurrentState = LstmCell::State;

struct RtPrediction {
    std::vector<std::array<double, 2>> reward_logits;  // per head
    std::vector<std::array<double, 2>> done_logits;
    std::array<double, 2> reward_probs{};  // ensemble mean
    std::array<double, 2> done_probs{};
    double reward_disagreement = 0.0;  // variance of per-head P(reward > 0)
    double done_disagreement = 0.0;
    RecurrentState next_state;
};

namespace detail {
inline std::array<double, 2> softmax2(double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double z = ea + eb;
    return {ea / z, eb / z};
}
}  // namespace detail

inline RtPrediction rt_step(const RTModel& model, std::span<const double> obs_normalized,
                            int action, const RecurrentState& state) {
    if (state.h.cols() != model.hidden_dim)
        throw Error("rt_step: state width does not match model");
    Tensor feat = model.backbone.forward_values(model.encode_input(obs_normalized, action));
    RtPrediction out;
    out.next_state = model.cell.step_values(feat, state);
    const Tensor& h = out.next_state.h;
    double mean_r = 0.0, mean_d = 0.0, sq_r = 0.0, sq_d = 0.0;
    for (int e = 0; e < model.ensemble_size; ++e) {
        Tensor rl = model.reward_heads[static_cast<size_t>(e)].forward_values(h);
        Tensor dl = model.done_heads[static_cast<size_t>(e)].forward_values(h);
        out.reward_logits.push_back({rl.data[0], rl.data[1]});
        out.done_logits.push_back({dl.data[0], dl.data[1]});
        const auto rp = detail::softmax2(rl.data[0], rl.data[1]);
        const auto dp = detail::softmax2(dl.data[0], dl.data[1]);
        out.reward_probs[0] += rp[0];
        out.reward_probs[1] += rp[1];
        out.done_probs[0] += dp[0];
        out.done_probs[1] += dp[1];
        mean_r += rp[1];
        sq_r += rp[1] * rp[1];
        mean_d += dp[1];
        sq_d += dp[1] * dp[1];
    }
    const double inv = 1.0 / model.ensemble_size;
    for (auto& v : out.reward_probs) v *= inv;
    for (auto& v : out.done_probs) v *= inv;
    mean_r *= inv;
    mean_d *= inv;
    out.reward_disagreement = std::max(0.0, sq_r * inv - mean_r * mean_r);
    out.done_disagreement = std::max(0.0, sq_d * inv - mean_d * mean_d);
    return out;
}

// State after running the cell over (obs, action) pairs from zero init.
inline RecurrentState rt_burn_in(const RTModel& model,
                                 std::span<const std::vector<double>> obs_seq,
                                 std::span<const int> action_seq) {
    if (obs_seq.size() != action_seq.size())
        throw Error("rt_burn_in: observation/action length mismatch");
    RecurrentState state = model.cell.zero_state(1);
    for (size_t i = 0; i < obs_seq.size(); ++i) {
        Tensor feat = model.backbone.forward_values(
            model.encode_input(obs_seq[i], action_seq[i]));
        state = model.cell.step_values(feat, state);
    }
    return state;
}

inline RecurrentState rt_burn_in(const RTModel& model, const ConditioningBuffer& ctx,
                                 size_t count) {
    std::vector<std::vector<double>> obs(ctx.obs.begin(), ctx.obs.begin() + static_cast<long>(count));
    std::vector<int> act(ctx.actions.begin(), ctx.actions.begin() + static_cast<long>(count));
    return rt_burn_in(model, obs, act);
}

// --- training ----------------------------------------------------------------

struct RtBatchLoss {
    Graph graph;
    int loss = -1;          // batch-mean of per-segment summed CE
    double label_count = 0; // reward+done terms across heads (for diagnostics)
};

// Cross-entropy on reward-sign and done classes for every post-burn-in step of
// each segment, all heads, summed within a segment and averaged over the
// batch. Burn-in steps only drive the recurrent state. Rows shorter than the
// longest segment are padded and masked out of the loss.
inline void build_rt_batch_loss(RtBatchLoss& out, RTModel& model,
                                const std::vector<Segment>& batch) {
    if (batch.empty()) throw Error("build_rt_batch_loss: empty batch");
    const int64_t B = static_cast<int64_t>(batch.size());
    const int L = batch[0].context_len;
    int64_t t_max = 0;
    for (const auto& seg : batch)
        t_max = std::max<int64_t>(t_max, static_cast<int64_t>(seg.steps.size()));

    Graph& g = out.graph;
    auto backbone_bd = model.backbone.bind(g);
    auto cell_bd = model.cell.bind(g);
    std::vector<Linear::Bound> rb, db;
    for (int e = 0; e < model.ensemble_size; ++e) {
        rb.push_back(model.reward_heads[static_cast<size_t>(e)].bind(g));
        db.push_back(model.done_heads[static_cast<size_t>(e)].bind(g));
    }

    auto state = model.cell.zero_state_nodes(g, B);
    int loss_acc = -1;
    out.label_count = 0;
    for (int64_t t = 0; t < t_max; ++t) {
        Tensor in({B, model.obs_dim + model.action_count});
        std::vector<int64_t> reward_labels(static_cast<size_t>(B), 0);
        std::vector<int64_t> done_labels(static_cast<size_t>(B), 0);
        Tensor mask({B, 1});
        for (int64_t b = 0; b < B; ++b) {
            const auto& steps = batch[static_cast<size_t>(b)].steps;
            const size_t k = std::min(static_cast<size_t>(t), steps.size() - 1);  // pad w/ last
            const Transition& tr = steps[k];
            for (int64_t i = 0; i < model.obs_dim; ++i)
                in.at(b, i) = tr.obs[static_cast<size_t>(i)] ? 1.0 : -1.0;
            in.at(b, model.obs_dim + tr.action) = 1.0;
            const bool labeled = t >= L && static_cast<size_t>(t) < steps.size();
            mask.at(b, 0) = labeled ? 1.0 : 0.0;
            if (labeled) {
                reward_labels[static_cast<size_t>(b)] = tr.reward > 0.0f ? 1 : 0;
                done_labels[static_cast<size_t>(b)] = tr.done ? 1 : 0;
                out.label_count += 2 * model.ensemble_size;
            }
        }
        const int feat = model.backbone.apply(g, backbone_bd, g.input(std::move(in)));
        state = model.cell.step(g, cell_bd, feat, state);
        if (t < L) continue;
        const int mask_id = g.input(std::move(mask));
        for (int e = 0; e < model.ensemble_size; ++e) {
            const int r_lp = g.log_softmax(
                model.reward_heads[static_cast<size_t>(e)].apply(g, rb[static_cast<size_t>(e)], state.h));
            const int d_lp = g.log_softmax(
                model.done_heads[static_cast<size_t>(e)].apply(g, db[static_cast<size_t>(e)], state.h));
            const int r_nll = g.mul(g.gather_last(r_lp, reward_labels), mask_id);
            const int d_nll = g.mul(g.gather_last(d_lp, done_labels), mask_id);
            const int term = g.scale(g.add(g.sum(r_nll), g.sum(d_nll)), -1.0);
            loss_acc = loss_acc < 0 ? term : g.add(loss_acc, term);
        }
    }
    if (loss_acc < 0) throw Error("build_rt_batch_loss: no labeled steps");
    out.loss = g.scale(loss_acc, 1.0 / static_cast<double>(B));
}

// Per-segment loss with batch 1 (the spec-level rt_loss surface).
inline double rt_loss_value(RTModel& model, const Segment& seg) {
    RtBatchLoss step;
    build_rt_batch_loss(step, model, {seg});
    return step.graph.scalar(step.loss);
}

struct RtTrainConfig {
    int epochs = 20;
    int steps_per_epoch = 100;
    int batch_size = 32;
    AdamWConfig opt{};
};

// Phase 2. Segments are L burn-in steps plus a horizon drawn per sample from
// `horizon_draw`; freezes the model when done.
inline std::vector<double> train_rt_model(
    RTModel& model, const Dataset& dataset, const RtTrainConfig& cfg, int context_len,
    const std::function<int(Rng&)>& horizon_draw, Rng& rng,
    const std::function<void(int, double)>& on_epoch = nullptr) {
    if (model.frozen) throw Error("train_rt_model: model is frozen");
    const int h_cap = 64;
    SegmentSampler sampler(dataset, context_len, h_cap);
    AdamW opt(model.params(), cfg.opt);
    std::vector<double> curve;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double acc = 0.0;
        for (int s = 0; s < cfg.steps_per_epoch; ++s) {
            std::vector<Segment> batch;
            batch.reserve(static_cast<size_t>(cfg.batch_size));
            for (int b = 0; b < cfg.batch_size; ++b)
                batch.push_back(sampler.sample(rng, horizon_draw(rng)));
            RtBatchLoss step;
            build_rt_batch_loss(step, model, batch);
            const double loss = step.graph.scalar(step.loss);
            if (!std::isfinite(loss))
                throw Error(detail::str("train_rt_model: non-finite loss at epoch ", epoch));
            step.graph.backward(step.loss);
            opt.step(step.graph);
            acc += loss;
        }
        curve.push_back(acc / cfg.steps_per_epoch);
        if (on_epoch) on_epoch(epoch, curve.back());
    }
    model.frozen = true;
    return curve;
}

}  // namespace imac
