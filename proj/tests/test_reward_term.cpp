#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "imac/reward_term.hpp"
#include "test_support.hpp"

using namespace imac;

namespace {

// Make every head produce identical fixed logits regardless of input.
void rig_constant_heads(RTModel& model, double r0, double r1, double d0, double d1) {
    for (int e = 0; e < model.ensemble_size; ++e) {
        auto& rh = model.reward_heads[static_cast<size_t>(e)];
        auto& dh = model.done_heads[static_cast<size_t>(e)];
        std::fill(rh.W.data.begin(), rh.W.data.end(), 0.0);
        std::fill(dh.W.data.begin(), dh.W.data.end(), 0.0);
        rh.b.data = {r0, r1};
        dh.b.data = {d0, d1};
    }
}

Segment no_terminal_segment(int64_t obs_dim, int context_len, int post_steps) {
    Segment seg;
    seg.context_len = context_len;
    for (int i = 0; i < context_len + post_steps; ++i) {
        Transition t;
        t.obs.assign(static_cast<size_t>(obs_dim), 0);
        t.obs[static_cast<size_t>(i % obs_dim)] = 1;
        t.action = static_cast<uint8_t>(i % 5);
        t.reward = 0.0f;
        t.done = false;
        seg.steps.push_back(std::move(t));
    }
    return seg;
}

}  // namespace

TEST_CASE("identical heads: aggregate equals any single head, zero disagreement") {
    Rng rng(1);
    RTModel model(6, 5, 16, 16, 4, rng);
    rig_constant_heads(model, 0.3, -0.2, 1.0, -1.0);
    const std::vector<double> obs(6, 0.5);
    const RtPrediction pred = rt_step(model, obs, 2, model.cell.zero_state(1));

    const auto p0 = pred.reward_logits[0];
    const double m = std::max(p0[0], p0[1]);
    const double z = std::exp(p0[0] - m) + std::exp(p0[1] - m);
    REQUIRE(pred.reward_probs[0] == Catch::Approx(std::exp(p0[0] - m) / z));
    REQUIRE(pred.reward_probs[0] + pred.reward_probs[1] == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(pred.done_probs[0] + pred.done_probs[1] == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(pred.reward_disagreement == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(pred.done_disagreement == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("confident correct logits drive the loss to zero") {
    Rng rng(2);
    RTModel model(6, 5, 8, 8, 3, rng);
    rig_constant_heads(model, 50.0, -50.0, 50.0, -50.0);  // class 0 everywhere
    const Segment seg = no_terminal_segment(6, 4, 5);      // all labels are (0, 0)
    REQUIRE(rt_loss_value(model, seg) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("uniform logits give (H*E*2)*ln2") {
    Rng rng(3);
    const int E = 4;
    RTModel model(6, 5, 8, 8, E, rng);
    rig_constant_heads(model, 0.0, 0.0, 0.0, 0.0);
    const int H = 7;
    const Segment seg = no_terminal_segment(6, 4, H);
    const double expected = H * E * 2.0 * std::log(2.0);
    REQUIRE(rt_loss_value(model, seg) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss gradient matches finite differences") {
    Rng rng(4);
    RTModel model(6, 5, 8, 8, 2, rng);
    Segment seg = no_terminal_segment(6, 4, 4);
    seg.steps.back().reward = 1.0f;
    seg.steps.back().done = true;
    std::vector<Segment> batch = {seg, no_terminal_segment(6, 4, 3)};

    auto build = [&]() {
        RtBatchLoss step;
        build_rt_batch_loss(step, model, batch);
        return std::pair<Graph, int>(std::move(step.graph), step.loss);
    };
    auto [g, loss] = build();
    g.backward(loss);
    auto scalar_loss = [&]() {
        auto [gg, id] = build();
        return gg.scalar(id);
    };
    REQUIRE(imac::testing::fd_check_params(model.params(), g, scalar_loss) < 1e-5);
}

TEST_CASE("burn-in from empty context is the zero state, and is deterministic") {
    Rng rng(5);
    RTModel model(6, 5, 8, 8, 2, rng);
    const RecurrentState s0 = rt_burn_in(model, {}, {});
    for (double v : s0.h.data) REQUIRE(v == 0.0);
    for (double v : s0.c.data) REQUIRE(v == 0.0);

    std::vector<std::vector<double>> obs = {{1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0}};
    std::vector<int> act = {0, 1};
    const RecurrentState a = rt_burn_in(model, obs, act);
    const RecurrentState b = rt_burn_in(model, obs, act);
    REQUIRE(a.h.data == b.h.data);
    REQUIRE(a.c.data == b.c.data);
}

TEST_CASE("zeroing one head changes only that head's logits") {
    Rng rng(6);
    RTModel model(6, 5, 8, 8, 3, rng);
    const std::vector<double> obs(6, 0.25);
    const RtPrediction before = rt_step(model, obs, 1, model.cell.zero_state(1));
    auto& head = model.reward_heads[1];
    std::fill(head.W.data.begin(), head.W.data.end(), 0.0);
    std::fill(head.b.data.begin(), head.b.data.end(), 0.0);
    const RtPrediction after = rt_step(model, obs, 1, model.cell.zero_state(1));
    REQUIRE(after.reward_logits[0] == before.reward_logits[0]);
    REQUIRE(after.reward_logits[2] == before.reward_logits[2]);
    REQUIRE(after.reward_logits[1] != before.reward_logits[1]);
    REQUIRE(after.done_logits[1] == before.done_logits[1]);
}

namespace {

// Reward sign at the final step is determined solely by the first context
// frame; post-context frames are identical across episodes.
Dataset context_coded_dataset() {
    Dataset ds;
    ds.grid_size = 1;
    ds.channels = 6;
    const int len = 9;
    for (int e = 0; e < 40; ++e) {
        const bool positive = e % 2 == 0;
        Episode ep;
        for (int i = 0; i < len; ++i) {
            Transition t;
            t.obs.assign(6, 0);
            if (i == 0)
                t.obs[positive ? 0 : 1] = 1;
            else
                t.obs[5] = 1;
            t.action = 0;
            t.done = i == len - 1;
            t.reward = (i == len - 1 && positive) ? 1.0f : 0.0f;
            ep.transitions.push_back(std::move(t));
        }
        ds.episodes.push_back(std::move(ep));
    }
    return ds;
}

}  // namespace

TEST_CASE("burn-in carries context the bare state cannot") {
    Dataset ds = context_coded_dataset();
    Rng rng(7);
    RTModel model(6, 5, 24, 24, 3, rng);
    RtTrainConfig cfg;
    cfg.epochs = 4;
    cfg.steps_per_epoch = 60;
    cfg.batch_size = 8;
    cfg.opt.lr = 3e-3;
    Rng train_rng(8);
    SegmentSampler sampler(ds, 4, 8);
    // anchor windows at the episode start so the coded frame is in context
    AdamW opt(model.params(), cfg.opt);
    for (int s = 0; s < cfg.epochs * cfg.steps_per_epoch; ++s) {
        std::vector<Segment> batch;
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.push_back(sampler.build(ds.episodes[train_rng.index(ds.episodes.size())], 3, 8));
        RtBatchLoss step;
        build_rt_batch_loss(step, model, batch);
        step.graph.backward(step.loss);
        opt.step(step.graph);
    }

    int correct_with = 0, correct_without = 0, total = 0;
    for (const auto& ep : ds.episodes) {
        std::vector<std::vector<double>> ctx_obs;
        std::vector<int> ctx_act;
        for (int i = 0; i < 4; ++i) {
            ctx_obs.push_back(normalize_obs(ep.transitions[static_cast<size_t>(i)].obs));
            ctx_act.push_back(0);
        }
        auto run_from = [&](RecurrentState state) {
            RtPrediction pred;
            for (size_t i = 4; i < ep.transitions.size(); ++i) {
                pred = rt_step(model, normalize_obs(ep.transitions[i].obs),
                               ep.transitions[i].action, state);
                state = pred.next_state;
            }
            return pred.reward_probs[1] > 0.5 ? 1 : 0;
        };
        const int label = ep.transitions.back().reward > 0 ? 1 : 0;
        correct_with += run_from(rt_burn_in(model, ctx_obs, ctx_act)) == label;
        correct_without += run_from(model.cell.zero_state(1)) == label;
        ++total;
    }
    REQUIRE(correct_with > correct_without);
    REQUIRE(correct_with >= total * 9 / 10);
}

TEST_CASE("training on toy data reaches high done and reward accuracy, then freezes") {
    EnvSpec spec;
    spec.env_id = EnvId::GridMaze;
    Rng data_rng(9);
    Dataset ds = collect_dataset(spec, 4, 1200, data_rng);
    Rng rng(10);
    RTModel model(spec.obs_dim(), spec.action_count(), 32, 32, 3, rng);
    RtTrainConfig cfg;
    cfg.epochs = 3;
    cfg.steps_per_epoch = 100;
    cfg.batch_size = 12;
    cfg.opt.lr = 2e-3;
    Rng train_rng(11);
    auto draw = [](Rng&) { return 8; };
    train_rt_model(model, ds, cfg, 4, draw, train_rng);
    REQUIRE(model.frozen);
    REQUIRE_THROWS_AS(train_rt_model(model, ds, cfg, 4, draw, train_rng), Error);

    // measure on fresh windows
    SegmentSampler sampler(ds, 4, 8);
    Rng meas(12);
    int done_correct = 0, done_total = 0, reward_correct = 0, reward_total = 0;
    for (int k = 0; k < 300; ++k) {
        const Segment seg = sampler.sample(meas, 8);
        RecurrentState state = model.cell.zero_state(1);
        for (size_t i = 0; i < seg.steps.size(); ++i) {
            const auto& tr = seg.steps[i];
            const RtPrediction pred =
                rt_step(model, normalize_obs(tr.obs), tr.action, state);
            state = pred.next_state;
            if (i < static_cast<size_t>(seg.context_len)) continue;
            const bool pred_done = pred.done_probs[1] > 0.5;
            done_correct += pred_done == tr.done;
            ++done_total;
            if (tr.done && tr.reward > 0) {
                reward_correct += pred.reward_probs[1] > pred.reward_probs[0];
                ++reward_total;
            }
        }
    }
    REQUIRE(done_total > 0);
    REQUIRE(static_cast<double>(done_correct) / done_total >= 0.95);
    if (reward_total > 0)
        REQUIRE(static_cast<double>(reward_correct) / reward_total >= 0.9);
}
