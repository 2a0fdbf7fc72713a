#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "imac/agent.hpp"
#include "imac/checkpoint.hpp"
#include "imac/config.hpp"
#include "imac/curriculum.hpp"
#include "imac/dataset.hpp"
#include "imac/imagination.hpp"
#include "imac/metrics.hpp"
#include "imac/reward_term.hpp"
#include "imac/world_model.hpp"

namespace imac {

// Three-phase driver (dataset -> world model -> reward model -> agent), the
// evaluation harness and the fixed/random/plr ablation runner.

inline std::vector<uint64_t> train_level_seeds(const RunConfig& cfg, int64_t count = -1) {
    const int64_t n = count < 0 ? cfg.train_level_count : std::min(count, cfg.train_level_count);
    std::vector<uint64_t> seeds;
    for (int64_t i = 0; i < n; ++i) seeds.push_back(static_cast<uint64_t>(i));
    return seeds;
}

inline std::vector<uint64_t> test_level_seeds(const RunConfig& cfg, int64_t count = -1) {
    const int64_t n = count < 0 ? cfg.test_level_count : std::min(count, cfg.test_level_count);
    std::vector<uint64_t> seeds;
    for (int64_t i = 0; i < n; ++i)
        seeds.push_back(static_cast<uint64_t>(cfg.train_level_count + i));
    return seeds;
}

// --- model construction and checkpoints --------------------------------------

inline DenoiserModel make_world_model(const RunConfig& cfg, Rng& rng) {
    const EnvSpec spec = cfg.env_spec();
    DenoiserModel wm(spec.obs_dim(), spec.action_count(), cfg.context_len, cfg.wm_hidden,
                     cfg.sigma_data, cfg.wm_residual, rng);
    return wm;
}

inline RTModel make_rt_model(const RunConfig& cfg, Rng& rng) {
    const EnvSpec spec = cfg.env_spec();
    return RTModel(spec.obs_dim(), spec.action_count(), cfg.rt_feature, cfg.rt_hidden,
                   cfg.rt_ensemble, rng);
}

inline ActorCritic make_agent(const RunConfig& cfg, Rng& rng, bool with_value = true) {
    const EnvSpec spec = cfg.env_spec();
    return ActorCritic(spec.obs_dim(), spec.action_count(), cfg.agent_feature, cfg.agent_hidden,
                       rng, with_value);
}

inline void save_world_model(const std::string& path, DenoiserModel& wm) {
    std::vector<int64_t> ints = {wm.obs_dim, wm.action_count, wm.context_len,
                                 wm.residual_mode ? 1 : 0};
    for (size_t i = 0; i + 1 < wm.net.layers.size(); ++i)
        ints.push_back(wm.net.layers[i].W.shape[1]);
    const double dbl[] = {wm.sigma_data};
    save_checkpoint(path, "IMWM", ints, dbl, wm.params());
}

inline DenoiserModel load_world_model(const std::string& path, const RunConfig& cfg) {
    Rng init(0);
    DenoiserModel wm = make_world_model(cfg, init);
    const auto h = load_checkpoint(path, "IMWM", wm.params());
    if (h.ints.size() < 4 || h.ints[0] != wm.obs_dim || h.ints[1] != wm.action_count ||
        h.ints[2] != wm.context_len || (h.ints[3] != 0) != wm.residual_mode)
        throw Error("load_world_model: checkpoint does not match config: " + path);
    if (!h.doubles.empty()) wm.sigma_data = h.doubles[0];
    wm.frozen = true;
    return wm;
}

inline void save_rt_model(const std::string& path, RTModel& rt) {
    const int64_t ints[] = {rt.obs_dim, rt.action_count, rt.feature_dim, rt.hidden_dim,
                            rt.ensemble_size};
    save_checkpoint(path, "IMRT", ints, {}, rt.params());
}

inline RTModel load_rt_model(const std::string& path, const RunConfig& cfg) {
    Rng init(0);
    RTModel rt = make_rt_model(cfg, init);
    const auto h = load_checkpoint(path, "IMRT", rt.params());
    if (h.ints.size() != 5 || h.ints[0] != rt.obs_dim || h.ints[4] != rt.ensemble_size)
        throw Error("load_rt_model: checkpoint does not match config: " + path);
    rt.frozen = true;
    return rt;
}

inline void save_agent(const std::string& path, ActorCritic& ac) {
    const int64_t ints[] = {ac.obs_dim, ac.action_count, ac.feature_dim, ac.hidden_dim,
                            ac.has_value_head ? 1 : 0};
    save_checkpoint(path, "IMAG", ints, {}, ac.params());
}

inline ActorCritic load_agent(const std::string& path, const RunConfig& cfg) {
    Rng init(0);
    // Value-head presence is in the header; probe it first.
    {
        auto is = binio::open_in(path);
        binio::expect_magic(is, "IMAG", path.c_str());
        binio::read_le<uint16_t>(is, "version");
        const auto n = binio::read_le<uint32_t>(is, "ints");
        std::vector<int64_t> ints(n);
        for (auto& v : ints) v = binio::read_le<int64_t>(is, "int");
        const bool with_value = ints.size() == 5 && ints[4] != 0;
        ActorCritic ac = make_agent(cfg, init, with_value);
        load_checkpoint(path, "IMAG", ac.params());
        return ac;
    }
}

// --- clock --------------------------------------------------------------------

class WallClock {
public:
    WallClock() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// --- phase 1 and 2 -------------------------------------------------------------

inline Dataset run_collect(const RunConfig& cfg, Rng& rng) {
    return collect_dataset(cfg.env_spec(), cfg.train_level_count, cfg.total_transitions, rng);
}

inline DenoiserModel run_train_wm(const RunConfig& cfg, const Dataset& dataset, Rng& rng,
                                  MetricsWriter& metrics, const WallClock& clock) {
    DenoiserModel wm = make_world_model(cfg, rng);
    WmTrainConfig tc;
    tc.epochs = cfg.wm_epochs;
    tc.steps_per_epoch = cfg.wm_steps_per_epoch;
    tc.batch_size = cfg.wm_batch;
    tc.opt.lr = cfg.wm_lr;
    tc.opt.weight_decay = cfg.wm_weight_decay;
    tc.opt.clip_norm = cfg.clip_norm;
    train_world_model(wm, dataset, cfg.schedule, tc, rng, [&](int epoch, double loss) {
        MetricsRecord rec;
        rec.epoch = epoch;
        rec.phase = "wm";
        rec.losses["denoiser"] = loss;
        rec.wall_time = clock.seconds();
        metrics.write(rec);
    });
    return wm;
}

inline RTModel run_train_rt(const RunConfig& cfg, const Dataset& dataset, Rng& rng,
                            MetricsWriter& metrics, const WallClock& clock) {
    RTModel rt = make_rt_model(cfg, rng);
    RtTrainConfig tc;
    tc.epochs = cfg.rt_epochs;
    tc.steps_per_epoch = cfg.rt_steps_per_epoch;
    tc.batch_size = cfg.rt_batch;
    tc.opt.lr = cfg.rt_lr;
    tc.opt.weight_decay = cfg.rt_weight_decay;
    tc.opt.clip_norm = cfg.clip_norm;
    const HorizonPolicy policy = cfg.resolved_horizon();
    auto draw = [policy](Rng& r) { return sample_horizon(policy, r); };
    train_rt_model(rt, dataset, tc, cfg.context_len, draw, rng, [&](int epoch, double loss) {
        MetricsRecord rec;
        rec.epoch = epoch;
        rec.phase = "rt";
        rec.losses["reward_term"] = loss;
        rec.wall_time = clock.seconds();
        metrics.write(rec);
    });
    return rt;
}

// --- phase 3 -------------------------------------------------------------------

// Applies one A2C update to the actor from a trajectory and returns the
// trajectory with values/TD errors refreshed under the pre-update parameters.
class AgentTrainer {
public:
    AgentTrainer(ActorCritic& actor, const AgentHyperparams& hp, const AdamWConfig& opt_cfg)
        : actor_(&actor), hp_(hp), opt_(actor.params(), opt_cfg) {}

    ImaginedTrajectory train(const ImaginedTrajectory& traj) {
        A2cLosses losses;
        build_a2c_losses(losses, *actor_, traj, hp_);
        const double total = losses.graph.scalar(losses.total);
        if (!std::isfinite(total)) throw Error("agent update: non-finite loss");
        losses.graph.backward(losses.total);
        opt_.step(losses.graph);
        last_policy_loss_ = losses.graph.scalar(losses.policy_loss);
        last_value_loss_ = losses.graph.scalar(losses.value_loss);
        last_entropy_ = losses.graph.scalar(losses.entropy);
        last_total_ = total;

        ImaginedTrajectory out = traj;
        out.values = losses.values;
        out.deltas = td_errors(out.rewards, out.values, out.dones, hp_.gamma);
        return out;
    }

    double last_policy_loss() const { return last_policy_loss_; }
    double last_value_loss() const { return last_value_loss_; }
    double last_entropy() const { return last_entropy_; }
    double last_total() const { return last_total_; }

private:
    ActorCritic* actor_;
    AgentHyperparams hp_;
    AdamW opt_;
    double last_policy_loss_ = 0.0, last_value_loss_ = 0.0, last_entropy_ = 0.0, last_total_ = 0.0;
};

struct AgentPhaseResult {
    ActorCritic actor;
    std::vector<MetricsRecord> records;
    PLRBuffer buffer{PLRBufferConfig{}};
};

inline AgentPhaseResult run_train_agent(const RunConfig& cfg, const Dataset& dataset,
                                        const DenoiserModel& wm, const RTModel& rt,
                                        Rng& master, MetricsWriter& metrics,
                                        const WallClock& clock) {
    if (!wm.frozen || !rt.frozen)
        throw Error("run_train_agent: world and reward models must be frozen");
    const EnvSpec spec = cfg.env_spec();
    const HorizonPolicy horizon = cfg.resolved_horizon();
    const int h_cap = std::max(horizon.fixed_h, horizon.h_max);
    SegmentSampler sampler(dataset, cfg.context_len, h_cap);

    Rng init_rng = master.fork("agent.init");
    Rng phase_rng = master.fork("agent.rounds");

    ImaginationConfig icfg;
    icfg.schedule = cfg.schedule;
    icfg.gamma = cfg.hp.gamma;
    icfg.reward_decode = cfg.reward_decode;
    icfg.rebinarize = cfg.rebinarize;
    icfg.layout = {spec.grid_size, spec.channels};
    icfg.sampler_churn = cfg.sampler_churn;

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.agent_lr;
    opt_cfg.weight_decay = cfg.agent_weight_decay;
    opt_cfg.clip_norm = cfg.clip_norm;

    AgentPhaseResult result{make_agent(cfg, init_rng), {}, PLRBuffer(cfg.plr)};
    ActorCritic& actor = result.actor;
    AgentTrainer trainer(actor, cfg.hp, opt_cfg);

    CurriculumConfig ccfg;
    ccfg.variant = cfg.score_variant;
    ccfg.gamma = cfg.hp.gamma;
    ccfg.lam = cfg.hp.lam;
    ccfg.replay_reimagine = cfg.replay_reimagine;
    ccfg.explore_train = cfg.explore_train;

    ImagineFn imagine_fn = [&](const ConditioningBuffer& ctx, int h) {
        return imagine(wm, rt, actor, ctx, h, icfg, phase_rng);
    };
    TrainFn train_fn = [&](const ImaginedTrajectory& traj) { return trainer.train(traj); };

    for (int epoch = 0; epoch < cfg.agent_epochs; ++epoch) {
        double acc_policy = 0, acc_value = 0, acc_entropy = 0, acc_total = 0;
        double acc_h = 0, acc_replay_h = 0, acc_len = 0, acc_return = 0;
        int trained_rounds = 0, replay_rounds = 0, explore_rounds = 0;
        for (int s = 0; s < cfg.agent_steps_per_epoch; ++s) {
            if (cfg.mode == CurriculumMode::Plr) {
                RoundResult rr = curriculum_round(result.buffer, sampler, horizon, ccfg,
                                                  imagine_fn, train_fn, phase_rng);
                if (rr.explored)
                    ++explore_rounds;
                else {
                    ++replay_rounds;
                    acc_replay_h += rr.horizon;
                }
                acc_h += rr.horizon;
                acc_len += static_cast<double>(rr.traj.length());
                for (double r : rr.traj.rewards) acc_return += r;
                if (rr.trained) {
                    ++trained_rounds;
                    acc_policy += trainer.last_policy_loss();
                    acc_value += trainer.last_value_loss();
                    acc_entropy += trainer.last_entropy();
                    acc_total += trainer.last_total();
                }
            } else {
                const ConditioningBuffer ctx = initial_context_from_dataset(sampler, phase_rng);
                const int h = sample_horizon(horizon, phase_rng);
                ImaginedTrajectory traj = imagine_fn(ctx, h);
                trainer.train(traj);
                ++trained_rounds;
                acc_h += h;
                acc_len += static_cast<double>(traj.length());
                for (double r : traj.rewards) acc_return += r;
                acc_policy += trainer.last_policy_loss();
                acc_value += trainer.last_value_loss();
                acc_entropy += trainer.last_entropy();
                acc_total += trainer.last_total();
            }
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        rec.phase = "agent";
        const double n_rounds = static_cast<double>(cfg.agent_steps_per_epoch);
        if (trained_rounds > 0) {
            rec.losses["policy"] = acc_policy / trained_rounds;
            rec.losses["value"] = acc_value / trained_rounds;
            rec.losses["entropy"] = acc_entropy / trained_rounds;
            rec.losses["total"] = acc_total / trained_rounds;
        }
        rec.losses["imagined_return"] = acc_return / n_rounds;
        rec.losses["imagined_length"] = acc_len / n_rounds;
        if (cfg.mode != CurriculumMode::Fixed) rec.mean_sampled_horizon = acc_h / n_rounds;
        if (cfg.mode == CurriculumMode::Plr) {
            rec.explore_fraction = static_cast<double>(explore_rounds) / n_rounds;
            if (replay_rounds > 0) rec.mean_replayed_horizon = acc_replay_h / replay_rounds;
            const auto stats = result.buffer.score_stats();
            rec.buffer_score_min = stats.min;
            rec.buffer_score_mean = stats.mean;
            rec.buffer_score_max = stats.max;
        }
        const bool eval_now = cfg.eval_every > 0 &&
                              ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.agent_epochs);
        if (eval_now) {
            Rng eval_rng = master.fork(detail::str("eval.", epoch));
            const auto train_seeds = train_level_seeds(cfg, cfg.eval_levels);
            const auto test_seeds = test_level_seeds(cfg, cfg.eval_levels);
            rec.eval_return_train =
                evaluate_policy(actor, spec, train_seeds, cfg.eval_episodes, eval_rng,
                                cfg.eval_sampled)
                    .mean_return;
            rec.eval_return_test =
                evaluate_policy(actor, spec, test_seeds, cfg.eval_episodes, eval_rng,
                                cfg.eval_sampled)
                    .mean_return;
        }
        rec.wall_time = clock.seconds();
        metrics.write(rec);
        result.records.push_back(std::move(rec));
    }
    return result;
}

// --- behavior cloning baseline --------------------------------------------------

inline ActorCritic bc_baseline(const RunConfig& cfg, const Dataset& dataset, Rng& master,
                               MetricsWriter& metrics, const WallClock& clock,
                               std::vector<double>* accuracy_curve = nullptr) {
    Rng init_rng = master.fork("bc.init");
    Rng train_rng = master.fork("bc.rounds");
    ActorCritic policy = make_agent(cfg, init_rng, /*with_value=*/false);
    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.bc_lr;
    opt_cfg.weight_decay = 0.0;
    opt_cfg.clip_norm = cfg.clip_norm;
    AdamW opt(policy.params(), opt_cfg);
    SegmentSampler sampler(dataset, cfg.context_len, 15);
    for (int epoch = 0; epoch < cfg.bc_epochs; ++epoch) {
        double acc_loss = 0, correct = 0, labeled = 0;
        for (int s = 0; s < cfg.bc_steps_per_epoch; ++s) {
            std::vector<Segment> batch;
            for (int b = 0; b < cfg.bc_batch; ++b) batch.push_back(sampler.sample(train_rng));
            BcBatchLoss step;
            build_bc_batch_loss(step, policy, batch);
            const double loss = step.graph.scalar(step.loss);
            if (!std::isfinite(loss)) throw Error("bc_baseline: non-finite loss");
            step.graph.backward(step.loss);
            opt.step(step.graph);
            acc_loss += loss;
            correct += step.correct;
            labeled += step.labeled;
        }
        MetricsRecord rec;
        rec.epoch = epoch;
        rec.phase = "bc";
        rec.losses["nll"] = acc_loss / cfg.bc_steps_per_epoch;
        rec.losses["accuracy"] = labeled > 0 ? correct / labeled : 0.0;
        rec.wall_time = clock.seconds();
        metrics.write(rec);
        if (accuracy_curve) accuracy_curve->push_back(rec.losses["accuracy"]);
    }
    return policy;
}

// --- evaluation reports -----------------------------------------------------------

struct FinalEval {
    double train_return = 0.0;
    double test_return = 0.0;
};

inline FinalEval final_evaluation(const RunConfig& cfg, const ActorCritic& actor, Rng& master,
                                  const std::string& report_path) {
    const EnvSpec spec = cfg.env_spec();
    Rng rng_train = master.fork("final_eval.train");
    Rng rng_test = master.fork("final_eval.test");
    const auto train_seeds = train_level_seeds(cfg, cfg.final_eval_levels);
    const auto test_seeds = test_level_seeds(cfg, cfg.final_eval_levels);
    const EvalReport train_rep = evaluate_policy(actor, spec, train_seeds,
                                                 cfg.final_eval_episodes, rng_train,
                                                 cfg.eval_sampled);
    const EvalReport test_rep = evaluate_policy(actor, spec, test_seeds,
                                                cfg.final_eval_episodes, rng_test,
                                                cfg.eval_sampled);
    if (!report_path.empty()) {
        std::ofstream os(report_path, std::ios::trunc);
        if (!os) throw Error("final_evaluation: cannot open " + report_path);
        auto dump = [&os](const char* split, const EvalReport& rep) {
            for (size_t i = 0; i < rep.level_seeds.size(); ++i) {
                nlohmann::json j;
                j["split"] = split;
                j["level"] = rep.level_seeds[i];
                j["mean_return"] = rep.level_returns[i];
                os << j.dump() << "\n";
            }
            nlohmann::json j;
            j["split"] = split;
            j["mean_return"] = rep.mean_return;
            j["levels"] = rep.level_seeds.size();
            os << j.dump() << "\n";
        };
        dump("train", train_rep);
        dump("test", test_rep);
    }
    return {train_rep.mean_return, test_rep.mean_return};
}

inline void export_buffer_snapshot(const PLRBuffer& buffer, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("export_buffer_snapshot: cannot open " + path);
    for (const auto& e : buffer.entries()) {
        nlohmann::json j;
        j["score"] = e.score;
        j["horizon"] = e.horizon;
        j["last_sampled"] = e.last_sampled;
        j["insert_time"] = e.insert_time;
        os << j.dump() << "\n";
    }
}

// --- full pipeline -------------------------------------------------------------

struct PipelineResult {
    FinalEval eval;
    uint64_t wm_checksum = 0;
    uint64_t rt_checksum = 0;
};

inline PipelineResult run_pipeline(const RunConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const WallClock clock;
    Rng master(cfg.seed);
    MetricsWriter metrics(out_dir + "/metrics.jsonl");

    Rng data_rng = master.fork("data");
    Dataset dataset = run_collect(cfg, data_rng);
    write_dataset(dataset, out_dir + "/dataset.bin");

    Rng wm_rng = master.fork("wm");
    DenoiserModel wm = run_train_wm(cfg, dataset, wm_rng, metrics, clock);
    save_world_model(out_dir + "/wm.ckpt", wm);

    Rng rt_rng = master.fork("rt");
    RTModel rt = run_train_rt(cfg, dataset, rt_rng, metrics, clock);
    save_rt_model(out_dir + "/rt.ckpt", rt);

    PipelineResult out;
    const uint64_t wm_sum_before = params_checksum(wm.params());
    const uint64_t rt_sum_before = params_checksum(rt.params());

    AgentPhaseResult agent = run_train_agent(cfg, dataset, wm, rt, master, metrics, clock);
    save_agent(out_dir + "/agent.ckpt", agent.actor);
    if (cfg.mode == CurriculumMode::Plr)
        export_buffer_snapshot(agent.buffer, out_dir + "/buffer.jsonl");

    out.wm_checksum = params_checksum(wm.params());
    out.rt_checksum = params_checksum(rt.params());
    if (out.wm_checksum != wm_sum_before || out.rt_checksum != rt_sum_before)
        throw Error("run_pipeline: frozen model changed during agent training");

    out.eval = final_evaluation(cfg, agent.actor, master, out_dir + "/eval.jsonl");
    return out;
}

// --- ablation -------------------------------------------------------------------

struct AblationRow {
    std::string mode;
    uint64_t seed = 0;
    double train_return = 0.0;
    double test_return = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;

    std::vector<double> test_returns(const std::string& mode) const {
        std::vector<double> out;
        for (const auto& r : rows)
            if (r.mode == mode) out.push_back(r.test_return);
        return out;
    }
    double mean_test_return(const std::string& mode) const {
        const auto v = test_returns(mode);
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
};

// Per seed: one dataset and one frozen world/reward model pair shared by all
// three curriculum arms (plus the BC reference), isolating the curriculum as
// the only variable.
inline AblationResult run_ablation(const RunConfig& base_cfg, const std::vector<uint64_t>& seeds,
                                   const std::string& out_dir, bool with_bc = true) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    AblationResult result;
    const WallClock clock;
    for (uint64_t seed : seeds) {
        RunConfig cfg = base_cfg;
        cfg.seed = seed;
        const std::string seed_dir = out_dir + "/seed_" + std::to_string(seed);
        fs::create_directories(seed_dir);
        Rng master(cfg.seed);
        MetricsWriter shared_metrics(seed_dir + "/metrics_models.jsonl");

        Rng data_rng = master.fork("data");
        Dataset dataset = run_collect(cfg, data_rng);
        write_dataset(dataset, seed_dir + "/dataset.bin");
        Rng wm_rng = master.fork("wm");
        DenoiserModel wm = run_train_wm(cfg, dataset, wm_rng, shared_metrics, clock);
        save_world_model(seed_dir + "/wm.ckpt", wm);
        Rng rt_rng = master.fork("rt");
        RTModel rt = run_train_rt(cfg, dataset, rt_rng, shared_metrics, clock);
        save_rt_model(seed_dir + "/rt.ckpt", rt);

        for (CurriculumMode mode :
             {CurriculumMode::Fixed, CurriculumMode::Random, CurriculumMode::Plr}) {
            RunConfig arm = cfg;
            arm.mode = mode;
            const std::string name = curriculum_mode_name(mode);
            MetricsWriter metrics(seed_dir + "/metrics_" + name + ".jsonl");
            Rng arm_master(cfg.seed);  // identical base streams per arm
            AgentPhaseResult agent =
                run_train_agent(arm, dataset, wm, rt, arm_master, metrics, clock);
            save_agent(seed_dir + "/agent_" + name + ".ckpt", agent.actor);
            if (mode == CurriculumMode::Plr)
                export_buffer_snapshot(agent.buffer, seed_dir + "/buffer.jsonl");
            Rng eval_master(cfg.seed ^ 0x5eedULL);
            const FinalEval ev = final_evaluation(arm, agent.actor, eval_master,
                                                  seed_dir + "/eval_" + name + ".jsonl");
            result.rows.push_back({name, seed, ev.train_return, ev.test_return});
        }

        if (with_bc) {
            MetricsWriter metrics(seed_dir + "/metrics_bc.jsonl");
            Rng bc_master(cfg.seed);
            ActorCritic bc = bc_baseline(cfg, dataset, bc_master, metrics, clock);
            save_agent(seed_dir + "/agent_bc.ckpt", bc);
            Rng eval_master(cfg.seed ^ 0xbcbcULL);
            const FinalEval ev =
                final_evaluation(cfg, bc, eval_master, seed_dir + "/eval_bc.jsonl");
            result.rows.push_back({"bc", seed, ev.train_return, ev.test_return});
        }
    }

    std::ofstream csv(out_dir + "/summary.csv", std::ios::trunc);
    csv << "mode,seed,train_return,test_return\n";
    for (const auto& r : result.rows)
        csv << r.mode << "," << r.seed << "," << r.train_return << "," << r.test_return << "\n";
    return result;
}

}  // namespace imac
