// Command-line driver for the offline imagined-autocurriculum pipeline:
// dataset collection, world-model and reward-model training, agent training
// under a fixed/random/plr curriculum, evaluation, and the ablation matrix.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "imac/pipeline.hpp"

namespace fs = std::filesystem;
using namespace imac;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    int64_t seed = -1;
    std::string mode;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_mode = true) {
    cmd->add_option("--config", args.config_path, "run configuration file");
    cmd->add_option("--out", args.out_dir, "artifact directory");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)");
    if (with_mode)
        cmd->add_option("--mode", args.mode, "curriculum mode: fixed|random|plr")
            ->check(CLI::IsMember({"fixed", "random", "plr"}));
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : RunConfig::from_file(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
    if (!args.mode.empty()) cfg.mode = curriculum_mode_from_string(args.mode);
    return cfg;
}

void require_artifact(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw Error("missing artifact: " + path + " (produce it with `imac " + producer + "`)");
}

int cmd_collect(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    fs::create_directories(args.out_dir);
    Rng master(cfg.seed);
    Rng data_rng = master.fork("data");
    Dataset ds = run_collect(cfg, data_rng);
    write_dataset(ds, args.out_dir + "/dataset.bin");
    std::cout << "collected " << ds.transition_count() << " transitions over "
              << ds.episodes.size() << " episodes -> " << args.out_dir << "/dataset.bin\n";
    return 0;
}

int cmd_train_wm(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    require_artifact(args.out_dir + "/dataset.bin", "collect-data");
    Dataset ds = read_dataset(args.out_dir + "/dataset.bin");
    WallClock clock;
    MetricsWriter metrics(args.out_dir + "/metrics_wm.jsonl");
    Rng master(cfg.seed);
    Rng wm_rng = master.fork("wm");
    DenoiserModel wm = run_train_wm(cfg, ds, wm_rng, metrics, clock);
    save_world_model(args.out_dir + "/wm.ckpt", wm);
    std::cout << "world model trained (" << cfg.wm_epochs * cfg.wm_steps_per_epoch
              << " steps) -> " << args.out_dir << "/wm.ckpt\n";
    return 0;
}

int cmd_train_rt(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    require_artifact(args.out_dir + "/dataset.bin", "collect-data");
    Dataset ds = read_dataset(args.out_dir + "/dataset.bin");
    WallClock clock;
    MetricsWriter metrics(args.out_dir + "/metrics_rt.jsonl");
    Rng master(cfg.seed);
    Rng rt_rng = master.fork("rt");
    RTModel rt = run_train_rt(cfg, ds, rt_rng, metrics, clock);
    save_rt_model(args.out_dir + "/rt.ckpt", rt);
    std::cout << "reward/termination model trained -> " << args.out_dir << "/rt.ckpt\n";
    return 0;
}

int cmd_train_agent(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    require_artifact(args.out_dir + "/dataset.bin", "collect-data");
    require_artifact(args.out_dir + "/wm.ckpt", "train-wm");
    require_artifact(args.out_dir + "/rt.ckpt", "train-rt");
    Dataset ds = read_dataset(args.out_dir + "/dataset.bin");
    DenoiserModel wm = load_world_model(args.out_dir + "/wm.ckpt", cfg);
    RTModel rt = load_rt_model(args.out_dir + "/rt.ckpt", cfg);
    WallClock clock;
    MetricsWriter metrics(args.out_dir + "/metrics_agent.jsonl");
    Rng master(cfg.seed);
    AgentPhaseResult agent = run_train_agent(cfg, ds, wm, rt, master, metrics, clock);
    save_agent(args.out_dir + "/agent.ckpt", agent.actor);
    if (cfg.mode == CurriculumMode::Plr)
        export_buffer_snapshot(agent.buffer, args.out_dir + "/buffer.jsonl");
    std::cout << "agent trained (" << curriculum_mode_name(cfg.mode) << ") -> " << args.out_dir
              << "/agent.ckpt\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    require_artifact(args.out_dir + "/agent.ckpt", "train-agent");
    ActorCritic agent = load_agent(args.out_dir + "/agent.ckpt", cfg);
    Rng master(cfg.seed);
    FinalEval ev = final_evaluation(cfg, agent, master, args.out_dir + "/eval.jsonl");
    std::cout << "train return " << ev.train_return << ", test return " << ev.test_return
              << " -> " << args.out_dir << "/eval.jsonl\n";
    return 0;
}

int cmd_run_all(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    PipelineResult res = run_pipeline(cfg, args.out_dir);
    std::cout << "pipeline complete: train return " << res.eval.train_return << ", test return "
              << res.eval.test_return << " (artifacts in " << args.out_dir << ")\n";
    return 0;
}

int cmd_ablation(const CommonArgs& args, const std::string& seeds_csv, bool no_bc) {
    RunConfig cfg = load_config(args);
    std::vector<uint64_t> seeds;
    std::istringstream ss(seeds_csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw Error("ablation: provide --seeds, e.g. --seeds 1,2,3");

    AblationResult res = run_ablation(cfg, seeds, args.out_dir, !no_bc);

    std::vector<std::string> modes = {"fixed", "random", "plr"};
    if (!no_bc) modes.push_back("bc");
    std::cout << "\nmode      mean_test  std_test   (n=" << seeds.size() << " seeds)\n";
    for (const auto& mode : modes) {
        const auto v = res.test_returns(mode);
        double mean = 0, sq = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) sq += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
        std::cout << mode << std::string(10 - mode.size(), ' ') << mean << "      " << sd << "\n";
    }
    std::cout << "summary -> " << args.out_dir << "/summary.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline world-model curriculum pipeline"};
    app.require_subcommand(1);

    CommonArgs collect_args, wm_args, rt_args, agent_args, eval_args, all_args, abl_args;
    std::string seeds_csv = "1,2,3";
    bool no_bc = false;

    add_common(app.add_subcommand("collect-data", "collect the mixed offline dataset"),
               collect_args, false);
    add_common(app.add_subcommand("train-wm", "phase 1: train the diffusion world model"),
               wm_args, false);
    add_common(app.add_subcommand("train-rt", "phase 2: train the reward/termination ensemble"),
               rt_args, false);
    add_common(app.add_subcommand("train-agent", "phase 3: train the actor-critic in imagination"),
               agent_args);
    add_common(app.add_subcommand("eval", "evaluate a trained agent on train/test levels"),
               eval_args);
    add_common(app.add_subcommand("run-all", "run all phases end to end"), all_args);
    auto* abl = app.add_subcommand("ablation", "fixed/random/plr x seeds matrix with summary");
    add_common(abl, abl_args, false);
    abl->add_option("--seeds", seeds_csv, "comma-separated seed list");
    abl->add_flag("--no-bc", no_bc, "skip the behavior-cloning reference");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("collect-data")) return cmd_collect(collect_args);
        if (app.got_subcommand("train-wm")) return cmd_train_wm(wm_args);
        if (app.got_subcommand("train-rt")) return cmd_train_rt(rt_args);
        if (app.got_subcommand("train-agent")) return cmd_train_agent(agent_args);
        if (app.got_subcommand("eval")) return cmd_eval(eval_args);
        if (app.got_subcommand("run-all")) return cmd_run_all(all_args);
        if (app.got_subcommand("ablation")) return cmd_ablation(abl_args, seeds_csv, no_bc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
