#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "imac/agent.hpp"
#include "imac/curriculum.hpp"
#include "imac/env.hpp"
#include "imac/imagination.hpp"
#include "imac/tensor.hpp"
#include "imac/world_model.hpp"

namespace imac {

// Flat "[section]" + "key = value" config text. Every key must be known:
// anything left unread after from_text() is an error.
class ConfigText {
public:
    static ConfigText parse(const std::string& text) {
        ConfigText cfg;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw Error(detail::str("config line ", lineno, ": malformed section header"));
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw Error(detail::str("config line ", lineno, ": expected key = value"));
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw Error(detail::str("config line ", lineno, ": empty key"));
            cfg.values_[section + "." + key] = value;
        }
        return cfg;
    }

    static ConfigText parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw Error("cannot open config file: " + path);
        std::ostringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    std::string get_string(const std::string& s, const std::string& k, std::string def) {
        auto it = values_.find(s + "." + k);
        if (it == values_.end()) return def;
        consumed_.insert(it->first);
        return it->second;
    }
    int64_t get_int(const std::string& s, const std::string& k, int64_t def) {
        auto it = values_.find(s + "." + k);
        if (it == values_.end()) return def;
        consumed_.insert(it->first);
        return parse_int(it->second, it->first);
    }
    double get_double(const std::string& s, const std::string& k, double def) {
        auto it = values_.find(s + "." + k);
        if (it == values_.end()) return def;
        consumed_.insert(it->first);
        try {
            size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw Error("");
            return v;
        } catch (...) {
            throw Error("config: bad number for " + it->first + ": " + it->second);
        }
    }
    bool get_bool(const std::string& s, const std::string& k, bool def) {
        auto it = values_.find(s + "." + k);
        if (it == values_.end()) return def;
        consumed_.insert(it->first);
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw Error("config: bad bool for " + it->first + ": " + it->second);
    }
    std::vector<int64_t> get_int_list(const std::string& s, const std::string& k,
                                      std::vector<int64_t> def) {
        auto it = values_.find(s + "." + k);
        if (it == values_.end()) return def;
        consumed_.insert(it->first);
        std::vector<int64_t> out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_int(item, it->first));
        }
        return out;
    }

    void reject_unknown() const {
        std::string unknown;
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
        if (!unknown.empty()) throw Error("config: unknown keys: " + unknown);
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static int64_t parse_int(const std::string& v, const std::string& key) {
        try {
            size_t pos = 0;
            const int64_t x = std::stoll(v, &pos, 0);
            if (pos != v.size()) throw Error("");
            return x;
        } catch (...) {
            throw Error("config: bad integer for " + key + ": " + v);
        }
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

enum class CurriculumMode { Fixed, Random, Plr };

inline CurriculumMode curriculum_mode_from_string(const std::string& s) {
    if (s == "fixed") return CurriculumMode::Fixed;
    if (s == "random") return CurriculumMode::Random;
    if (s == "plr") return CurriculumMode::Plr;
    throw Error("unknown curriculum mode: " + s + " (expected fixed|random|plr)");
}
inline const char* curriculum_mode_name(CurriculumMode m) {
    switch (m) {
        case CurriculumMode::Fixed: return "fixed";
        case CurriculumMode::Random: return "random";
        default: return "plr";
    }
}

// All knobs of the three-phase pipeline. Desk-scale defaults; where the
// reference setting differs it is noted inline.
struct RunConfig {
    // [env]
    EnvId env_id = EnvId::GridMaze;
    int grid_size = 7;
    int max_steps = 64;

    // [data]  (train levels 0..N-1, test levels N..N+M-1)
    int64_t train_level_count = 40;
    int64_t test_level_count = 100;
    int64_t total_transitions = 99000;

    // [wm]  (reference: lr 4e-5, 1000 epochs x 100 steps; desk scale below)
    std::vector<int64_t> wm_hidden = {512, 512};
    double sigma_data = 0.5;
    bool wm_residual = false;
    NoiseSchedule schedule{};
    double sampler_churn = 0.0;
    int wm_epochs = 50;
    int wm_steps_per_epoch = 100;
    int wm_batch = 32;
    double wm_lr = 1e-3;
    double wm_weight_decay = 1e-2;

    // [rt]
    int rt_ensemble = 10;
    int64_t rt_feature = 128;
    int64_t rt_hidden = 128;
    int rt_epochs = 20;
    int rt_steps_per_epoch = 100;
    int rt_batch = 32;
    double rt_lr = 1e-3;
    double rt_weight_decay = 1e-2;
    RewardDecode reward_decode = RewardDecode::Argmax;

    // [agent]  (reference: lr 4e-5, wd 5e-5, 1000 epochs x 100 steps)
    AgentHyperparams hp{};
    int64_t agent_feature = 128;
    int64_t agent_hidden = 128;
    int agent_epochs = 300;
    int agent_steps_per_epoch = 50;
    double agent_lr = 1e-3;
    double agent_weight_decay = 5e-5;
    bool rebinarize = true;  // soft frames let the policy farm false rewards

    // [horizon]
    std::string horizon_mode = "auto";  // auto: fixed arm -> fixed, else random
    HorizonPolicy horizon{};

    // [curriculum]
    CurriculumMode mode = CurriculumMode::Plr;
    ScoreVariant score_variant = ScoreVariant::Eq7;
    PLRBufferConfig plr{};
    bool replay_reimagine = true;
    bool explore_train = true;

    // [bc]
    int bc_epochs = 10;
    int bc_steps_per_epoch = 100;
    int bc_batch = 32;
    double bc_lr = 1e-3;

    // [eval]
    int eval_every = 10;
    int eval_levels = 20;
    int eval_episodes = 2;
    bool eval_sampled = true;
    int final_eval_levels = 100;
    int final_eval_episodes = 2;

    // [run]
    uint64_t seed = 1;
    double clip_norm = 10.0;
    int context_len = 4;

    EnvSpec env_spec() const {
        EnvSpec spec;
        spec.env_id = env_id;
        spec.grid_size = grid_size;
        spec.max_steps = max_steps;
        spec.validate();
        return spec;
    }

    HorizonPolicy resolved_horizon() const {
        HorizonPolicy h = horizon;
        if (horizon_mode == "auto")
            h.mode = mode == CurriculumMode::Fixed ? HorizonPolicy::Mode::Fixed
                                                   : HorizonPolicy::Mode::Random;
        else if (horizon_mode == "fixed")
            h.mode = HorizonPolicy::Mode::Fixed;
        else if (horizon_mode == "random")
            h.mode = HorizonPolicy::Mode::Random;
        else
            throw Error("config: horizon mode must be auto|fixed|random");
        h.validate();
        return h;
    }

    static RunConfig from_text(const std::string& text) {
        ConfigText c = ConfigText::parse(text);
        RunConfig r;
        const std::string env = c.get_string("env", "id", env_id_name(r.env_id));
        r.env_id = env_id_from_name(env);
        r.grid_size = static_cast<int>(c.get_int("env", "grid_size", r.grid_size));
        r.max_steps = static_cast<int>(c.get_int("env", "max_steps", r.max_steps));

        r.train_level_count = c.get_int("data", "train_level_count", r.train_level_count);
        r.test_level_count = c.get_int("data", "test_level_count", r.test_level_count);
        r.total_transitions = c.get_int("data", "total_transitions", r.total_transitions);

        r.wm_hidden = c.get_int_list("wm", "hidden", r.wm_hidden);
        r.sigma_data = c.get_double("wm", "sigma_data", r.sigma_data);
        r.wm_residual = c.get_bool("wm", "residual", r.wm_residual);
        r.schedule.p_mean = c.get_double("wm", "p_mean", r.schedule.p_mean);
        r.schedule.p_std = c.get_double("wm", "p_std", r.schedule.p_std);
        r.schedule.sigma_min = c.get_double("wm", "sigma_min", r.schedule.sigma_min);
        r.schedule.sigma_max = c.get_double("wm", "sigma_max", r.schedule.sigma_max);
        r.schedule.rho = c.get_double("wm", "rho", r.schedule.rho);
        r.schedule.n_steps = static_cast<int>(c.get_int("wm", "n_steps", r.schedule.n_steps));
        r.sampler_churn = c.get_double("wm", "churn", r.sampler_churn);
        r.wm_epochs = static_cast<int>(c.get_int("wm", "epochs", r.wm_epochs));
        r.wm_steps_per_epoch = static_cast<int>(c.get_int("wm", "steps_per_epoch", r.wm_steps_per_epoch));
        r.wm_batch = static_cast<int>(c.get_int("wm", "batch_size", r.wm_batch));
        r.wm_lr = c.get_double("wm", "lr", r.wm_lr);
        r.wm_weight_decay = c.get_double("wm", "weight_decay", r.wm_weight_decay);

        r.rt_ensemble = static_cast<int>(c.get_int("rt", "ensemble_size", r.rt_ensemble));
        r.rt_feature = c.get_int("rt", "feature_dim", r.rt_feature);
        r.rt_hidden = c.get_int("rt", "hidden_dim", r.rt_hidden);
        r.rt_epochs = static_cast<int>(c.get_int("rt", "epochs", r.rt_epochs));
        r.rt_steps_per_epoch = static_cast<int>(c.get_int("rt", "steps_per_epoch", r.rt_steps_per_epoch));
        r.rt_batch = static_cast<int>(c.get_int("rt", "batch_size", r.rt_batch));
        r.rt_lr = c.get_double("rt", "lr", r.rt_lr);
        r.rt_weight_decay = c.get_double("rt", "weight_decay", r.rt_weight_decay);
        const std::string decode = c.get_string("rt", "reward_decode", "argmax");
        if (decode == "argmax")
            r.reward_decode = RewardDecode::Argmax;
        else if (decode == "expected")
            r.reward_decode = RewardDecode::Expected;
        else
            throw Error("config: rt.reward_decode must be argmax|expected");

        r.hp.gamma = c.get_double("agent", "gamma", r.hp.gamma);
        r.hp.lam = c.get_double("agent", "lambda", r.hp.lam);
        r.hp.entropy_weight = c.get_double("agent", "entropy_weight", r.hp.entropy_weight);
        r.hp.value_coeff = c.get_double("agent", "value_coeff", r.hp.value_coeff);
        r.agent_feature = c.get_int("agent", "feature_dim", r.agent_feature);
        r.agent_hidden = c.get_int("agent", "hidden_dim", r.agent_hidden);
        r.agent_epochs = static_cast<int>(c.get_int("agent", "epochs", r.agent_epochs));
        r.agent_steps_per_epoch =
            static_cast<int>(c.get_int("agent", "steps_per_epoch", r.agent_steps_per_epoch));
        r.agent_lr = c.get_double("agent", "lr", r.agent_lr);
        r.agent_weight_decay = c.get_double("agent", "weight_decay", r.agent_weight_decay);
        r.rebinarize = c.get_bool("agent", "rebinarize", r.rebinarize);

        r.horizon_mode = c.get_string("horizon", "mode", r.horizon_mode);
        r.horizon.fixed_h = static_cast<int>(c.get_int("horizon", "fixed_h", r.horizon.fixed_h));
        r.horizon.h_min = static_cast<int>(c.get_int("horizon", "h_min", r.horizon.h_min));
        r.horizon.h_max = static_cast<int>(c.get_int("horizon", "h_max", r.horizon.h_max));

        r.mode = curriculum_mode_from_string(
            c.get_string("curriculum", "mode", curriculum_mode_name(r.mode)));
        const std::string variant = c.get_string("curriculum", "variant", "eq7");
        if (variant == "eq7")
            r.score_variant = ScoreVariant::Eq7;
        else if (variant == "mean")
            r.score_variant = ScoreVariant::MeanPositive;
        else
            throw Error("config: curriculum.variant must be eq7|mean");
        r.plr.buffer_size = static_cast<size_t>(c.get_int("curriculum", "buffer_size",
                                                          static_cast<int64_t>(r.plr.buffer_size)));
        r.plr.staleness_coeff = c.get_double("curriculum", "staleness_coeff", r.plr.staleness_coeff);
        r.plr.temperature = c.get_double("curriculum", "temperature", r.plr.temperature);
        r.plr.replay_prob = c.get_double("curriculum", "replay_prob", r.plr.replay_prob);
        r.replay_reimagine = c.get_bool("curriculum", "reimagine", r.replay_reimagine);
        r.explore_train = c.get_bool("curriculum", "explore_train", r.explore_train);

        r.bc_epochs = static_cast<int>(c.get_int("bc", "epochs", r.bc_epochs));
        r.bc_steps_per_epoch = static_cast<int>(c.get_int("bc", "steps_per_epoch", r.bc_steps_per_epoch));
        r.bc_batch = static_cast<int>(c.get_int("bc", "batch_size", r.bc_batch));
        r.bc_lr = c.get_double("bc", "lr", r.bc_lr);

        r.eval_every = static_cast<int>(c.get_int("eval", "every_epochs", r.eval_every));
        r.eval_levels = static_cast<int>(c.get_int("eval", "levels", r.eval_levels));
        r.eval_episodes = static_cast<int>(c.get_int("eval", "episodes_per_level", r.eval_episodes));
        r.eval_sampled = c.get_bool("eval", "sampled", r.eval_sampled);
        r.final_eval_levels = static_cast<int>(c.get_int("eval", "final_levels", r.final_eval_levels));
        r.final_eval_episodes =
            static_cast<int>(c.get_int("eval", "final_episodes_per_level", r.final_eval_episodes));

        r.seed = static_cast<uint64_t>(c.get_int("run", "seed", static_cast<int64_t>(r.seed)));
        r.clip_norm = c.get_double("run", "clip_norm", r.clip_norm);
        r.context_len = static_cast<int>(c.get_int("run", "context_len", r.context_len));

        c.reject_unknown();
        r.env_spec();
        r.resolved_horizon();
        if (r.context_len < 1) throw Error("config: context_len must be >= 1");
        return r;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw Error("cannot open config file: " + path);
        std::ostringstream ss;
        ss << is.rdbuf();
        return from_text(ss.str());
    }
};

}  // namespace imac
