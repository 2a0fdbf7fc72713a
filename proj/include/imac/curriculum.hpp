#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "imac/agent.hpp"
#include "imac/imagination.hpp"
#include "imac/rng.hpp"
#include "imac/tensor.hpp"

namespace imac {

// Prioritized replay over imagined initial contexts: buffer entries carry an
// initial context, a horizon, a learning-potential score and a staleness
// counter; draws mix a rank-based score distribution with a staleness
// distribution.

enum class ScoreVariant { Eq7, MeanPositive };

// Eq7: (1/T) * sum_t sum_{k>=t} (gamma*lambda)^{k-t} * max(0, delta_k),
// evaluated with a suffix recursion. MeanPositive: (1/T) * sum max(0, delta).
inline double plr_score(std::span<const double> deltas, double gamma, double lam,
                        ScoreVariant variant) {
    const size_t T = deltas.size();
    if (T == 0) throw Error("plr_score: empty TD-error sequence");
    if (variant == ScoreVariant::MeanPositive) {
        double s = 0.0;
        for (double d : deltas) s += std::max(0.0, d);
        return s / static_cast<double>(T);
    }
    const double gl = gamma * lam;
    double suffix = 0.0;
    double total = 0.0;
    for (size_t i = T; i-- > 0;) {
        suffix = std::max(0.0, deltas[i]) + gl * suffix;
        total += suffix;
    }
    return total / static_cast<double>(T);
}

inline double plr_score(const ImaginedTrajectory& traj, double gamma, double lam,
                        ScoreVariant variant) {
    return plr_score(traj.deltas, gamma, lam, variant);
}

struct PLREntry {
    ConditioningBuffer context;
    int horizon = 0;
    double score = 0.0;
    int64_t last_sampled = 0;  // global counter value at the last draw
    int64_t insert_time = 0;   // global counter value at insertion
    uint64_t insert_seq = 0;   // monotone; breaks score ties (oldest first)
    std::optional<ImaginedTrajectory> stored_traj;  // kept only when replaying stale rollouts
};

struct PLRBufferConfig {
    size_t buffer_size = 2500;
    double staleness_coeff = 0.1;  // rho
    double temperature = 0.1;      // beta_T of the rank distribution
    double replay_prob = 0.5;
};

class PLRBuffer {
public:
    explicit PLRBuffer(PLRBufferConfig cfg) : cfg_(cfg) {
        if (cfg.buffer_size == 0) throw Error("PLRBuffer: buffer_size must be > 0");
        if (cfg.temperature <= 0.0) throw Error("PLRBuffer: temperature must be > 0");
        if (cfg.staleness_coeff < 0.0 || cfg.staleness_coeff > 1.0)
            throw Error("PLRBuffer: staleness_coeff in [0,1]");
    }

    const PLRBufferConfig& config() const { return cfg_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    bool full() const { return entries_.size() >= cfg_.buffer_size; }
    int64_t counter() const { return counter_; }
    const std::vector<PLREntry>& entries() const { return entries_; }
    PLREntry& entry(size_t i) { return entries_[i]; }

    // Append while below capacity; afterwards replace the lowest-scoring entry
    // (oldest among ties) only if the candidate scores strictly higher.
    bool insert(PLREntry entry) {
        if (!std::isfinite(entry.score) || entry.score < 0.0)
            throw Error("PLRBuffer::insert: score must be finite and >= 0");
        entry.insert_time = counter_;
        entry.last_sampled = counter_;
        entry.insert_seq = next_insert_seq_++;
        if (!full()) {
            entries_.push_back(std::move(entry));
            return true;
        }
        size_t worst = 0;
        for (size_t i = 1; i < entries_.size(); ++i) {
            if (entries_[i].score < entries_[worst].score ||
                (entries_[i].score == entries_[worst].score &&
                 entries_[i].insert_seq < entries_[worst].insert_seq))
                worst = i;
        }
        if (entry.score <= entries_[worst].score) return false;
        entries_[worst] = std::move(entry);
        return true;
    }

    // Mixture (1-rho)*P_S + rho*P_C. P_S is rank-based with rank 1 = highest
    // score (ties ordered by insertion); P_C is proportional to staleness.
    // Degenerate all-zero weights fall back to uniform within the component.
    std::vector<double> replay_probabilities() const {
        if (entries_.empty()) throw Error("PLRBuffer: empty buffer");
        const size_t n = entries_.size();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (entries_[a].score != entries_[b].score)
                return entries_[a].score > entries_[b].score;
            return entries_[a].insert_seq < entries_[b].insert_seq;
        });
        std::vector<double> p_score(n, 0.0);
        double z = 0.0;
        for (size_t r = 0; r < n; ++r) {
            const double w = std::pow(static_cast<double>(r + 1), -1.0 / cfg_.temperature);
            p_score[order[r]] = w;
            z += w;
        }
        for (auto& v : p_score) v /= z;

        std::vector<double> p_stale(n, 0.0);
        double zs = 0.0;
        for (size_t i = 0; i < n; ++i) {
            p_stale[i] = static_cast<double>(counter_ - entries_[i].last_sampled);
            zs += p_stale[i];
        }
        if (zs > 0.0)
            for (auto& v : p_stale) v /= zs;
        else
            for (auto& v : p_stale) v = 1.0 / static_cast<double>(n);

        std::vector<double> p(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            p[i] = (1.0 - cfg_.staleness_coeff) * p_score[i] + cfg_.staleness_coeff * p_stale[i];
        return p;
    }

    size_t sample_replay(Rng& rng) {
        const auto p = replay_probabilities();
        const size_t i = rng.categorical(p);
        entries_[i].last_sampled = counter_;
        counter_ += 1;
        return i;
    }

    struct ScoreStats {
        double min = 0.0, mean = 0.0, max = 0.0;
    };
    ScoreStats score_stats() const {
        ScoreStats s;
        if (entries_.empty()) return s;
        s.min = s.max = entries_[0].score;
        double acc = 0.0;
        for (const auto& e : entries_) {
            s.min = std::min(s.min, e.score);
            s.max = std::max(s.max, e.score);
            acc += e.score;
        }
        s.mean = acc / static_cast<double>(entries_.size());
        return s;
    }

private:
    PLRBufferConfig cfg_;
    std::vector<PLREntry> entries_;
    int64_t counter_ = 0;
    uint64_t next_insert_seq_ = 0;
};

struct CurriculumConfig {
    ScoreVariant variant = ScoreVariant::Eq7;
    double gamma = 0.985;
    double lam = 0.95;
    bool replay_reimagine = true;  // false: train on the stored stale rollout
    bool explore_train = true;     // false: explore rounds only feed the buffer
};

struct RoundResult {
    bool explored = false;
    int horizon = 0;
    double score = 0.0;
    bool trained = false;
    ImaginedTrajectory traj;
};

using ImagineFn = std::function<ImaginedTrajectory(const ConditioningBuffer&, int)>;
// Runs one gradient update on the trajectory and returns it with values,
// log-probs and TD errors refreshed under the pre-update parameters.
using TrainFn = std::function<ImaginedTrajectory(const ImaginedTrajectory&)>;

// One PLR round: with probability replay_prob re-draw a buffered entry
// (re-imagining from its stored context by default) and refresh its score;
// otherwise explore from a fresh dataset context and insert the result.
inline RoundResult curriculum_round(PLRBuffer& buffer, const SegmentSampler& sampler,
                                    const HorizonPolicy& horizon_policy,
                                    const CurriculumConfig& cfg, const ImagineFn& imagine_fn,
                                    const TrainFn& train_fn, Rng& rng) {
    RoundResult out;
    const bool want_replay = rng.bernoulli(buffer.config().replay_prob);
    if (want_replay && !buffer.empty()) {
        const size_t idx = buffer.sample_replay(rng);
        PLREntry& entry = buffer.entry(idx);
        out.explored = false;
        out.horizon = entry.horizon;
        if (cfg.replay_reimagine || !entry.stored_traj) {
            out.traj = imagine_fn(entry.context, entry.horizon);
        } else {
            out.traj = *entry.stored_traj;
        }
        out.traj = train_fn(out.traj);
        out.trained = true;
        entry.score = plr_score(out.traj, cfg.gamma, cfg.lam, cfg.variant);
        if (!cfg.replay_reimagine) entry.stored_traj = out.traj;
        out.score = entry.score;
        return out;
    }

    out.explored = true;
    PLREntry entry;
    entry.context = initial_context_from_dataset(sampler, rng);
    entry.horizon = sample_horizon(horizon_policy, rng);
    out.horizon = entry.horizon;
    out.traj = imagine_fn(entry.context, entry.horizon);
    if (cfg.explore_train) {
        out.traj = train_fn(out.traj);
        out.trained = true;
    }
    entry.score = plr_score(out.traj, cfg.gamma, cfg.lam, cfg.variant);
    out.score = entry.score;
    if (!cfg.replay_reimagine) entry.stored_traj = out.traj;
    buffer.insert(std::move(entry));
    return out;
}

}  // namespace imac
