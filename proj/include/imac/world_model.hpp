#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "imac/autodiff.hpp"
#include "imac/dataset.hpp"
#include "imac/nn.hpp"
#include "imac/optim.hpp"
#include "imac/rng.hpp"
#include "imac/tensor.hpp"

namespace imac {

// EDM-style diffusion denoiser for next-observation prediction, conditioned
// on the last L observations and actions. Observations live in [-1, 1] at
// this boundary (cells are 2*bit - 1).

inline double normalize_cell(double raw) { return raw * 2.0 - 1.0; }

inline std::vector<double> normalize_obs(const std::vector<uint8_t>& raw) {
    std::vector<double> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] ? 1.0 : -1.0;
    return out;
}

inline std::vector<double> normalize_obs(const Observation& obs) {
    std::vector<double> out(obs.values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = normalize_cell(obs.values[i]);
    return out;
}

struct EdmCoeffs {
    double c_in = 0.0, c_skip = 0.0, c_out = 0.0, c_noise = 0.0;
};

// Preconditioning identity: c_in^2 * (sigma^2 + sigma_data^2) = 1.
// At sigma = 0 the network contribution vanishes (c_out = 0), so c_noise is
// never consumed there and is pinned to 0.
inline EdmCoeffs edm_precondition(double sigma, double sigma_data) {
    if (sigma < 0.0) throw Error("edm_precondition: sigma must be >= 0");
    if (sigma_data <= 0.0) throw Error("edm_precondition: sigma_data must be > 0");
    const double s2 = sigma * sigma + sigma_data * sigma_data;
    EdmCoeffs c;
    c.c_in = 1.0 / std::sqrt(s2);
    c.c_skip = sigma_data * sigma_data / s2;
    c.c_out = sigma * sigma_data / std::sqrt(s2);
    c.c_noise = sigma > 0.0 ? 0.25 * std::log(sigma) : 0.0;
    return c;
}

inline double edm_loss_weight(double sigma, double sigma_data) {
    const double p = sigma * sigma_data;
    return (sigma * sigma + sigma_data * sigma_data) / (p * p);
}

struct NoiseSchedule {
    double p_mean = -0.4;  // training draw: ln(sigma) ~ N(p_mean, p_std^2)
    double p_std = 1.2;
    double sigma_min = 0.002;
    double sigma_max = 20.0;
    double rho = 7.0;
    int n_steps = 5;

    void validate() const {
        if (!(0.0 < sigma_min && sigma_min < sigma_max))
            throw Error("NoiseSchedule: need 0 < sigma_min < sigma_max");
        if (n_steps < 1) throw Error("NoiseSchedule: n_steps must be >= 1");
        if (rho <= 0.0) throw Error("NoiseSchedule: rho must be > 0");
    }

    // Karras rho-spaced grid, descending, with a trailing 0.
    std::vector<double> sigma_grid() const {
        validate();
        std::vector<double> grid(static_cast<size_t>(n_steps) + 1, 0.0);
        const double a = std::pow(sigma_max, 1.0 / rho);
        const double b = std::pow(sigma_min, 1.0 / rho);
        for (int i = 0; i < n_steps; ++i) {
            const double t = n_steps == 1 ? 0.0
                                          : static_cast<double>(i) / static_cast<double>(n_steps - 1);
            grid[static_cast<size_t>(i)] = std::pow(a + t * (b - a), rho);
        }
        grid[static_cast<size_t>(n_steps)] = 0.0;
        return grid;
    }

    double draw_training_sigma(Rng& rng) const {
        return std::exp(p_mean + p_std * rng.normal());
    }
};

// Sinusoidal features of c_noise fed to the network alongside the
// conditioning frames.
inline void append_noise_embedding(std::vector<double>& out, double c_noise) {
    double f = 1.0;
    for (int k = 0; k < 8; ++k) {
        out.push_back(std::sin(c_noise * f));
        out.push_back(std::cos(c_noise * f));
        f *= 2.0;
    }
}

constexpr int kNoiseEmbeddingDim = 16;

// Rolling window of the last L (observation, action) pairs, oldest first.
// actions[i] is the action taken from obs[i]; the newest slot is provisional
// until the policy commits an action for the current frame.
struct ConditioningBuffer {
    int64_t context_len = 0;
    std::deque<std::vector<double>> obs;  // normalized
    std::deque<int> actions;

    bool full() const {
        return static_cast<int64_t>(obs.size()) == context_len &&
               static_cast<int64_t>(actions.size()) == context_len;
    }

    const std::vector<double>& newest_obs() const { return obs.back(); }

    void advance(std::vector<double> next_obs, int action_taken) {
        actions.back() = action_taken;
        obs.pop_front();
        actions.pop_front();
        obs.push_back(std::move(next_obs));
        actions.push_back(kNoop);  // provisional
    }

    static ConditioningBuffer from_segment(const Segment& seg) {
        ConditioningBuffer ctx;
        ctx.context_len = seg.context_len;
        for (int i = 0; i < seg.context_len; ++i) {
            ctx.obs.push_back(normalize_obs(seg.steps[static_cast<size_t>(i)].obs));
            ctx.actions.push_back(static_cast<int>(seg.steps[static_cast<size_t>(i)].action));
        }
        return ctx;
    }
};

struct DenoiserModel {
    int64_t obs_dim = 0;
    int64_t action_count = 0;
    int64_t context_len = 4;
    double sigma_data = 0.5;
    bool residual_mode = false;
    bool frozen = false;
    Mlp net;

    DenoiserModel() = default;
    DenoiserModel(int64_t obs, int64_t actions, int64_t L, const std::vector<int64_t>& hidden,
                  double sigma_d, bool residual, Rng& rng)
        : obs_dim(obs),
          action_count(actions),
          context_len(L),
          sigma_data(sigma_d),
          residual_mode(residual),
          net(input_dim(obs, actions, L), hidden, obs, rng) {}

    static int64_t input_dim(int64_t obs, int64_t actions, int64_t L) {
        return obs + L * obs + L * actions + kNoiseEmbeddingDim;
    }

    ParamList params() {
        ParamList out;
        net.collect("wm", out);
        return out;
    }

    // Conditioning block shared by training and sampling: L observations then
    // L one-hot actions, with current_action in the newest slot.
    void append_condition(std::vector<double>& row, const ConditioningBuffer& ctx,
                          int current_action) const {
        for (const auto& o : ctx.obs) row.insert(row.end(), o.begin(), o.end());
        for (int64_t i = 0; i < context_len; ++i) {
            const int a = i + 1 < context_len ? ctx.actions[static_cast<size_t>(i)]
                                              : current_action;
            for (int64_t k = 0; k < action_count; ++k) row.push_back(k == a ? 1.0 : 0.0);
        }
    }

    // D(x; sigma, ctx) = c_skip*x + c_out*net(c_in*x, cond, c_noise).
    std::vector<double> denoise_values(const std::vector<double>& x_noisy, double sigma,
                                       const ConditioningBuffer& ctx, int current_action) const {
        const EdmCoeffs c = edm_precondition(sigma, sigma_data);
        std::vector<double> row;
        row.reserve(static_cast<size_t>(input_dim(obs_dim, action_count, context_len)));
        for (double v : x_noisy) row.push_back(c.c_in * v);
        append_condition(row, ctx, current_action);
        append_noise_embedding(row, c.c_noise);
        Tensor in;
        in.shape = {1, static_cast<int64_t>(row.size())};
        in.data = std::move(row);
        Tensor out = net.forward_values(in);
        std::vector<double> d(static_cast<size_t>(obs_dim));
        for (int64_t i = 0; i < obs_dim; ++i)
            d[static_cast<size_t>(i)] = c.c_skip * x_noisy[static_cast<size_t>(i)] +
                                        c.c_out * out.data[static_cast<size_t>(i)];
        return d;
    }
};

using DenoiseFn = std::function<std::vector<double>(const std::vector<double>&, double)>;

// Euler integration of the probability-flow ODE over the rho-spaced grid,
// starting from pure noise at sigma_0. `churn` > 0 re-injects noise before
// each step (stochastic variant); the default 0 keeps sampling deterministic.
inline std::vector<double> euler_sample(const DenoiseFn& denoise, const NoiseSchedule& sched,
                                        size_t dim, Rng& rng, double churn = 0.0) {
    const auto grid = sched.sigma_grid();
    std::vector<double> x(dim);
    for (auto& v : x) v = grid[0] * rng.normal();
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        double sigma = grid[i];
        if (churn > 0.0 && sigma > 0.0) {
            const double sigma_hat = sigma * (1.0 + churn);
            const double extra = std::sqrt(sigma_hat * sigma_hat - sigma * sigma);
            for (auto& v : x) v += extra * rng.normal();
            sigma = sigma_hat;
        }
        const auto d = denoise(x, sigma);
        const double h = grid[i + 1] - sigma;
        for (size_t k = 0; k < x.size(); ++k) x[k] += h * (x[k] - d[k]) / sigma;
    }
    return x;
}

inline std::vector<double> sample_next_obs(const DenoiserModel& model, const NoiseSchedule& sched,
                                           const ConditioningBuffer& ctx, int action, Rng& rng,
                                           double churn = 0.0) {
    if (!ctx.full()) throw Error("sample_next_obs: conditioning buffer not full");
    auto denoise = [&](const std::vector<double>& x, double sigma) {
        return model.denoise_values(x, sigma, ctx, action);
    };
    std::vector<double> x = euler_sample(denoise, sched, static_cast<size_t>(model.obs_dim), rng,
                                         churn);
    if (model.residual_mode) {
        const auto& prev = ctx.newest_obs();
        for (size_t k = 0; k < x.size(); ++k) x[k] += prev[k];
    }
    for (auto& v : x) v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    return x;
}

// lambda(sigma) * ||denoised - target||^2, the per-sample loss term.
inline double wm_weighted_mse(std::span<const double> denoised, std::span<const double> target,
                              double sigma, double sigma_data) {
    if (denoised.size() != target.size()) throw Error("wm_weighted_mse: length mismatch");
    double sq = 0.0;
    for (size_t i = 0; i < denoised.size(); ++i) {
        const double d = denoised[i] - target[i];
        sq += d * d;
    }
    return edm_loss_weight(sigma, sigma_data) * sq;
}

// The stored newest action of a dataset context is the real logged action, so
// training conditions on it directly.
inline void append_condition_last_action(const DenoiserModel& model, std::vector<double>& row,
                                         const ConditioningBuffer& ctx) {
    model.append_condition(row, ctx, ctx.actions.back());
}

// One pre-drawn training example: context window, clean target (or residual),
// noise level and the unit noise that perturbs the target.
struct WmSample {
    ConditioningBuffer ctx;
    std::vector<double> target;
    double sigma = 1.0;
    std::vector<double> eps;
};

inline WmSample draw_wm_sample(const DenoiserModel& model, const SegmentSampler& sampler,
                               const NoiseSchedule& sched, Rng& rng) {
    const Segment seg = sampler.sample(rng);
    const int L = seg.context_len;
    WmSample s;
    s.ctx.context_len = L;
    for (int i = 0; i < L; ++i) {
        s.ctx.obs.push_back(normalize_obs(seg.steps[static_cast<size_t>(i)].obs));
        s.ctx.actions.push_back(static_cast<int>(seg.steps[static_cast<size_t>(i)].action));
    }
    s.target = normalize_obs(seg.steps[static_cast<size_t>(L)].obs);
    if (model.residual_mode) {
        const auto& prev = s.ctx.obs.back();
        for (size_t i = 0; i < s.target.size(); ++i) s.target[i] -= prev[i];
    }
    s.sigma = sched.draw_training_sigma(rng);
    s.eps.resize(s.target.size());
    for (auto& v : s.eps) v = rng.normal();
    return s;
}

// Batched denoising loss: mean over samples of
// lambda(sigma) * ||D(target + sigma*eps; sigma, ctx) - target||^2 / dim.
struct WmBatchLoss {
    Graph graph;
    Mlp::Bound bound;
    int loss = -1;
};

inline void build_wm_batch_loss(WmBatchLoss& out, DenoiserModel& model,
                                std::span<const WmSample> batch) {
    if (batch.empty()) throw Error("build_wm_batch_loss: empty batch");
    const int64_t B = static_cast<int64_t>(batch.size());
    const int64_t D = model.obs_dim;
    const int64_t in_dim = DenoiserModel::input_dim(D, model.action_count, model.context_len);
    Tensor net_in({B, in_dim});
    Tensor target({B, D});
    Tensor skip_x({B, D});    // c_skip * x_noisy
    Tensor out_coef({B, D});  // c_out per row
    Tensor weight({B, D});    // lambda(sigma) / (B * dim)

    std::vector<double> row;
    for (int64_t b = 0; b < B; ++b) {
        const WmSample& s = batch[static_cast<size_t>(b)];
        if (static_cast<int64_t>(s.target.size()) != D)
            throw Error("build_wm_batch_loss: target dimension mismatch");
        const EdmCoeffs c = edm_precondition(s.sigma, model.sigma_data);
        const double w = edm_loss_weight(s.sigma, model.sigma_data) /
                         (static_cast<double>(B) * static_cast<double>(D));
        row.clear();
        for (int64_t i = 0; i < D; ++i) {
            const double noisy = s.target[static_cast<size_t>(i)] +
                                 s.sigma * s.eps[static_cast<size_t>(i)];
            row.push_back(c.c_in * noisy);
            target.at(b, i) = s.target[static_cast<size_t>(i)];
            skip_x.at(b, i) = c.c_skip * noisy;
            out_coef.at(b, i) = c.c_out;
            weight.at(b, i) = w;
        }
        append_condition_last_action(model, row, s.ctx);
        append_noise_embedding(row, c.c_noise);
        for (size_t i = 0; i < row.size(); ++i) net_in.at(b, static_cast<int64_t>(i)) = row[i];
    }

    Graph& g = out.graph;
    const int in_id = g.input(std::move(net_in));
    out.bound = model.net.bind(g);
    const int net_out = model.net.apply(g, out.bound, in_id);
    const int denoised = g.add(g.mul(net_out, g.input(std::move(out_coef))), g.input(std::move(skip_x)));
    const int diff = g.sub(denoised, g.input(std::move(target)));
    out.loss = g.sum(g.mul(g.square(diff), g.input(std::move(weight))));
}

struct WmTrainConfig {
    int epochs = 50;
    int steps_per_epoch = 100;
    int batch_size = 32;
    AdamWConfig opt{};
};

// Phase 1. Returns the per-epoch mean loss curve and freezes the model.
inline std::vector<double> train_world_model(
    DenoiserModel& model, const Dataset& dataset, const NoiseSchedule& sched,
    const WmTrainConfig& cfg, Rng& rng,
    const std::function<void(int, double)>& on_epoch = nullptr) {
    if (model.frozen) throw Error("train_world_model: model is frozen");
    SegmentSampler sampler(dataset, static_cast<int>(model.context_len), 1);
    AdamW opt(model.params(), cfg.opt);
    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double acc = 0.0;
        for (int s = 0; s < cfg.steps_per_epoch; ++s) {
            std::vector<WmSample> batch;
            batch.reserve(static_cast<size_t>(cfg.batch_size));
            for (int b = 0; b < cfg.batch_size; ++b)
                batch.push_back(draw_wm_sample(model, sampler, sched, rng));
            WmBatchLoss step;
            build_wm_batch_loss(step, model, batch);
            const double loss = step.graph.scalar(step.loss);
            if (!std::isfinite(loss))
                throw Error(detail::str("train_world_model: non-finite loss at epoch ", epoch,
                                        " step ", s));
            step.graph.backward(step.loss);
            opt.step(step.graph);
            acc += loss;
        }
        const double mean_loss = acc / cfg.steps_per_epoch;
        curve.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss);
    }
    model.frozen = true;
    return curve;
}

}  // namespace imac
