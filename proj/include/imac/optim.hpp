#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imac/autodiff.hpp"
#include "imac/tensor.hpp"

namespace imac {

using ParamList = std::vector<std::pair<std::string, Tensor*>>;

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 10.0;  // global-norm gradient clip; <= 0 disables
};

// Per-parameter moment estimates.
struct OptState {
    Tensor first_moment;
    Tensor second_moment;
};

// One AdamW update with decoupled weight decay. step_count is the 1-based
// update index after this call; the bias-corrected step size
// lr * sqrt(1 - beta2^t) / (1 - beta1^t) is folded into the moment step.
inline void adamw_step(Tensor& param, const Tensor& grad, OptState& state, int64_t step_count,
                       const AdamWConfig& cfg, const std::string& name = "param") {
    if (!grad.all_finite()) throw Error("adamw_step: non-finite gradient for " + name);
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw Error("adamw_step: betas must lie in [0, 1)");
    if (!param.same_shape(grad))
        throw Error(detail::str("adamw_step: grad shape ", grad.shape_str(),
                                " does not match param ", param.shape_str(), " (", name, ")"));
    if (state.first_moment.data.empty()) {
        state.first_moment = Tensor::zeros(param.shape);
        state.second_moment = Tensor::zeros(param.shape);
    }
    const double t = static_cast<double>(step_count);
    const double step_size =
        cfg.lr * std::sqrt(1.0 - std::pow(cfg.beta2, t)) / (1.0 - std::pow(cfg.beta1, t));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    auto& m = state.first_moment.data;
    auto& v = state.second_moment.data;
    for (size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        param.data[i] = param.data[i] * decay - step_size * m[i] / (std::sqrt(v[i]) + cfg.eps);
    }
}

// Owns optimizer state for a fixed parameter list; pulls gradients out of a
// graph after backward() and applies one clipped AdamW update.
class AdamW {
public:
    AdamW(ParamList params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        states_.resize(params_.size());
    }

    int64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    void step(const Graph& g) {
        std::vector<Tensor> grads;
        grads.reserve(params_.size());
        for (auto& [name, t] : params_) {
            if (!g.is_bound(t)) throw Error("AdamW::step: parameter not bound: " + name);
            grads.push_back(g.param_grad(t));
            if (!grads.back().all_finite())
                throw Error("AdamW::step: non-finite gradient for " + name);
        }
        clip_global_norm(grads);
        ++step_count_;
        for (size_t i = 0; i < params_.size(); ++i)
            adamw_step(*params_[i].second, grads[i], states_[i], step_count_, cfg_,
                       params_[i].first);
    }

    double last_grad_norm() const { return last_grad_norm_; }

private:
    void clip_global_norm(std::vector<Tensor>& grads) {
        double sq = 0.0;
        for (const auto& g : grads)
            for (double x : g.data) sq += x * x;
        last_grad_norm_ = std::sqrt(sq);
        if (cfg_.clip_norm <= 0.0 || last_grad_norm_ <= cfg_.clip_norm) return;
        const double s = cfg_.clip_norm / last_grad_norm_;
        for (auto& g : grads)
            for (double& x : g.data) x *= s;
    }

    ParamList params_;
    AdamWConfig cfg_;
    std::vector<OptState> states_;
    int64_t step_count_ = 0;
    double last_grad_norm_ = 0.0;
};

}  // namespace imac
