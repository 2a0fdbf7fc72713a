#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "imac/optim.hpp"
#include "imac/tensor.hpp"

namespace imac::testing {

// Central finite differences of a scalar-valued function with respect to one
// parameter tensor. loss_fn must rebuild its computation from current values.
template <typename F>
Tensor fd_grad(Tensor& param, F&& loss_fn, double h = 1e-5) {
    Tensor g = Tensor::zeros(param.shape);
    for (size_t i = 0; i < param.data.size(); ++i) {
        const double orig = param.data[i];
        param.data[i] = orig + h;
        const double lp = loss_fn();
        param.data[i] = orig - h;
        const double lm = loss_fn();
        param.data[i] = orig;
        g.data[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

inline double max_rel_err(const Tensor& analytic, const Tensor& numeric) {
    double worst = 0.0;
    for (size_t i = 0; i < analytic.data.size(); ++i) {
        const double a = analytic.data[i], b = numeric.data[i];
        const double denom = std::max({std::abs(a), std::abs(b), 1.0});
        worst = std::max(worst, std::abs(a - b) / denom);
    }
    return worst;
}

// FD sweep over a whole parameter list; returns the worst relative error.
template <typename F>
double fd_check_params(const ParamList& params, const Graph& g, F&& loss_fn, double h = 1e-5) {
    double worst = 0.0;
    for (const auto& [name, t] : params) {
        const Tensor analytic = g.param_grad(t);
        const Tensor numeric = fd_grad(*t, loss_fn, h);
        worst = std::max(worst, max_rel_err(analytic, numeric));
    }
    return worst;
}

// Independent O(T^2) lambda-return oracle: the explicit exponentially-weighted
// mixture of n-step returns, with done cuts and truncation bootstrap.
inline std::vector<double> lambda_returns_direct_sum(std::span<const double> rewards,
                                                     std::span<const double> values,
                                                     std::span<const uint8_t> dones, double gamma,
                                                     double lam) {
    const size_t T = rewards.size();
    std::vector<double> G(T, 0.0);
    for (size_t t = 0; t < T; ++t) {
        const size_t N = T - t;
        double acc = 0.0;
        double lam_pow = 1.0;  // lam^(n-1)
        for (size_t n = 1; n <= N; ++n) {
            double ret = 0.0, disc = 1.0;
            bool alive = true;
            for (size_t k = t; k < t + n; ++k) {
                ret += disc * rewards[k];
                if (dones[k]) {
                    alive = false;
                    break;
                }
                disc *= gamma;
            }
            if (alive) ret += disc * values[t + n];
            const double w = n < N ? (1.0 - lam) * lam_pow : lam_pow;
            acc += w * ret;
            lam_pow *= lam;
        }
        G[t] = acc;
    }
    return G;
}

// Independent O(T^2) double-sum oracle for the eq7 curriculum score.
inline double plr_score_double_sum(std::span<const double> deltas, double gamma, double lam) {
    const size_t T = deltas.size();
    double total = 0.0;
    for (size_t t = 0; t < T; ++t) {
        double inner = 0.0;
        for (size_t k = t; k < T; ++k)
            inner += std::pow(gamma * lam, static_cast<double>(k - t)) * std::max(0.0, deltas[k]);
        total += inner;
    }
    return total / static_cast<double>(T);
}

}  // namespace imac::testing
