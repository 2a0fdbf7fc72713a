#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "imac/autodiff.hpp"
#include "imac/optim.hpp"
#include "imac/rng.hpp"
#include "imac/tensor.hpp"

namespace imac {

// Small building blocks for the models in this project. Each module exposes
// three surfaces: collect() for optimizer/checkpoint enumeration (declaration
// order), bind()/apply() for differentiable forwards, and forward_values()
// for the no-gradient path used inside rollouts.

struct Linear {
    Tensor W;  // [in, out]
    Tensor b;  // [out]

    Linear() = default;
    Linear(int64_t in, int64_t out, Rng& rng, double gain = std::sqrt(2.0)) {
        W = Tensor::randn({in, out}, rng, gain / std::sqrt(static_cast<double>(in)));
        b = Tensor::zeros({out});
    }

    struct Bound {
        int W = -1, b = -1;
    };
    Bound bind(Graph& g) { return {g.param(&W), g.param(&b)}; }
    int apply(Graph& g, const Bound& bd, int x) const { return g.add_row(g.matmul(x, bd.W), bd.b); }

    Tensor forward_values(const Tensor& x) const {
        Tensor out = matmul_values(x, W);
        const int64_t n = out.cols();
        for (int64_t r = 0; r < out.rows(); ++r)
            for (int64_t c = 0; c < n; ++c) out.at(r, c) += b.data[static_cast<size_t>(c)];
        return out;
    }

    void collect(const std::string& prefix, ParamList& out) {
        out.emplace_back(prefix + ".W", &W);
        out.emplace_back(prefix + ".b", &b);
    }
};

inline void silu_inplace(Tensor& t) {
    for (auto& x : t.data) {
        const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        x *= s;
    }
}

// Fully connected stack with SiLU between layers, linear output.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(int64_t in, const std::vector<int64_t>& hidden, int64_t out, Rng& rng) {
        int64_t d = in;
        for (int64_t h : hidden) {
            layers.emplace_back(d, h, rng);
            d = h;
        }
        layers.emplace_back(d, out, rng, 1.0);
    }

    struct Bound {
        std::vector<Linear::Bound> layers;
    };
    Bound bind(Graph& g) {
        Bound bd;
        for (auto& l : layers) bd.layers.push_back(l.bind(g));
        return bd;
    }
    int apply(Graph& g, const Bound& bd, int x) const {
        for (size_t i = 0; i < layers.size(); ++i) {
            x = layers[i].apply(g, bd.layers[i], x);
            if (i + 1 < layers.size()) x = g.silu(x);
        }
        return x;
    }
    Tensor forward_values(const Tensor& x) const {
        Tensor h = x;
        for (size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward_values(h);
            if (i + 1 < layers.size()) silu_inplace(h);
        }
        return h;
    }
    void collect(const std::string& prefix, ParamList& out) {
        for (size_t i = 0; i < layers.size(); ++i)
            layers[i].collect(prefix + ".l" + std::to_string(i), out);
    }
};

// Plain LSTM cell over concat(x, h); forget-gate bias starts at 1.
struct LstmCell {
    int64_t input_dim = 0;
    int64_t hidden_dim = 0;
    Linear gate_i, gate_f, gate_g, gate_o;

    LstmCell() = default;
    LstmCell(int64_t in, int64_t hidden, Rng& rng)
        : input_dim(in),
          hidden_dim(hidden),
          gate_i(in + hidden, hidden, rng, 1.0),
          gate_f(in + hidden, hidden, rng, 1.0),
          gate_g(in + hidden, hidden, rng, 1.0),
          gate_o(in + hidden, hidden, rng, 1.0) {
        for (auto& x : gate_f.b.data) x = 1.0;
    }

    struct Bound {
        Linear::Bound i, f, g, o;
    };
    Bound bind(Graph& g) {
        return {gate_i.bind(g), gate_f.bind(g), gate_g.bind(g), gate_o.bind(g)};
    }

    struct StateNodes {
        int h = -1, c = -1;
    };
    StateNodes zero_state_nodes(Graph& g, int64_t batch = 1) const {
        int h = g.input(Tensor::zeros({batch, hidden_dim}));
        int c = g.input(Tensor::zeros({batch, hidden_dim}));
        return {h, c};
    }
    StateNodes step(Graph& g, const Bound& bd, int x, StateNodes s) const {
        int z = g.concat(x, s.h);
        int i = g.sigmoid(gate_i.apply(g, bd.i, z));
        int f = g.sigmoid(gate_f.apply(g, bd.f, z));
        int cand = g.tanh(gate_g.apply(g, bd.g, z));
        int c = g.add(g.mul(f, s.c), g.mul(i, cand));
        int h = g.mul(o_gate(g, bd, z), g.tanh(c));
        return {h, c};
    }

    struct State {
        Tensor h, c;
    };
    State zero_state(int64_t batch = 1) const {
        return {Tensor::zeros({batch, hidden_dim}), Tensor::zeros({batch, hidden_dim})};
    }
    State step_values(const Tensor& x, const State& s) const {
        Tensor z({x.rows(), x.cols() + s.h.cols()});
        for (int64_t r = 0; r < x.rows(); ++r) {
            for (int64_t c = 0; c < x.cols(); ++c) z.at(r, c) = x.at(r, c);
            for (int64_t c = 0; c < s.h.cols(); ++c) z.at(r, x.cols() + c) = s.h.at(r, c);
        }
        Tensor i = gate_i.forward_values(z);
        Tensor f = gate_f.forward_values(z);
        Tensor cand = gate_g.forward_values(z);
        Tensor o = gate_o.forward_values(z);
        State out{Tensor({x.rows(), hidden_dim}), Tensor({x.rows(), hidden_dim})};
        for (size_t k = 0; k < out.c.data.size(); ++k) {
            const double fi = sigmoid_v(f.data[k]);
            const double ii = sigmoid_v(i.data[k]);
            const double cc = fi * s.c.data[k] + ii * std::tanh(cand.data[k]);
            out.c.data[k] = cc;
            out.h.data[k] = sigmoid_v(o.data[k]) * std::tanh(cc);
        }
        return out;
    }

    void collect(const std::string& prefix, ParamList& out) {
        gate_i.collect(prefix + ".gi", out);
        gate_f.collect(prefix + ".gf", out);
        gate_g.collect(prefix + ".gg", out);
        gate_o.collect(prefix + ".go", out);
    }

private:
    static double sigmoid_v(double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    int o_gate(Graph& g, const Bound& bd, int z) const {
        return g.sigmoid(gate_o.apply(g, bd.o, z));
    }
};

inline Tensor softmax_values(const Tensor& logits) {
    Tensor out = logits;
    const int64_t n = logits.last_dim();
    const int64_t rows = logits.numel() / n;
    for (int64_t r = 0; r < rows; ++r) {
        double* row = out.data.data() + r * n;
        double mx = row[0];
        for (int64_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int64_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
        for (int64_t c = 0; c < n; ++c) row[c] = std::exp(row[c] - mx) / z;
    }
    return out;
}

inline std::vector<double> one_hot(int64_t index, int64_t n) {
    std::vector<double> v(static_cast<size_t>(n), 0.0);
    v[static_cast<size_t>(index)] = 1.0;
    return v;
}

}  // namespace imac
