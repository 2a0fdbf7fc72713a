#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "imac/tensor.hpp"

namespace imac {

// Reverse-mode autodiff over a dynamically built tape. Forward values are
// computed eagerly as nodes are appended, so the node order is already
// topological and the backward pass is a single reverse sweep.
//
// Leaves added via param() are bound to external tensors; their gradients can
// be collected after backward(). Everything else is treated as constant data.
class Graph {
public:
    enum class Op : uint8_t {
        Input,
        MatMul,
        Add,
        AddRow,   // bias broadcast over rows
        Sub,
        Mul,
        Scale,
        SumAll,
        MeanAll,
        Tanh,
        Sigmoid,
        Silu,
        Softmax,     // over last axis
        LogSoftmax,  // over last axis
        Log,
        Square,
        Clamp,
        ConcatLast,
        GatherLast,
    };

    int input(Tensor v) { return push(Op::Input, -1, -1, std::move(v), false); }

    // Bind an external parameter tensor; its gradient is retrievable via
    // param_grad() after backward(). Bind each tensor at most once per graph.
    int param(Tensor* t) {
        if (param_ids_.count(t))
            throw Error("Graph::param: tensor already bound");
        int id = push(Op::Input, -1, -1, *t, true);
        param_ids_[t] = id;
        return id;
    }

    int detach(int a) { return input(nodes_[a].val); }

    int matmul(int a, int b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        return push(Op::MatMul, a, b, matmul_values(A, B));
    }

    int add(int a, int b) {
        check_same_shape("add", val(a), val(b));
        Tensor out = val(a);
        const auto& bd = val(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bd[i];
        return push(Op::Add, a, b, std::move(out));
    }

    // x: [m,n], bias: [n] added to every row.
    int add_row(int a, int b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (B.numel() != A.cols())
            throw Error(detail::str("add_row: shape mismatch ", A.shape_str(), " vs ",
                                    B.shape_str()));
        Tensor out = A;
        const int64_t n = A.cols();
        for (int64_t r = 0; r < A.rows(); ++r)
            for (int64_t c = 0; c < n; ++c) out.data[static_cast<size_t>(r * n + c)] += B.data[static_cast<size_t>(c)];
        return push(Op::AddRow, a, b, std::move(out));
    }

    int sub(int a, int b) {
        check_same_shape("sub", val(a), val(b));
        Tensor out = val(a);
        const auto& bd = val(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bd[i];
        return push(Op::Sub, a, b, std::move(out));
    }

    int mul(int a, int b) {
        check_same_shape("mul", val(a), val(b));
        Tensor out = val(a);
        const auto& bd = val(b).data;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bd[i];
        return push(Op::Mul, a, b, std::move(out));
    }

    int scale(int a, double s) {
        Tensor out = val(a);
        for (auto& x : out.data) x *= s;
        int id = push(Op::Scale, a, -1, std::move(out));
        nodes_[id].s0 = s;
        return id;
    }

    int sum(int a) {
        double s = 0.0;
        for (double x : val(a).data) s += x;
        return push(Op::SumAll, a, -1, Tensor::scalar(s));
    }

    int mean(int a) {
        if (val(a).numel() == 0) throw Error("mean: empty tensor");
        double s = 0.0;
        for (double x : val(a).data) s += x;
        return push(Op::MeanAll, a, -1, Tensor::scalar(s / static_cast<double>(val(a).numel())));
    }

    int tanh(int a) {
        Tensor out = val(a);
        for (auto& x : out.data) x = std::tanh(x);
        return push(Op::Tanh, a, -1, std::move(out));
    }

    int sigmoid(int a) {
        Tensor out = val(a);
        for (auto& x : out.data) x = sigmoid_scalar(x);
        return push(Op::Sigmoid, a, -1, std::move(out));
    }

    int silu(int a) {
        Tensor out = val(a);
        for (auto& x : out.data) x = x * sigmoid_scalar(x);
        return push(Op::Silu, a, -1, std::move(out));
    }

    int softmax(int a) { return push(Op::Softmax, a, -1, softmax_values(val(a), false)); }

    int log_softmax(int a) { return push(Op::LogSoftmax, a, -1, softmax_values(val(a), true)); }

    int log(int a) {
        Tensor out = val(a);
        for (auto& x : out.data) x = std::log(x);
        return push(Op::Log, a, -1, std::move(out));
    }

    int square(int a) {
        Tensor out = val(a);
        for (auto& x : out.data) x *= x;
        return push(Op::Square, a, -1, std::move(out));
    }

    int clamp(int a, double lo, double hi) {
        if (lo > hi) throw Error("clamp: lo > hi");
        Tensor out = val(a);
        for (auto& x : out.data) x = x < lo ? lo : (x > hi ? hi : x);
        int id = push(Op::Clamp, a, -1, std::move(out));
        nodes_[id].s0 = lo;
        nodes_[id].s1 = hi;
        return id;
    }

    // Concatenate over the last axis; both operands [m, *].
    int concat(int a, int b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.rows() != B.rows())
            throw Error(detail::str("concat: shape mismatch ", A.shape_str(), " vs ",
                                    B.shape_str()));
        const int64_t m = A.rows(), na = A.cols(), nb = B.cols();
        Tensor out({m, na + nb});
        for (int64_t r = 0; r < m; ++r) {
            for (int64_t c = 0; c < na; ++c) out.at(r, c) = A.at(r, c);
            for (int64_t c = 0; c < nb; ++c) out.at(r, na + c) = B.at(r, c);
        }
        return push(Op::ConcatLast, a, b, std::move(out));
    }

    // out[i, 0] = a[i, idx[i]].
    int gather_last(int a, std::vector<int64_t> idx) {
        const Tensor& A = val(a);
        if (static_cast<int64_t>(idx.size()) != A.rows())
            throw Error(detail::str("gather_last: ", idx.size(), " indices for ", A.rows(),
                                    " rows"));
        Tensor out({A.rows(), 1});
        for (int64_t r = 0; r < A.rows(); ++r) {
            int64_t c = idx[static_cast<size_t>(r)];
            if (c < 0 || c >= A.cols())
                throw Error(detail::str("gather_last: index ", c, " out of range for ",
                                        A.shape_str()));
            out.at(r, 0) = A.at(r, c);
        }
        int id = push(Op::GatherLast, a, -1, std::move(out));
        nodes_[id].idx = std::move(idx);
        return id;
    }

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    double scalar(int id) const {
        const Tensor& t = val(id);
        if (t.numel() != 1) throw Error("Graph::scalar: node is not scalar");
        return t.data[0];
    }

    size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Gradients of bound parameters are then
    // available through param_grad().
    void backward(int loss_id) {
        if (val(loss_id).numel() != 1)
            throw Error("backward: loss node must be scalar");
        for (auto& n : nodes_) n.grad.data.clear();
        Node& loss = nodes_[static_cast<size_t>(loss_id)];
        loss.grad = loss.val;
        for (auto& x : loss.grad.data) x = 1.0;
        loss.grad.shape = loss.val.shape;

        for (int id = loss_id; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.grad.data.empty() || n.op == Op::Input) continue;
            step_backward(n);
        }
    }

    bool is_bound(const Tensor* t) const { return param_ids_.count(t) > 0; }

    // Zero tensor when the parameter did not influence the loss.
    Tensor param_grad(const Tensor* t) const {
        auto it = param_ids_.find(t);
        if (it == param_ids_.end()) throw Error("param_grad: tensor not bound to graph");
        const Node& n = nodes_[static_cast<size_t>(it->second)];
        if (n.grad.data.empty()) return Tensor::zeros(n.val.shape);
        return n.grad;
    }

private:
    struct Node {
        Op op;
        int a = -1, b = -1;
        Tensor val;
        Tensor grad;
        bool needs = false;  // reaches a parameter
        double s0 = 0.0, s1 = 0.0;
        std::vector<int64_t> idx;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, int> param_ids_;

    static double sigmoid_scalar(double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }

    static Tensor softmax_values(const Tensor& a, bool log_form) {
        Tensor out = a;
        const int64_t n = a.last_dim();
        if (n <= 0) throw Error("softmax: empty last axis");
        const int64_t rows = a.numel() / n;
        for (int64_t r = 0; r < rows; ++r) {
            double* row = out.data.data() + r * n;
            double mx = row[0];
            for (int64_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
            double z = 0.0;
            for (int64_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
            if (log_form) {
                const double lz = std::log(z) + mx;
                for (int64_t c = 0; c < n; ++c) row[c] -= lz;
            } else {
                for (int64_t c = 0; c < n; ++c) row[c] = std::exp(row[c] - mx) / z;
            }
        }
        return out;
    }

    int push(Op op, int a, int b, Tensor out, bool is_param = false) {
        if (!out.all_finite() && op != Op::Input)
            throw Error(detail::str("op ", static_cast<int>(op), " produced non-finite values"));
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.val = std::move(out);
        n.needs = is_param;
        if (a >= 0) n.needs = n.needs || nodes_[static_cast<size_t>(a)].needs;
        if (b >= 0) n.needs = n.needs || nodes_[static_cast<size_t>(b)].needs;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    Tensor& grad_of(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.data.empty()) {
            n.grad.shape = n.val.shape;
            n.grad.data.assign(n.val.data.size(), 0.0);
        }
        return n.grad;
    }

    bool wants_grad(int id) const { return id >= 0 && nodes_[static_cast<size_t>(id)].needs; }

    void step_backward(Node& n) {
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::MatMul: {
                const Tensor& A = val(n.a);
                const Tensor& B = val(n.b);
                if (wants_grad(n.a)) grad_of(n.a).mat().noalias() += g.mat() * B.mat().transpose();
                if (wants_grad(n.b)) grad_of(n.b).mat().noalias() += A.mat().transpose() * g.mat();
                break;
            }
            case Op::Add:
                accumulate(n.a, g, 1.0);
                accumulate(n.b, g, 1.0);
                break;
            case Op::AddRow: {
                accumulate(n.a, g, 1.0);
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_of(n.b);
                    const int64_t cols = val(n.a).cols();
                    for (int64_t r = 0; r < val(n.a).rows(); ++r)
                        for (int64_t c = 0; c < cols; ++c)
                            gb.data[static_cast<size_t>(c)] += g.data[static_cast<size_t>(r * cols + c)];
                }
                break;
            }
            case Op::Sub:
                accumulate(n.a, g, 1.0);
                accumulate(n.b, g, -1.0);
                break;
            case Op::Mul: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const auto& b = val(n.b).data;
                    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * b[i];
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_of(n.b);
                    const auto& a = val(n.a).data;
                    for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * a[i];
                }
                break;
            }
            case Op::Scale:
                accumulate(n.a, g, n.s0);
                break;
            case Op::SumAll: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const double gv = g.data[0];
                    for (auto& x : ga.data) x += gv;
                }
                break;
            }
            case Op::MeanAll: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const double gv = g.data[0] / static_cast<double>(ga.data.size());
                    for (auto& x : ga.data) x += gv;
                }
                break;
            }
            case Op::Tanh: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    for (size_t i = 0; i < g.data.size(); ++i) {
                        const double y = n.val.data[i];
                        ga.data[i] += g.data[i] * (1.0 - y * y);
                    }
                }
                break;
            }
            case Op::Sigmoid: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    for (size_t i = 0; i < g.data.size(); ++i) {
                        const double y = n.val.data[i];
                        ga.data[i] += g.data[i] * y * (1.0 - y);
                    }
                }
                break;
            }
            case Op::Silu: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const auto& x = val(n.a).data;
                    for (size_t i = 0; i < g.data.size(); ++i) {
                        const double s = sigmoid_scalar(x[i]);
                        ga.data[i] += g.data[i] * s * (1.0 + x[i] * (1.0 - s));
                    }
                }
                break;
            }
            case Op::Softmax: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const int64_t cols = n.val.last_dim();
                    const int64_t rows = n.val.numel() / cols;
                    for (int64_t r = 0; r < rows; ++r) {
                        const double* y = n.val.data.data() + r * cols;
                        const double* gr = g.data.data() + r * cols;
                        double dotv = 0.0;
                        for (int64_t c = 0; c < cols; ++c) dotv += gr[c] * y[c];
                        double* ga_r = ga.data.data() + r * cols;
                        for (int64_t c = 0; c < cols; ++c) ga_r[c] += y[c] * (gr[c] - dotv);
                    }
                }
                break;
            }
            case Op::LogSoftmax: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const int64_t cols = n.val.last_dim();
                    const int64_t rows = n.val.numel() / cols;
                    for (int64_t r = 0; r < rows; ++r) {
                        const double* y = n.val.data.data() + r * cols;  // log-probs
                        const double* gr = g.data.data() + r * cols;
                        double gsum = 0.0;
                        for (int64_t c = 0; c < cols; ++c) gsum += gr[c];
                        double* ga_r = ga.data.data() + r * cols;
                        for (int64_t c = 0; c < cols; ++c)
                            ga_r[c] += gr[c] - std::exp(y[c]) * gsum;
                    }
                }
                break;
            }
            case Op::Log: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const auto& x = val(n.a).data;
                    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / x[i];
                }
                break;
            }
            case Op::Square: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const auto& x = val(n.a).data;
                    for (size_t i = 0; i < g.data.size(); ++i)
                        ga.data[i] += 2.0 * x[i] * g.data[i];
                }
                break;
            }
            case Op::Clamp: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const auto& x = val(n.a).data;
                    for (size_t i = 0; i < g.data.size(); ++i)
                        if (x[i] >= n.s0 && x[i] <= n.s1) ga.data[i] += g.data[i];
                }
                break;
            }
            case Op::ConcatLast: {
                const int64_t m = n.val.rows();
                const int64_t na = val(n.a).cols();
                const int64_t nb = val(n.b).cols();
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    for (int64_t r = 0; r < m; ++r)
                        for (int64_t c = 0; c < na; ++c)
                            ga.data[static_cast<size_t>(r * na + c)] += g.data[static_cast<size_t>(r * (na + nb) + c)];
                }
                if (wants_grad(n.b)) {
                    Tensor& gb = grad_of(n.b);
                    for (int64_t r = 0; r < m; ++r)
                        for (int64_t c = 0; c < nb; ++c)
                            gb.data[static_cast<size_t>(r * nb + c)] += g.data[static_cast<size_t>(r * (na + nb) + na + c)];
                }
                break;
            }
            case Op::GatherLast: {
                if (wants_grad(n.a)) {
                    Tensor& ga = grad_of(n.a);
                    const int64_t cols = val(n.a).cols();
                    for (int64_t r = 0; r < n.val.rows(); ++r)
                        ga.data[static_cast<size_t>(r * cols + n.idx[static_cast<size_t>(r)])] +=
                            g.data[static_cast<size_t>(r)];
                }
                break;
            }
        }
    }

    void accumulate(int id, const Tensor& g, double s) {
        if (!wants_grad(id)) return;
        Tensor& dst = grad_of(id);
        for (size_t i = 0; i < g.data.size(); ++i) dst.data[i] += s * g.data[i];
    }
};

}  // namespace imac
