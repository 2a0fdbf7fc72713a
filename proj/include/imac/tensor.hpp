#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imac/rng.hpp"

namespace imac {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
template <typename... Args>
std::string str(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
}  // namespace detail

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major f64 tensor. Rank 0 (scalar), 1 and 2 cover everything this
// project needs; shape is kept as a vector so reductions stay shape-generic.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::initializer_list<int64_t> s, double fill = 0.0) : shape(s) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }
    explicit Tensor(std::vector<int64_t> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0) throw Error("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor scalar(double v) {
        Tensor t;
        t.shape = {};
        t.data = {v};
        return t;
    }
    static Tensor from_vector(std::vector<double> v) {
        Tensor t;
        t.shape = {static_cast<int64_t>(v.size())};
        t.data = std::move(v);
        return t;
    }
    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s), 0.0); }
    static Tensor full(std::vector<int64_t> s, double v) { return Tensor(std::move(s), v); }
    static Tensor randn(std::vector<int64_t> s, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = stddev * rng.normal();
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return data.size() == 1 && shape.empty(); }

    // Matrix view: rank-2 as-is, rank-1 and scalars as a single row.
    int64_t rows() const { return rank() == 2 ? shape[0] : 1; }
    int64_t cols() const { return rank() == 2 ? shape[1] : numel(); }
    int64_t last_dim() const { return shape.empty() ? 1 : shape.back(); }

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    Eigen::Map<EigenRowMajor> mat() {
        return Eigen::Map<EigenRowMajor>(data.data(), rows(), cols());
    }
    Eigen::Map<const EigenRowMajor> mat() const {
        return Eigen::Map<const EigenRowMajor>(data.data(), rows(), cols());
    }
};

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw Error(detail::str(op, ": shape mismatch ", a.shape_str(), " vs ", b.shape_str()));
}

// C = A * B for 2-D operands (rank-1 treated as a row vector).
inline Tensor matmul_values(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw Error(detail::str("matmul: shape mismatch ", a.shape_str(), " vs ", b.shape_str()));
    Tensor out({a.rows(), b.cols()});
    out.mat().noalias() = a.mat() * b.mat();
    return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
    check_same_shape("dot", a, b);
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace imac
