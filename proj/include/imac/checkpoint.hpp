#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imac/binio.hpp"
#include "imac/optim.hpp"
#include "imac/tensor.hpp"

namespace imac {

// Checkpoint framing shared by all models: magic, version, an integer header,
// a double header, then parameter tensors in declaration order as f64
// little-endian. Magics: "IMWM" world model, "IMRT" reward/termination model,
// "IMAG" agent policy.

constexpr uint16_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const char magic[4],
                            std::span<const int64_t> ints, std::span<const double> doubles,
                            const ParamList& params) {
    auto os = binio::open_out(path);
    binio::write_bytes(os, magic, 4);
    binio::write_le<uint16_t>(os, kCheckpointVersion);
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(ints.size()));
    for (int64_t v : ints) binio::write_le<int64_t>(os, v);
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(doubles.size()));
    for (double v : doubles) binio::write_f64(os, v);
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        binio::write_le<uint8_t>(os, static_cast<uint8_t>(t->shape.size()));
        for (int64_t d : t->shape) binio::write_le<int64_t>(os, d);
        for (double v : t->data) binio::write_f64(os, v);
    }
    if (!os) throw Error("save_checkpoint: write failed for " + path);
}

struct CheckpointHeader {
    std::vector<int64_t> ints;
    std::vector<double> doubles;
};

// Reads the header and fills `params` in order; tensor count and shapes must
// match the models built from the header/config.
inline CheckpointHeader load_checkpoint(const std::string& path, const char magic[4],
                                        ParamList params) {
    auto is = binio::open_in(path);
    binio::expect_magic(is, magic, path.c_str());
    const auto version = binio::read_le<uint16_t>(is, "checkpoint version");
    if (version != kCheckpointVersion)
        throw Error(detail::str("checkpoint version mismatch in ", path, ": ", version));
    CheckpointHeader h;
    const auto n_ints = binio::read_le<uint32_t>(is, "header ints");
    for (uint32_t i = 0; i < n_ints; ++i) h.ints.push_back(binio::read_le<int64_t>(is, "header int"));
    const auto n_dbl = binio::read_le<uint32_t>(is, "header doubles");
    for (uint32_t i = 0; i < n_dbl; ++i) h.doubles.push_back(binio::read_f64(is, "header double"));
    const auto n_tensors = binio::read_le<uint32_t>(is, "tensor count");
    if (n_tensors != params.size())
        throw Error(detail::str("checkpoint ", path, ": expected ", params.size(),
                                " tensors, found ", n_tensors));
    for (auto& [name, t] : params) {
        const auto ndim = binio::read_le<uint8_t>(is, "tensor rank");
        std::vector<int64_t> shape(ndim);
        for (auto& d : shape) d = binio::read_le<int64_t>(is, "tensor dim");
        if (shape != t->shape)
            throw Error(detail::str("checkpoint ", path, ": shape mismatch for ", name));
        for (auto& v : t->data) v = binio::read_f64(is, "tensor data");
    }
    return h;
}

// FNV-1a over raw parameter bytes, used for frozen-model barrier checks.
inline uint64_t params_checksum(const ParamList& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : params) {
        mix(name.data(), name.size());
        if (!t->data.empty()) mix(t->data.data(), t->data.size() * sizeof(double));
    }
    return h;
}

}  // namespace imac
