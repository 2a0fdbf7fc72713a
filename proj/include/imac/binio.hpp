#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "imac/tensor.hpp"

namespace imac {

// Little-endian primitives for the dataset and checkpoint file formats.
namespace binio {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_integral_v<T>);
    uint8_t buf[sizeof(T)];
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<uint8_t>(u >> (8 * i));
    write_bytes(os, buf, sizeof(T));
}

inline void write_f32(std::ostream& os, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    write_le<uint32_t>(os, u);
}

inline void write_f64(std::ostream& os, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    write_le<uint64_t>(os, u);
}

inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw Error(detail::str("truncated file while reading ", what));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    static_assert(std::is_integral_v<T>);
    uint8_t buf[sizeof(T)];
    read_bytes(is, buf, sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

inline float read_f32(std::istream& is, const char* what) {
    uint32_t u = read_le<uint32_t>(is, what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline double read_f64(std::istream& is, const char* what) {
    uint64_t u = read_le<uint64_t>(is, what);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void expect_magic(std::istream& is, const char magic[4], const char* what) {
    char buf[4];
    read_bytes(is, buf, 4, what);
    if (std::memcmp(buf, magic, 4) != 0)
        throw Error(detail::str("bad magic for ", what, ": expected '", std::string(magic, 4),
                                "', got '", std::string(buf, 4), "'"));
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open for reading: " + path);
    return is;
}

}  // namespace binio
}  // namespace imac
