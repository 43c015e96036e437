#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvt {

// Shape/contraction violations in tensor primitives. Message names the op and shapes.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf produced by a forward op on finite inputs, or divergence during training.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line_no = 0) : std::runtime_error(msg), line(line_no) {}
    int line;
};

class DataError : public std::runtime_error {
public:
    DataError(const std::string& msg, int line_no = 0) : std::runtime_error(msg), line(line_no) {}
    int line;
};

// Deterministic RNG. All randomness in the project flows through this class so that
// results are reproducible across platforms; mt19937_64 output is specified by the
// standard and the uniform/normal transforms below avoid implementation-defined
// std distributions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // splitmix-style scramble so nearby seeds give unrelated streams
        for (int i = 0; i < 4; ++i) next_u64();
    }

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range
    int uniform_int(int lo, int hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int(next_u64() % span);
    }

    // Box-Muller; uses two uniforms per draw, no caching, so the stream is
    // insensitive to interleaving with other draw kinds.
    double normal(double mean, double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    uint64_t state_;
};

inline uint64_t hash_mix(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 12) + (h >> 4);
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

} // namespace gvt
