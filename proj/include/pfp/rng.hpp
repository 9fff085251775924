#pragma once

#include <cmath>
#include <cstdint>

namespace pfp {

// splitmix64 finalizer (Steele, Lea & Flood 2014); also used to key streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-derived stream generator: the state of stream (seed, a, b) is a
// pure function of the triple, so sample i of level l draws the same values
// whether the run is chunked, parallel, or sequential.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
        Rng r(0);
        r.state_ = mix64(mix64(mix64(seed) ^ a) ^ (b * 0xda942042e4dd58b5ULL + 1));
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0,1); never returns an endpoint.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double exponential() { return -std::log(uniform01()); }

    // Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Geometric on {1,2,...} with success probability p.
    long geometric1(double p) {
        return 1 + static_cast<long>(std::floor(std::log(uniform01()) / std::log1p(-p)));
    }

    // Geometric on {0,1,...} with success probability p.
    long geometric0(double p) {
        return static_cast<long>(std::floor(std::log(uniform01()) / std::log1p(-p)));
    }

    // Poisson by inversion; large means are split into chunks to avoid
    // underflow of exp(-lambda).
    long poisson(double lambda) {
        long total = 0;
        while (lambda > 20.0) {
            total += poisson_small_(20.0);
            lambda -= 20.0;
        }
        return total + poisson_small_(lambda);
    }

private:
    long poisson_small_(double lambda) {
        if (lambda <= 0.0) return 0;
        const double target = uniform01();
        double p = std::exp(-lambda), cdf = p;
        long k = 0;
        while (cdf < target && k < 4000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    std::uint64_t state_;
};

} // namespace pfp
