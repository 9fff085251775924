#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace pfp {

// Pairwise summation; result depends only on the element order, not on any
// external chunking, so aggregates are reproducible.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 16) {
        double acc = 0.0;
        for (double x : xs) acc += x;
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& xs) {
    return pairwise_sum(std::span<const double>(xs));
}

// n log-spaced points on [lo, hi], endpoints exact.
inline std::vector<double> log_spaced_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    const double u0 = std::log(lo), u1 = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::exp(u0 + (u1 - u0) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

// Value at zero of the quadratic through (x0,y0), (x1,y1), (x2,y2).
// Used to take s -> 0+ limits of moment quotients from grid samples.
inline double quadratic_extrapolate_to_zero(double x0, double x1, double x2,
                                            double y0, double y1, double y2) {
    const double l0 = (x1 * x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (x0 * x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (x0 * x1) / ((x2 - x0) * (x2 - x1));
    return y0 * l0 + y1 * l1 + y2 * l2;
}

} // namespace pfp
