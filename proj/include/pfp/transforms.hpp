#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "pfp/errors.hpp"
#include "pfp/measures.hpp"
#include "pfp/numeric.hpp"

namespace pfp {

// P_N(z) = E[z^N] on [0,1], with 0^0 = 1.
inline double pgf_eval(const CountLaw& n, double z) {
    if (!(z >= 0.0 && z <= 1.0)) fail(errc::z_out_of_range, "pgf argument must lie in [0,1]");
    using F = CountLaw::Family;
    switch (n.family()) {
        case F::degenerate: {
            const long k = n.degenerate_value();
            return k == 0 ? 1.0 : std::pow(z, static_cast<double>(k));
        }
        case F::explicit_pmf: {
            std::vector<double> terms;
            terms.reserve(n.pmf().size());
            for (auto& [k, w] : n.pmf())
                terms.push_back(k == 0 ? w : w * std::pow(z, static_cast<double>(k)));
            return pairwise_sum(terms);
        }
        case F::geometric1: {
            const double p = n.geometric_p();
            return p * z / (1.0 - (1.0 - p) * z);
        }
        case F::geometric0: {
            const double p = n.geometric_p();
            return p / (1.0 - (1.0 - p) * z);
        }
        case F::poisson:
            return std::exp(n.poisson_lambda() * (z - 1.0));
    }
    return 0.0;
}

// Sharp upper bound on a transform in terms of its first two moments
// (Eckberg 1977): 1 - mu1^2/mu2 + (mu1^2/mu2) e^{-(mu2/mu1) s}.
inline double eckberg_bound(MomentPair mp, double s) {
    if (!(mp.mu1 > 0.0) || mp.mu2 < mp.mu1 * mp.mu1 * (1.0 - 1e-12))
        fail(errc::invalid_moments, "need mu2 >= mu1^2 > 0");
    if (s < 0.0) fail(errc::negative_s, "bound argument must be >= 0");
    const double q = std::min(1.0, mp.mu1 * mp.mu1 / mp.mu2);
    return 1.0 - q + q * std::exp(-(mp.mu2 / mp.mu1) * s);
}

inline constexpr std::size_t kDefaultGridSize = 513;
inline constexpr double kDefaultGridLo = 1e-3;
inline constexpr double kDefaultGridHi = 1e3;

inline std::vector<double> default_lst_grid() {
    return log_spaced_grid(kDefaultGridLo, kDefaultGridHi, kDefaultGridSize);
}

// A transform sampled on a log-spaced grid, carrying its exact first two
// moments. Off-grid evaluation:
//   * inside the grid: monotone cubic Hermite in (log s, log value). Node
//     slopes come from fourth-order centered differences, clipped to the
//     Fritsch-Carlson monotone region, so the interpolant never overshoots
//     while keeping near-spectral accuracy on smooth data.
//   * below the grid: the two-term expansion 1 - mu1 s + mu2 s^2/2, clamped
//     to [e^{-mu1 s}, eckberg_bound(s)].
//   * above the grid: the midpoint of that envelope, so the error is at most
//     half the envelope width.
class LstCurve {
public:
    LstCurve(std::vector<double> grid, std::vector<double> values, MomentPair mp)
        : grid_(std::move(grid)), values_(std::move(values)), mp_(mp) {
        if (grid_.size() < 4 || grid_.size() != values_.size())
            fail(errc::invalid_law, "curve needs >= 4 grid points with matching values");
        if (!(mp_.mu1 > 0.0) || mp_.mu2 < mp_.mu1 * mp_.mu1 * (1.0 - 1e-12))
            fail(errc::invalid_moments, "curve moments need mu2 >= mu1^2 > 0");
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (!(grid_[i] > 0.0)) fail(errc::invalid_law, "grid must be positive");
            if (i > 0 && grid_[i] <= grid_[i - 1]) fail(errc::invalid_law, "grid must increase");
        }
        u0_ = std::log(grid_.front());
        h_ = (std::log(grid_.back()) - u0_) / static_cast<double>(grid_.size() - 1);
        for (std::size_t i = 1; i + 1 < grid_.size(); ++i) {
            const double u = std::log(grid_[i]);
            if (std::abs(u - (u0_ + h_ * static_cast<double>(i))) > 1e-9 * std::max(1.0, std::abs(u)))
                fail(errc::invalid_law, "grid must be log-spaced");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            double v = values_[i];
            if (!(v > -1e-9 && v <= 1.0 + 1e-9))
                fail(errc::invalid_law, "curve values must lie in (0,1]");
            // clamp into the analytic envelope; keeps log() finite in the tail
            const double lo = std::max(std::exp(-mp_.mu1 * grid_[i]), 1e-300);
            const double hi = std::min(1.0, eckberg_bound(mp_, grid_[i]) + 1e-12);
            if (v < lo - 1e-8 || v > hi + 1e-8)
                fail(errc::invalid_law, "curve value escapes its moment envelope");
            values_[i] = std::clamp(v, lo, hi);
            if (i > 0) values_[i] = std::min(values_[i], values_[i - 1]);
        }
        build_interpolant();
    }

    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    MomentPair moments() const noexcept { return mp_; }
    double mu1() const noexcept { return mp_.mu1; }
    double mu2() const noexcept { return mp_.mu2; }

    double eval(double s) const {
        if (s < 0.0) fail(errc::negative_s, "transform argument must be >= 0");
        if (s == 0.0) return 1.0;
        if (s < grid_.front()) {
            const double taylor = 1.0 - mp_.mu1 * s + 0.5 * mp_.mu2 * s * s;
            return std::clamp(taylor, std::exp(-mp_.mu1 * s), eckberg_bound(mp_, s));
        }
        if (s > grid_.back()) {
            const double lo = std::exp(-mp_.mu1 * s);
            return 0.5 * (lo + eckberg_bound(mp_, s));
        }
        const double u = std::log(s);
        std::size_t i = static_cast<std::size_t>(std::max(0.0, (u - u0_) / h_));
        if (i > grid_.size() - 2) i = grid_.size() - 2;
        const double t = std::clamp((u - (u0_ + h_ * static_cast<double>(i))) / h_, 0.0, 1.0);
        const double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        const double h10 = t * (1.0 - t) * (1.0 - t);
        const double h01 = t * t * (3.0 - 2.0 * t);
        const double h11 = t * t * (t - 1.0);
        const double w = logv_[i] * h00 + h_ * deriv_[i] * h10 +
                         logv_[i + 1] * h01 + h_ * deriv_[i + 1] * h11;
        return std::exp(w);
    }

    // exact Taylor form of (1 - F(s))/(mu1 s) for sub-grid arguments,
    // avoiding the 1 - (1 - eps) cancellation
    double one_minus_over_mu_s(double s) const {
        if (s < grid_.front())
            return std::clamp(1.0 - 0.5 * (mp_.mu2 / mp_.mu1) * s, 0.0, 1.0);
        return (1.0 - eval(s)) / (mp_.mu1 * s);
    }

private:
    void build_interpolant() {
        const std::size_t n = values_.size();
        logv_.resize(n);
        for (std::size_t i = 0; i < n; ++i) logv_[i] = std::log(std::max(values_[i], 1e-300));
        deriv_.assign(n, 0.0);
        for (std::size_t i = 2; i + 2 < n; ++i)
            deriv_[i] = (logv_[i - 2] - 8.0 * logv_[i - 1] + 8.0 * logv_[i + 1] - logv_[i + 2]) / (12.0 * h_);
        deriv_[1] = (logv_[2] - logv_[0]) / (2.0 * h_);
        deriv_[n - 2] = (logv_[n - 1] - logv_[n - 3]) / (2.0 * h_);
        deriv_[0] = (-3.0 * logv_[0] + 4.0 * logv_[1] - logv_[2]) / (2.0 * h_);
        deriv_[n - 1] = (3.0 * logv_[n - 1] - 4.0 * logv_[n - 2] + logv_[n - 3]) / (2.0 * h_);
        // clip slopes for a nonincreasing data set: d_i in [-3*min(|sec|), 0]
        for (std::size_t i = 0; i < n; ++i) {
            const double sec_l = i > 0 ? (logv_[i] - logv_[i - 1]) / h_ : (logv_[1] - logv_[0]) / h_;
            const double sec_r = i + 1 < n ? (logv_[i + 1] - logv_[i]) / h_
                                           : (logv_[n - 1] - logv_[n - 2]) / h_;
            const double cap = 3.0 * std::min(std::abs(sec_l), std::abs(sec_r));
            deriv_[i] = -std::min(std::max(-deriv_[i], 0.0), cap);
        }
    }

    std::vector<double> grid_, values_, logv_, deriv_;
    MomentPair mp_;
    double u0_ = 0.0, h_ = 0.0;
};

inline double lst_eval(const DiscreteMeasure& m, double s) { return m.lst(s); }
inline double lst_eval(const LstCurve& c, double s) { return c.eval(s); }

// Mean of the first-order equilibrium law, mu2/(2 mu1).
inline double equilibrium_mean(MomentPair mp) { return mp.mu2 / (2.0 * mp.mu1); }

// Transform of the first-order equilibrium law, (1 - F(s))/(mu1 s) <= 1.
inline double equilibrium_lst(const DiscreteMeasure& m, double s) {
    if (!(s > 0.0)) fail(errc::zero_s, "equilibrium transform needs s > 0");
    const double m1 = m.mean();
    if (!(m1 > 0.0)) fail(errc::zero_mean, "equilibrium transform needs a positive mean");
    return std::min(1.0, m.lst_one_minus(s) / (m1 * s));
}

inline double equilibrium_lst(const LstCurve& c, double s) {
    if (!(s > 0.0)) fail(errc::zero_s, "equilibrium transform needs s > 0");
    return std::min(1.0, c.one_minus_over_mu_s(s));
}

// F_alpha(s) = F(s^alpha): the transform of S_alpha * X^{1/alpha} with
// S_alpha the one-sided alpha-stable multiplier.
template <typename Src>
double stable_map(const Src& src, double alpha, double s) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::alpha_out_of_range, "alpha must lie in (0,1)");
    if (s < 0.0) fail(errc::negative_s, "transform argument must be >= 0");
    if (s == 0.0) return 1.0;
    return lst_eval(src, std::pow(s, alpha));
}

// Dump format consumed by the CLI: header "s,value", one pair per grid
// point, 17 significant digits.
inline void write_curve_csv(std::ostream& os, std::span<const double> grid,
                            std::span<const double> values) {
    os << "s,value\n";
    char buf[128];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid[i], values[i]);
        os << buf;
    }
}

} // namespace pfp
