#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "pfp/errors.hpp"
#include "pfp/numeric.hpp"

namespace pfp {

struct Atom {
    double location;
    double mass;
};

struct MomentPair {
    double mu1;
    double mu2;
};

// Finite discrete probability law on [0, inf): sorted atoms with strictly
// increasing locations, positive masses summing to one.
class DiscreteMeasure {
public:
    // Validating constructor for user-supplied atom lists. Duplicate
    // locations are pooled; masses are renormalized after passing the
    // mass_tol check, so the stored measure sums to one to ~1e-16.
    static DiscreteMeasure from_atoms(std::vector<Atom> atoms, double mass_tol = 1e-9) {
        if (atoms.empty()) fail(errc::invalid_law, "measure needs at least one atom");
        for (const Atom& a : atoms) {
            if (!(a.location >= 0.0) || !std::isfinite(a.location))
                fail(errc::negative_location, "atom location must be finite and >= 0");
            if (!(a.mass > 0.0) || !std::isfinite(a.mass))
                fail(errc::non_positive_mass, "atom mass must be finite and > 0");
        }
        sort_and_pool(atoms);
        std::vector<double> ms(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) ms[i] = atoms[i].mass;
        const double total = pairwise_sum(ms);
        if (std::abs(total - 1.0) > mass_tol)
            fail(errc::mass_not_normalized, "masses sum to " + std::to_string(total));
        for (Atom& a : atoms) a.mass /= total;
        return DiscreteMeasure(std::move(atoms));
    }

    static DiscreteMeasure point_mass(double location) {
        return from_atoms({{location, 1.0}});
    }

    // For internal atom algebra whose mass total is exact up to rounding;
    // pools duplicates, drops zero-mass atoms, does not renormalize.
    static DiscreteMeasure from_raw(std::vector<Atom> atoms) {
        std::erase_if(atoms, [](const Atom& a) { return a.mass <= 0.0; });
        if (atoms.empty()) fail(errc::invalid_law, "all atoms had zero mass");
        sort_and_pool(atoms);
        return DiscreteMeasure(std::move(atoms));
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }

    double total_mass() const {
        std::vector<double> ms(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i) ms[i] = atoms_[i].mass;
        return pairwise_sum(ms);
    }

    // E[X^k] with the 0^0 = 1 convention; k may be fractional.
    double moment(double k) const {
        assert(k >= 0.0);
        std::vector<double> terms(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            terms[i] = atoms_[i].mass * std::pow(atoms_[i].location, k);
        return pairwise_sum(terms);
    }

    double mean() const { return moment(1.0); }
    double second_moment() const { return moment(2.0); }
    double variance() const {
        const double m = mean();
        return second_moment() - m * m;
    }

    double mass_at_zero() const {
        return (!atoms_.empty() && atoms_.front().location == 0.0) ? atoms_.front().mass : 0.0;
    }
    double mass_positive() const { return total_mass() - mass_at_zero(); }

    // E[exp(-sX)]
    double lst(double s) const {
        if (s < 0.0) fail(errc::negative_s, "transform argument must be >= 0");
        if (s == 0.0) return 1.0;
        std::vector<double> terms(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            terms[i] = atoms_[i].mass * std::exp(-s * atoms_[i].location);
        return pairwise_sum(terms);
    }

    // 1 - E[exp(-sX)] without cancellation at small s.
    double lst_one_minus(double s) const {
        if (s < 0.0) fail(errc::negative_s, "transform argument must be >= 0");
        std::vector<double> terms(atoms_.size());
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            terms[i] = atoms_[i].mass * (-std::expm1(-s * atoms_[i].location));
        return pairwise_sum(terms);
    }

private:
    explicit DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {}

    static void sort_and_pool(std::vector<Atom>& atoms) {
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.location < b.location; });
        std::size_t w = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (w > 0 && atoms[i].location == atoms[w - 1].location) {
                atoms[w - 1].mass += atoms[i].mass;
            } else {
                atoms[w++] = atoms[i];
            }
        }
        atoms.resize(w);
    }

    std::vector<Atom> atoms_;
};

// Count law N on {0,1,2,...}. Closed-form moment and generating-function
// formulas per family; explicit pmfs are summed directly.
class CountLaw {
public:
    enum class Family { degenerate, explicit_pmf, geometric1, geometric0, poisson };

    static CountLaw degenerate(long k) {
        if (k < 0) fail(errc::invalid_law, "degenerate count must be >= 0");
        CountLaw n(Family::degenerate);
        n.k_ = k;
        return n;
    }

    static CountLaw explicit_pmf(std::vector<std::pair<long, double>> pmf, double mass_tol = 1e-9) {
        if (pmf.empty()) fail(errc::invalid_law, "explicit pmf needs at least one entry");
        for (auto& [k, w] : pmf) {
            if (k < 0) fail(errc::invalid_law, "pmf support must be >= 0");
            if (!(w > 0.0) || !std::isfinite(w)) fail(errc::invalid_law, "pmf mass must be > 0");
        }
        std::sort(pmf.begin(), pmf.end());
        std::size_t w = 0;
        for (std::size_t i = 0; i < pmf.size(); ++i) {
            if (w > 0 && pmf[i].first == pmf[w - 1].first) pmf[w - 1].second += pmf[i].second;
            else pmf[w++] = pmf[i];
        }
        pmf.resize(w);
        double total = 0.0;
        for (auto& [k, m] : pmf) total += m;
        if (std::abs(total - 1.0) > mass_tol)
            fail(errc::invalid_law, "pmf masses sum to " + std::to_string(total));
        for (auto& [k, m] : pmf) m /= total;
        CountLaw n(Family::explicit_pmf);
        n.pmf_ = std::move(pmf);
        return n;
    }

    static CountLaw geometric1(double p) {
        if (!(p > 0.0 && p < 1.0)) fail(errc::invalid_law, "geometric1 needs p in (0,1)");
        CountLaw n(Family::geometric1);
        n.p_ = p;
        return n;
    }

    static CountLaw geometric0(double p) {
        if (!(p > 0.0 && p < 1.0)) fail(errc::invalid_law, "geometric0 needs p in (0,1)");
        CountLaw n(Family::geometric0);
        n.p_ = p;
        return n;
    }

    static CountLaw poisson(double lambda) {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(errc::invalid_law, "poisson needs lambda > 0");
        CountLaw n(Family::poisson);
        n.lambda_ = lambda;
        return n;
    }

    Family family() const noexcept { return family_; }
    long degenerate_value() const { return k_; }
    double geometric_p() const { return p_; }
    double poisson_lambda() const { return lambda_; }
    const std::vector<std::pair<long, double>>& pmf() const { return pmf_; }

    bool finite_support() const noexcept {
        return family_ == Family::degenerate || family_ == Family::explicit_pmf;
    }

    std::vector<std::pair<long, double>> support() const {
        switch (family_) {
            case Family::degenerate: return {{k_, 1.0}};
            case Family::explicit_pmf: return pmf_;
            default:
                fail(errc::infinite_support_count, "count law has infinite support");
        }
    }

    double prob_zero() const {
        switch (family_) {
            case Family::degenerate: return k_ == 0 ? 1.0 : 0.0;
            case Family::explicit_pmf:
                for (auto& [k, m] : pmf_)
                    if (k == 0) return m;
                return 0.0;
            case Family::geometric1: return 0.0;
            case Family::geometric0: return p_;
            case Family::poisson: return std::exp(-lambda_);
        }
        return 0.0;
    }

private:
    explicit CountLaw(Family f) : family_(f) {}

    Family family_;
    long k_ = 0;
    double p_ = 0.0;
    double lambda_ = 0.0;
    std::vector<std::pair<long, double>> pmf_;
};

struct CountStats {
    double mean;
    double variance;
    double factorial2;     // E[N(N-1)]
    double second_moment;  // E[N^2]
};

inline CountStats count_stats(const CountLaw& n) {
    using F = CountLaw::Family;
    switch (n.family()) {
        case F::degenerate: {
            const double k = static_cast<double>(n.degenerate_value());
            return {k, 0.0, k * (k - 1.0), k * k};
        }
        case F::explicit_pmf: {
            std::vector<double> m1, m2;
            for (auto& [k, w] : n.pmf()) {
                m1.push_back(w * static_cast<double>(k));
                m2.push_back(w * static_cast<double>(k) * static_cast<double>(k));
            }
            const double mean = pairwise_sum(m1), second = pairwise_sum(m2);
            return {mean, second - mean * mean, second - mean, second};
        }
        case F::geometric1: {
            const double p = n.geometric_p();
            const double mean = 1.0 / p;
            const double second = (2.0 - p) / (p * p);
            return {mean, (1.0 - p) / (p * p), second - mean, second};
        }
        case F::geometric0: {
            const double p = n.geometric_p();
            const double mean = (1.0 - p) / p;
            const double var = (1.0 - p) / (p * p);
            const double second = var + mean * mean;
            return {mean, var, second - mean, second};
        }
        case F::poisson: {
            const double l = n.poisson_lambda();
            return {l, l, l * l, l * l + l};
        }
    }
    return {};
}

// --- atom algebra ---------------------------------------------------------

inline DiscreteMeasure scale_measure(const DiscreteMeasure& m, double c) {
    assert(c >= 0.0);
    if (c == 0.0) return DiscreteMeasure::point_mass(0.0);
    std::vector<Atom> out = m.atoms();
    for (Atom& a : out) a.location *= c;
    return DiscreteMeasure::from_raw(std::move(out));
}

inline DiscreteMeasure convolve(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    std::vector<Atom> out;
    out.reserve(a.size() * b.size());
    for (const Atom& x : a.atoms())
        for (const Atom& y : b.atoms())
            out.push_back({x.location + y.location, x.mass * y.mass});
    return DiscreteMeasure::from_raw(std::move(out));
}

inline DiscreteMeasure mixture(const std::vector<std::pair<double, DiscreteMeasure>>& parts) {
    std::vector<Atom> out;
    std::size_t total = 0;
    for (auto& [w, m] : parts) total += m.size();
    out.reserve(total);
    for (auto& [w, m] : parts) {
        if (w <= 0.0) continue;
        for (const Atom& a : m.atoms()) out.push_back({a.location, w * a.mass});
    }
    return DiscreteMeasure::from_raw(std::move(out));
}

// Reweighting dF*(t) = t dF(t) / E[T]; drops any atom at zero. The result
// has mean E[T^2]/E[T].
inline DiscreteMeasure length_biased(const DiscreteMeasure& t) {
    const double m1 = t.mean();
    if (!(m1 > 0.0)) fail(errc::zero_mean, "length bias needs E[T] > 0");
    std::vector<Atom> out;
    out.reserve(t.size());
    for (const Atom& a : t.atoms())
        if (a.location > 0.0) out.push_back({a.location, a.location * a.mass / m1});
    DiscreteMeasure r = DiscreteMeasure::from_raw(std::move(out));
    // kill the rounding drift of the reweighted total
    const double total = r.total_mass();
    std::vector<Atom> fixed = r.atoms();
    for (Atom& a : fixed) a.mass /= total;
    return DiscreteMeasure::from_raw(std::move(fixed));
}

// Two-point law {0, mu2/mu1} matching (mu1, mu2) exactly; this is the
// extremal law attaining Eckberg's transform bound. Degenerate at mu1 when
// the variance vanishes.
inline DiscreteMeasure eckberg_two_atom(MomentPair mp) {
    if (!(mp.mu1 > 0.0) || mp.mu2 < mp.mu1 * mp.mu1 * (1.0 - 1e-12))
        fail(errc::invalid_moments, "need mu2 >= mu1^2 > 0");
    const double q = mp.mu1 * mp.mu1 / mp.mu2;
    if (1.0 - q <= 1e-14) return DiscreteMeasure::point_mass(mp.mu1);
    return DiscreteMeasure::from_raw({{0.0, 1.0 - q}, {mp.mu2 / mp.mu1, q}});
}

// Exact law of the equation's right-hand side when X-copies are drawn from
// x and the count has finite support:
//   independent scaling:  sum_{i=1}^{K} T_i X_i,  K = N + m
//   common scaling:       T * sum_{i=1}^{K} X_i
// optionally shifted by an independent B.
inline DiscreteMeasure weighted_sum_law(const DiscreteMeasure& t, const DiscreteMeasure& x,
                                        const CountLaw& n, int m,
                                        const DiscreteMeasure* b, bool common_t) {
    if (!n.finite_support())
        fail(errc::infinite_support_count,
             "exact law needs a finite-support count; use the transform backend");
    assert(m >= 0);
    const auto support = n.support();
    long k_max = 0;
    for (auto& [k, w] : support) k_max = std::max(k_max, k);
    k_max += m;

    std::vector<std::pair<double, DiscreteMeasure>> parts;
    if (!common_t) {
        // law of T*X, then mixture of its convolution powers
        std::vector<Atom> tx;
        tx.reserve(t.size() * x.size());
        for (const Atom& ta : t.atoms())
            for (const Atom& xa : x.atoms())
                tx.push_back({ta.location * xa.location, ta.mass * xa.mass});
        const DiscreteMeasure base = DiscreteMeasure::from_raw(std::move(tx));

        DiscreteMeasure power = DiscreteMeasure::point_mass(0.0);
        for (long ke = 0; ke <= k_max; ++ke) {
            for (auto& [k, w] : support)
                if (k + m == ke) parts.emplace_back(w, power);
            if (ke < k_max) power = convolve(power, base);
        }
    } else {
        // mixture over plain convolution powers of x, then scaled by T
        std::vector<std::pair<double, DiscreteMeasure>> by_count;
        DiscreteMeasure power = DiscreteMeasure::point_mass(0.0);
        for (long ke = 0; ke <= k_max; ++ke) {
            for (auto& [k, w] : support)
                if (k + m == ke) by_count.emplace_back(w, power);
            if (ke < k_max) power = convolve(power, x);
        }
        const DiscreteMeasure pooled = mixture(by_count);
        for (const Atom& ta : t.atoms())
            parts.emplace_back(ta.mass, scale_measure(pooled, ta.location));
    }
    DiscreteMeasure result = mixture(parts);
    if (b != nullptr) result = convolve(result, *b);
    return result;
}

struct MergeResult {
    DiscreteMeasure measure;
    double second_moment_deficit;
};

inline constexpr std::size_t kDefaultAtomCap = 20000;

// Greedy left-to-right pooling of runs whose span stays within delta. Each
// run collapses to its mass-weighted mean, so total mass and the first
// moment are preserved; the second moment drops by the within-run variance,
// which is returned for drift accounting.
inline MergeResult merge_atoms(const DiscreteMeasure& m, double delta) {
    assert(delta > 0.0);
    const auto& in = m.atoms();
    std::vector<Atom> out;
    out.reserve(in.size());
    double deficit = 0.0;
    std::size_t i = 0;
    while (i < in.size()) {
        std::size_t j = i + 1;
        while (j < in.size() && in[j].location - in[i].location <= delta) ++j;
        if (j == i + 1) {
            out.push_back(in[i]);
        } else {
            double mass = 0.0, ml = 0.0, ml2 = 0.0;
            for (std::size_t r = i; r < j; ++r) {
                mass += in[r].mass;
                ml += in[r].mass * in[r].location;
                ml2 += in[r].mass * in[r].location * in[r].location;
            }
            const double loc = ml / mass;
            deficit += ml2 - mass * loc * loc;
            out.push_back({loc, mass});
        }
        i = j;
    }
    return {DiscreteMeasure::from_raw(std::move(out)), deficit};
}

// merge_atoms with the atom-count cap policy: the pooling width doubles
// until the result fits.
inline MergeResult merge_to_cap(const DiscreteMeasure& m, double delta,
                                std::size_t cap = kDefaultAtomCap) {
    MergeResult r = merge_atoms(m, delta);
    double deficit = r.second_moment_deficit;
    while (r.measure.size() > cap) {
        delta *= 2.0;
        r = merge_atoms(r.measure, delta);
        deficit += r.second_moment_deficit;
    }
    return {std::move(r.measure), deficit};
}

} // namespace pfp
