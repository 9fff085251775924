#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pfp/conditions.hpp"
#include "pfp/errors.hpp"
#include "pfp/measures.hpp"
#include "pfp/numeric.hpp"
#include "pfp/rng.hpp"

namespace pfp {

struct McReport {
    std::size_t n_samples = 0;
    std::size_t depth = 0;
    double mean_hat = 0.0;
    double var_hat = 0.0;
    double se_mean = 0.0;
    double se_var = 0.0;
    std::uint64_t seed = 0;
};

// Inverse-cdf sampler for a discrete law.
class MeasureSampler {
public:
    explicit MeasureSampler(const DiscreteMeasure& m) {
        locs_.reserve(m.size());
        cdf_.reserve(m.size());
        double acc = 0.0;
        for (const Atom& a : m.atoms()) {
            acc += a.mass;
            locs_.push_back(a.location);
            cdf_.push_back(acc);
        }
        cdf_.back() = 1.0;
    }

    double draw(Rng& rng) const {
        const double u = rng.uniform01();
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] < u) lo = mid + 1;
            else hi = mid;
        }
        return locs_[lo];
    }

private:
    std::vector<double> locs_, cdf_;
};

inline long draw_count(const CountLaw& n, Rng& rng) {
    using F = CountLaw::Family;
    switch (n.family()) {
        case F::degenerate: return n.degenerate_value();
        case F::explicit_pmf: {
            const double u = rng.uniform01();
            double acc = 0.0;
            for (auto& [k, w] : n.pmf()) {
                acc += w;
                if (u <= acc) return k;
            }
            return n.pmf().back().first;
        }
        case F::geometric1: return rng.geometric1(n.geometric_p());
        case F::geometric0: return rng.geometric0(n.geometric_p());
        case F::poisson: return rng.poisson(n.poisson_lambda());
    }
    return 0;
}

// One-sided alpha-stable variate with transform e^{-s^alpha}, by Kanter's
// construction from a uniform on (0,pi) and a unit exponential.
inline double sample_positive_stable(double alpha, Rng& rng) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::alpha_out_of_range, "alpha must lie in (0,1)");
    const double pi = 3.14159265358979323846;
    const double u = rng.uniform(1e-12, pi - 1e-12);
    const double e = rng.exponential();
    const double log_a = (alpha * std::log(std::sin(alpha * u)) +
                          (1.0 - alpha) * std::log(std::sin((1.0 - alpha) * u)) -
                          std::log(std::sin(u))) /
                         (1.0 - alpha);
    return std::exp(((1.0 - alpha) / alpha) * (log_a - std::log(e)));
}

namespace detail {

inline double sample_node(const ProblemSpec& p, const MeasureSampler* t_sampler,
                          const MeasureSampler* b_sampler, double mu1, std::size_t depth,
                          Rng& rng) {
    if (depth == 0) return mu1;
    const long k = draw_count(p.n, rng) + p.floor_m();
    double x = 0.0;
    if (!is_common_scaling(p.kind)) {
        for (long i = 0; i < k; ++i) {
            const double t = t_sampler->draw(rng);
            x += t * sample_node(p, t_sampler, b_sampler, mu1, depth - 1, rng);
        }
    } else {
        const double t = t_sampler->draw(rng);
        double acc = 0.0;
        for (long i = 0; i < k; ++i)
            acc += sample_node(p, t_sampler, b_sampler, mu1, depth - 1, rng);
        x = t * acc;
    }
    if (b_sampler) x += b_sampler->draw(rng);
    return x;
}

} // namespace detail

// One draw of the depth-truncated branching recursion: the right-hand side
// is expanded recursively, and every copy of X left at depth 0 is replaced
// by the constant mu1, which keeps the mean estimator unbiased at any depth.
inline double sample_once(const ProblemSpec& p, std::size_t depth, Rng& rng) {
    p.validate();
    const double mu1 = target_mean(p);
    const MeasureSampler ts(p.t);
    std::optional<MeasureSampler> bs;
    if (p.b) bs.emplace(*p.b);
    return detail::sample_node(p, &ts, bs ? &*bs : nullptr, mu1, depth, rng);
}

// Moment estimates from the depth-truncated recursion. Levels are sampled
// synchronously through resampling pools: level l draws its X-copies
// uniformly from the level l-1 pool, so the cost is linear in depth instead
// of exponential in it. The run is split into independent replicate pools;
// within one pool the resampling correlates the final values (for
// mean-critical kinds the level means form a martingale), so the standard
// errors come from the spread of the replicate estimates, not from the raw
// per-sample scatter. Sample i of level l uses the counter stream
// (seed, l, i); results are bit-identical for any chunking of the loops.
inline McReport mc_estimate(const ProblemSpec& p, std::size_t n_samples, std::size_t depth,
                            std::uint64_t seed) {
    p.validate();
    if (n_samples < 2) fail(errc::spec_invalid, "need at least 2 samples");
    const double mu1 = target_mean(p);
    const MeasureSampler ts(p.t);
    std::optional<MeasureSampler> bs;
    if (p.b) bs.emplace(*p.b);
    const bool common = is_common_scaling(p.kind);
    const long m = p.floor_m();

    const std::size_t replicates = std::clamp<std::size_t>(n_samples / 512, 2, 32);
    std::vector<double> values(n_samples);
    std::vector<double> rep_mean(replicates), rep_var(replicates);

    std::size_t offset = 0;
    for (std::size_t r = 0; r < replicates; ++r) {
        const std::size_t size = n_samples / replicates + (r < n_samples % replicates ? 1 : 0);
        std::vector<double> pool(size, mu1), next(size);
        for (std::size_t level = 1; level <= depth; ++level) {
            for (std::size_t i = 0; i < size; ++i) {
                Rng rng = Rng::stream(seed, level, offset + i);
                const long k = draw_count(p.n, rng) + m;
                double x = 0.0;
                if (!common) {
                    for (long c = 0; c < k; ++c) x += ts.draw(rng) * pool[rng.index(size)];
                } else {
                    const double t = ts.draw(rng);
                    double acc = 0.0;
                    for (long c = 0; c < k; ++c) acc += pool[rng.index(size)];
                    x = t * acc;
                }
                if (bs) x += bs->draw(rng);
                next[i] = x;
            }
            pool.swap(next);
        }
        std::copy(pool.begin(), pool.end(), values.begin() + offset);
        rep_mean[r] = pairwise_sum(pool) / static_cast<double>(size);
        std::vector<double> d2(size);
        for (std::size_t i = 0; i < size; ++i) {
            const double d = pool[i] - rep_mean[r];
            d2[i] = d * d;
        }
        rep_var[r] = size > 1 ? pairwise_sum(d2) / static_cast<double>(size - 1) : 0.0;
        offset += size;
    }

    McReport rep;
    rep.n_samples = n_samples;
    rep.depth = depth;
    rep.seed = seed;
    const double nn = static_cast<double>(n_samples);
    rep.mean_hat = pairwise_sum(values) / nn;
    std::vector<double> d2(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double d = values[i] - rep.mean_hat;
        d2[i] = d * d;
    }
    rep.var_hat = pairwise_sum(d2) / (nn - 1.0);

    const double rr = static_cast<double>(replicates);
    double sm = 0.0, sv = 0.0;
    for (std::size_t r = 0; r < replicates; ++r) {
        sm += (rep_mean[r] - rep.mean_hat) * (rep_mean[r] - rep.mean_hat);
        sv += (rep_var[r] - rep.var_hat) * (rep_var[r] - rep.var_hat);
    }
    rep.se_mean = std::sqrt(sm / (rr * (rr - 1.0)));
    rep.se_var = std::sqrt(sv / (rr * (rr - 1.0)));
    return rep;
}

} // namespace pfp
