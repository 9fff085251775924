#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pfp/conditions.hpp"
#include "pfp/errors.hpp"
#include "pfp/measures.hpp"
#include "pfp/numeric.hpp"
#include "pfp/transforms.hpp"

namespace pfp {

struct MomentReport {
    double mu1;
    double mu2;
    double variance;
    std::string formula_kind;
};

namespace detail {

struct KindScalars {
    double e_t, e_t2, var_t;
    double e_n, var_n, e_n2;
    double e_k, fact2_k;  // K = N + m: E[K], E[K(K-1)]
    double e_b = 0.0, var_b = 0.0, e_b2 = 0.0;
};

inline KindScalars kind_scalars(const ProblemSpec& p) {
    KindScalars ks{};
    const CountStats ns = count_stats(p.n);
    ks.e_t = p.t.mean();
    ks.e_t2 = p.t.second_moment();
    ks.var_t = ks.e_t2 - ks.e_t * ks.e_t;
    ks.e_n = ns.mean;
    ks.var_n = ns.variance;
    ks.e_n2 = ns.second_moment;
    const double m = static_cast<double>(p.floor_m());
    ks.e_k = ns.mean + m;
    ks.fact2_k = ns.factorial2 + 2.0 * m * ns.mean + m * (m - 1.0);
    if (p.b) {
        ks.e_b = p.b->mean();
        ks.e_b2 = p.b->second_moment();
        ks.var_b = ks.e_b2 - ks.e_b * ks.e_b;
    }
    return ks;
}

inline const char* formula_name(EquationKind k) {
    switch (k) {
        case EquationKind::homogeneous: return "homogeneous";
        case EquationKind::floored: return "floored";
        case EquationKind::nonhomogeneous: return "nonhomogeneous";
        case EquationKind::common_t: return "common_t";
        case EquationKind::nonhomogeneous_common_t: return "nonhomogeneous_common_t";
    }
    return "?";
}

} // namespace detail

// Exact first and second moments of the finite-variance solution, by the
// kind-matched closed form.
inline MomentReport closed_form_moments(const ProblemSpec& p) {
    const ConditionReport rep = check_conditions(p);
    if (!rep.satisfied)
        fail(errc::conditions_not_satisfied, "clause \"" + rep.failures.front() + "\" fails");
    const detail::KindScalars ks = detail::kind_scalars(p);
    MomentReport out;
    out.formula_kind = detail::formula_name(p.kind);
    switch (p.kind) {
        case EquationKind::homogeneous:
        case EquationKind::floored: {
            const double mu = p.mu;
            const double denom = 1.0 - ks.e_k * ks.e_t2;
            out.mu1 = mu;
            out.mu2 = ks.fact2_k * ks.e_t * ks.e_t / denom * mu * mu;
            out.variance = (ks.e_t * ks.e_t * ks.var_n + ks.e_k * ks.var_t) / denom * mu * mu;
            break;
        }
        case EquationKind::common_t: {
            const double mu = p.mu;
            const double denom = 1.0 - ks.e_n * ks.e_t2;
            out.mu1 = mu;
            out.mu2 = ks.fact2_k * ks.e_t2 / denom * mu * mu;
            out.variance = (ks.e_n2 * ks.e_t2 - 1.0) / denom * mu * mu;
            break;
        }
        case EquationKind::nonhomogeneous: {
            const double mu = ks.e_b / (1.0 - ks.e_n * ks.e_t);
            const double denom = 1.0 - ks.e_n * ks.e_t2;
            out.mu1 = mu;
            out.variance =
                (ks.var_b + mu * mu * ks.e_t * ks.e_t * ks.var_n + mu * mu * ks.e_n * ks.var_t) /
                denom;
            out.mu2 = out.variance + mu * mu;
            break;
        }
        case EquationKind::nonhomogeneous_common_t: {
            const double mu = ks.e_b / (1.0 - ks.e_n * ks.e_t);
            const double denom = 1.0 - ks.e_n * ks.e_t2;
            out.mu1 = mu;
            out.variance =
                (ks.var_b + ks.e_b * (2.0 * mu - ks.e_b) + (ks.e_n2 * ks.e_t2 - 1.0) * mu * mu) /
                denom;
            out.mu2 = out.variance + mu * mu;
            break;
        }
    }
    return out;
}

enum class Backend { automatic, grid, discrete };

struct SolveOptions {
    double tol = 1e-8;
    std::optional<int> max_iter;
    Backend backend = Backend::automatic;
    double merge_delta = 1e-9;
    std::size_t atom_cap = kDefaultAtomCap;
};

struct SolveResult {
    std::variant<DiscreteMeasure, LstCurve> solution = DiscreteMeasure::point_mass(0.0);
    Backend backend = Backend::grid;
    int iterations = 0;
    bool converged = false;
    std::vector<double> sup_diffs;         // sup_i |F_n - F_{n+1}| over the grid
    std::vector<double> scaled_sup_diffs;  // sup_i |F_n - F_{n+1}| / (mu1 s_i)
    double contraction_rate = 0.0;         // E[T^2]/E[T]
    double certified_error = 0.0;
    double moment_drift = 0.0;             // accumulated second-moment deficit from pooling
    bool extrapolation_used = false;
    double max_pointwise_increase = 0.0;   // monotonicity diagnostic
    double extracted_mu1 = 0.0;            // mean recovered from the transform near 0
    double extracted_mu2 = 0.0;

    bool is_discrete() const { return std::holds_alternative<DiscreteMeasure>(solution); }
    const DiscreteMeasure& measure() const { return std::get<DiscreteMeasure>(solution); }
    const LstCurve& curve() const { return std::get<LstCurve>(solution); }
    double solution_lst(double s) const {
        return std::visit([s](const auto& x) { return lst_eval(x, s); }, solution);
    }
};

namespace detail {

// One application of the equation's right-hand side to grid values, reading
// the previous iterate through the curve's interpolant at the scaled
// abscissas {t_j s}.
inline std::vector<double> apply_map_grid(const ProblemSpec& p, const LstCurve& cur,
                                          const std::vector<double>& grid,
                                          const std::vector<double>& b_vals) {
    const int m = p.floor_m();
    const bool common = is_common_scaling(p.kind);
    const bool nonhom = is_nonhomogeneous(p.kind);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s = grid[i];
        double v;
        if (!common) {
            double inner = 0.0;
            for (const Atom& ta : p.t.atoms()) inner += ta.mass * cur.eval(ta.location * s);
            inner = std::clamp(inner, 0.0, 1.0);
            v = pgf_eval(p.n, inner);
            for (int r = 0; r < m; ++r) v *= inner;
        } else {
            v = 0.0;
            for (const Atom& ta : p.t.atoms())
                v += ta.mass * pgf_eval(p.n, std::clamp(cur.eval(ta.location * s), 0.0, 1.0));
        }
        if (nonhom) v *= b_vals[i];
        out[i] = v;
    }
    return out;
}

// ---- exact-atom backend ----------------------------------------------------
//
// Atom algebra with lattice pooling between stages: uniform pitch below
// l_split, mantissa-quantized geometric bins (<= 2^-10 relative width) for
// the sparse far tail. Pooling collapses each bin to its mass-weighted mean,
// so total mass and the first moment are preserved and the second-moment
// deficit is tracked exactly. The lattice only ever coarsens within a solve,
// so a stationary measure maps to a bit-identical successor.

struct StagedAtoms {
    std::vector<Atom> atoms;
    double deficit = 0.0;
};

// Pooling a bin to its mass-weighted mean moves the transform at s by at
// most v * s^2/2 * e^{-s x_lo}, with v the within-bin variance and x_lo the
// bin's lower edge; the solver uses the summed bounds as its per-node
// monotonicity allowance.
struct PoolEvent {
    double x_lo;
    double var;
};

class DiscreteEngine {
public:
    DiscreteEngine(const ProblemSpec& p, MomentPair mp, double merge_delta, std::size_t cap)
        : spec_(&p), cap_(cap) {
        support_ = p.n.support();
        floor_m_ = p.floor_m();
        k_max_ = 0;
        e_k_ = static_cast<double>(floor_m_);
        for (auto& [k, w] : support_) {
            k_max_ = std::max(k_max_, k + floor_m_);
            e_k_ += w * static_cast<double>(k);
        }
        l_split_ = 16.0 * std::max(mp.mu1, std::sqrt(mp.mu2));
        final_delta_ = std::max(merge_delta, l_split_ / 131072.0);
        stage_delta_ = std::max(merge_delta, l_split_ / 32768.0);
        split_bits_ = std::bit_cast<std::uint64_t>(l_split_);
    }

    std::pair<DiscreteMeasure, double> step(const DiscreteMeasure& cur) {
        events_.clear();
        StagedAtoms result;
        if (!is_common_scaling(spec_->kind)) {
            // law of T*X; its pooling error enters once per product factor
            const StagedAtoms base = scaled_product(cur);
            StagedAtoms mix = power_mixture(base, nullptr);
            result = rebin(mix, final_delta_, final_shift_, cap_, 1.0);
        } else {
            StagedAtoms xs{cur.atoms(), 0.0};
            std::vector<PoolEvent> x_events;
            if (xs.atoms.size() > kStageCap)
                xs = rebin_with_events(xs, stage_delta_, stage_shift_, kStageCap, e_k_, &x_events);
            const StagedAtoms pooled = power_mixture(xs, &x_events);
            // pooling in X-space maps to (t x_lo, w t^2 v) after the shared scaling
            for (const Atom& ta : spec_->t.atoms())
                for (const PoolEvent& e : x_events)
                    events_.push_back({ta.location * e.x_lo,
                                       ta.mass * ta.location * ta.location * e.var});
            StagedAtoms scaled;
            scaled.atoms.reserve(pooled.atoms.size() * spec_->t.size());
            for (const Atom& ta : spec_->t.atoms()) {
                scaled.deficit += ta.mass * ta.location * ta.location * pooled.deficit;
                for (const Atom& xa : pooled.atoms) {
                    const double mass = ta.mass * xa.mass;
                    if (mass > 0.0) scaled.atoms.push_back({ta.location * xa.location, mass});
                }
            }
            result = rebin(scaled, final_delta_, final_shift_, cap_, 1.0);
        }
        if (spec_->b) {
            const StagedAtoms bs{spec_->b->atoms(), 0.0};
            result = convolve_binned(result, bs, final_delta_, final_shift_, cap_, 1.0, nullptr);
        }
        return {DiscreteMeasure::from_raw(std::move(result.atoms)), result.deficit};
    }

    // Upper bound on how much this step's poolings may have moved the
    // transform at each grid point.
    std::vector<double> pool_allowance(const std::vector<double>& grid) const {
        std::vector<double> a(grid.size(), 0.0);
        for (const PoolEvent& e : events_)
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double s = grid[i];
                a[i] += e.var * 0.5 * s * s * std::exp(-s * e.x_lo);
            }
        return a;
    }

private:
    static constexpr std::size_t kStageCap = 4096;

    // mixture over the count support of the (k + m)-fold convolution powers;
    // convolution operands are stage-pooled to bound the pair count, outputs
    // keep the full resolution of the final lattice
    StagedAtoms power_mixture(const StagedAtoms& base, std::vector<PoolEvent>* events) {
        std::vector<PoolEvent>* ev = events ? events : &events_;
        StagedAtoms pw{{{0.0, 1.0}}, 0.0};
        StagedAtoms mix;
        for (long ke = 0;; ++ke) {
            for (auto& [k, w] : support_) {
                if (k + floor_m_ != ke) continue;
                mix.deficit += w * pw.deficit;
                for (const Atom& a : pw.atoms) mix.atoms.push_back({a.location, w * a.mass});
            }
            if (ke >= k_max_) break;
            StagedAtoms lhs =
                pw.atoms.size() > kStageCap
                    ? rebin_with_events(pw, stage_delta_, stage_shift_, kStageCap, 1.0, ev)
                    : std::move(pw);
            pw = convolve_binned(lhs, base, final_delta_, final_shift_, cap_, 1.0, ev);
        }
        return mix;
    }

    StagedAtoms scaled_product(const DiscreteMeasure& x) {
        StagedAtoms raw;
        raw.atoms.reserve(spec_->t.size() * x.size());
        for (const Atom& ta : spec_->t.atoms())
            for (const Atom& xa : x.atoms()) {
                const double mass = ta.mass * xa.mass;
                if (mass > 0.0) raw.atoms.push_back({ta.location * xa.location, mass});
            }
        return rebin_with_events(raw, stage_delta_, stage_shift_, kStageCap, e_k_, &events_);
    }

    StagedAtoms convolve_binned(const StagedAtoms& a, const StagedAtoms& b, double& delta,
                                int& shift, std::size_t cap, double multiplicity,
                                std::vector<PoolEvent>* events) {
        StagedAtoms raw;
        raw.deficit = a.deficit + b.deficit;
        raw.atoms.reserve(a.atoms.size() * b.atoms.size());
        for (const Atom& x : a.atoms)
            for (const Atom& y : b.atoms) {
                const double mass = x.mass * y.mass;
                if (mass > 0.0) raw.atoms.push_back({x.location + y.location, mass});
            }
        return rebin_with_events(raw, delta, shift, cap, multiplicity,
                                 events ? events : &events_);
    }

    StagedAtoms rebin(const StagedAtoms& in, double& delta, int& shift, std::size_t cap,
                      double multiplicity) {
        return rebin_with_events(in, delta, shift, cap, multiplicity, &events_);
    }

    // Pool onto the lattice, widening it until the result fits under cap.
    // delta and shift persist in the engine and only ever grow, so the
    // lattice seen by a stationary measure never changes.
    StagedAtoms rebin_with_events(const StagedAtoms& in, double& delta, int& shift,
                                  std::size_t cap, double multiplicity,
                                  std::vector<PoolEvent>* events) {
        StagedAtoms out = bin_once(in, delta, shift, multiplicity, events);
        while (out.atoms.size() > cap) {
            delta *= 2.0;
            shift = std::min(shift + 1, 51);
            out = bin_once(out, delta, shift, multiplicity, events);
        }
        return out;
    }

    StagedAtoms bin_once(const StagedAtoms& in, double delta, int shift, double multiplicity,
                         std::vector<PoolEvent>* events) const {
        double max_loc = 0.0;
        for (const Atom& a : in.atoms) max_loc = std::max(max_loc, a.location);
        const std::size_t bulk_keys = 2 + static_cast<std::size_t>(l_split_ / delta);
        const std::uint64_t split_q = split_bits_ >> shift;
        std::size_t tail_keys = 0;
        if (max_loc >= l_split_)
            tail_keys = (std::bit_cast<std::uint64_t>(max_loc) >> shift) - split_q + 1;
        const std::size_t nkeys = bulk_keys + tail_keys + 1;

        std::vector<double> m(nkeys, 0.0), ml(nkeys, 0.0), ml2(nkeys, 0.0);
        std::vector<std::size_t> touched;
        touched.reserve(std::min(in.atoms.size(), nkeys));
        const double inv_delta = 1.0 / delta;
        for (const Atom& a : in.atoms) {
            std::size_t key;
            if (a.location == 0.0) {  // an exact zero atom never pools upward
                key = 0;
            } else if (a.location < l_split_) {
                key = 1 + static_cast<std::size_t>(a.location * inv_delta);
            } else {
                key = bulk_keys + ((std::bit_cast<std::uint64_t>(a.location) >> shift) - split_q);
            }
            if (m[key] == 0.0) touched.push_back(key);
            m[key] += a.mass;
            ml[key] += a.mass * a.location;
            ml2[key] += a.mass * a.location * a.location;
        }
        std::sort(touched.begin(), touched.end());
        StagedAtoms out;
        out.deficit = in.deficit;
        out.atoms.reserve(touched.size());
        const double rel_width = std::ldexp(2.0, shift - 52);  // tail bin relative span
        for (std::size_t key : touched) {
            const double mass = m[key];
            if (mass <= 0.0) continue;
            const double loc = ml[key] / mass;
            const double var = ml2[key] - mass * loc * loc;
            if (var > 0.0) {
                out.deficit += var;
                if (events) {
                    const double width = key < bulk_keys ? delta : loc * rel_width;
                    events->push_back({std::max(0.0, loc - width), multiplicity * var});
                }
            }
            out.atoms.push_back({loc, mass});
        }
        return out;
    }

    const ProblemSpec* spec_;
    std::vector<std::pair<long, double>> support_;
    int floor_m_ = 0;
    long k_max_ = 0;
    double e_k_ = 0.0;
    std::size_t cap_;
    double l_split_;
    std::uint64_t split_bits_;
    double final_delta_, stage_delta_;
    int final_shift_ = 42, stage_shift_ = 42;
    std::vector<PoolEvent> events_;
};

} // namespace detail

// One application of the right-hand-side operator, transform backend.
inline LstCurve picard_step(const ProblemSpec& p, const LstCurve& cur) {
    p.validate();
    std::vector<double> grid = cur.grid();
    std::vector<double> b_vals(grid.size(), 1.0);
    if (is_nonhomogeneous(p.kind))
        for (std::size_t i = 0; i < grid.size(); ++i) b_vals[i] = p.b->lst(grid[i]);
    std::vector<double> vals = detail::apply_map_grid(p, cur, grid, b_vals);
    return LstCurve(std::move(grid), std::move(vals), cur.moments());
}

// One application of the right-hand-side operator, exact-atom backend.
inline std::pair<DiscreteMeasure, double> picard_step(const ProblemSpec& p,
                                                      const DiscreteMeasure& cur,
                                                      double merge_delta = 1e-9,
                                                      std::size_t atom_cap = kDefaultAtomCap) {
    p.validate();
    if (!p.n.finite_support())
        fail(errc::backend_unsupported, "exact backend needs a finite-support count law");
    MomentPair mp{cur.mean(), cur.second_moment()};
    detail::DiscreteEngine engine(p, mp, merge_delta, atom_cap);
    return engine.step(cur);
}

// Constructs the unique finite-variance solution by monotone fixed-point
// iteration started from the two-point law matching the closed-form moments.
// Every iterate keeps those moments, decreases pointwise, and stays inside
// the envelope [e^{-mu1 s}, F_0(s)]; successive decrements contract at the
// length-biased mean E[T^2]/E[T] in the |diff|/(mu1 s) metric, which yields
// the 2 mu_W s rate^n error certificate.
inline SolveResult solve(const ProblemSpec& p, SolveOptions opts = {}) {
    p.validate();
    const ConditionReport cond = check_conditions(p);
    if (!cond.satisfied)
        fail(errc::conditions_not_satisfied, "clause \"" + cond.failures.front() + "\" fails");
    const MomentReport cf = closed_form_moments(p);
    const detail::KindScalars ks = detail::kind_scalars(p);
    const MomentPair mp{cf.mu1, cf.mu2};
    const double mu_w = equilibrium_mean(mp);
    const double rate_cert = ks.e_k * ks.e_t2;  // equals E[T^2]/E[T] when E[K]E[T] = 1

    Backend backend = opts.backend;
    if (backend == Backend::automatic)
        backend = p.n.finite_support() ? Backend::discrete : Backend::grid;
    if (backend == Backend::discrete && !p.n.finite_support())
        fail(errc::backend_unsupported, "exact backend needs a finite-support count law");

    const std::vector<double> grid = default_lst_grid();
    const double s_max = grid.back();
    int max_iter;
    if (opts.max_iter) {
        max_iter = *opts.max_iter;
    } else {
        max_iter = 10;
        const double target = opts.tol / (2.0 * mu_w * s_max);
        if (target < 1.0 && rate_cert > 0.0 && rate_cert < 1.0)
            max_iter += static_cast<int>(std::ceil(std::log(target) / std::log(rate_cert)));
    }

    SolveResult res;
    res.backend = backend;
    res.contraction_rate = ks.e_t2 / ks.e_t;
    if (backend == Backend::grid)
        for (const Atom& ta : p.t.atoms())
            if (ta.location > 1.0) res.extrapolation_used = true;

    // every iterate lives in [e^{-mu1 s}, F_0(s)]; values outside are pure
    // numerical error and are clipped back before any bookkeeping
    std::vector<double> lower(grid.size()), upper(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        lower[i] = std::exp(-mp.mu1 * grid[i]);
        upper[i] = eckberg_bound(mp, grid[i]);
    }
    constexpr double kMonoTol = 1e-9;

    auto check_increase = [&](const std::vector<double>& nv, const std::vector<double>& ov,
                              const std::vector<double>* allowance) {
        double increase = 0.0, excess = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            increase = std::max(increase, nv[i] - ov[i]);
            const double slack = allowance ? (*allowance)[i] : 0.0;
            excess = std::max(excess, nv[i] - ov[i] - slack);
        }
        res.max_pointwise_increase = std::max(res.max_pointwise_increase, increase);
        if (excess > kMonoTol)
            fail(errc::monotonicity_violated,
                 "pointwise increase " + std::to_string(excess) + " at iteration " +
                     std::to_string(res.iterations + 1));
    };

    auto record_diffs = [&](const std::vector<double>& nv, const std::vector<double>& ov) {
        double sup = 0.0, scaled = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = std::abs(nv[i] - ov[i]);
            sup = std::max(sup, d);
            scaled = std::max(scaled, d / (mp.mu1 * grid[i]));
        }
        res.sup_diffs.push_back(sup);
        res.scaled_sup_diffs.push_back(scaled);
        ++res.iterations;
        return sup;
    };

    if (backend == Backend::grid) {
        std::vector<double> b_vals(grid.size(), 1.0);
        if (is_nonhomogeneous(p.kind))
            for (std::size_t i = 0; i < grid.size(); ++i) b_vals[i] = p.b->lst(grid[i]);
        LstCurve cur(grid, upper, mp);
        for (int it = 0; it < max_iter; ++it) {
            std::vector<double> mapped = detail::apply_map_grid(p, cur, grid, b_vals);
            const std::vector<double>& old_vals = cur.values();
            for (std::size_t i = 0; i < mapped.size(); ++i)
                mapped[i] = std::clamp(mapped[i], lower[i], upper[i]);
            check_increase(mapped, old_vals, nullptr);
            // decrements are measured on the enforced monotone sequence; the
            // raw map can sit a sub-tolerance hair above it (Taylor branch
            // bias at sub-grid abscissas) without ever decreasing further
            for (std::size_t i = 0; i < mapped.size(); ++i)
                mapped[i] = std::min(mapped[i], old_vals[i]);
            const double sup = record_diffs(mapped, old_vals);
            cur = LstCurve(grid, std::move(mapped), mp);
            if (sup <= opts.tol) {
                res.converged = true;
                break;
            }
        }
        const auto& v = cur.values();
        const double s0 = grid[0], s1 = grid[1], s2 = grid[2];
        res.extracted_mu1 = quadratic_extrapolate_to_zero(
            s0, s1, s2, (1.0 - v[0]) / s0, (1.0 - v[1]) / s1, (1.0 - v[2]) / s2);
        res.extracted_mu2 =
            2.0 * quadratic_extrapolate_to_zero(
                      s0, s1, s2, (v[0] - 1.0 + res.extracted_mu1 * s0) / (s0 * s0),
                      (v[1] - 1.0 + res.extracted_mu1 * s1) / (s1 * s1),
                      (v[2] - 1.0 + res.extracted_mu1 * s2) / (s2 * s2));
        res.solution = std::move(cur);
    } else {
        detail::DiscreteEngine engine(p, mp, opts.merge_delta, opts.atom_cap);
        DiscreteMeasure cur = eckberg_two_atom(mp);
        auto grid_lst = [&](const DiscreteMeasure& mm) {
            std::vector<double> out(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) out[i] = mm.lst(grid[i]);
            return out;
        };
        std::vector<double> old_vals = grid_lst(cur);
        // both the step that produced the old iterate and the current one
        // may have pooled; their combined bound is the admissible slack
        std::vector<double> prev_allowance(grid.size(), 0.0);
        for (int it = 0; it < max_iter; ++it) {
            auto [next, deficit] = engine.step(cur);
            res.moment_drift += deficit;
            cur = std::move(next);
            std::vector<double> new_vals = grid_lst(cur);
            std::vector<double> allowance = engine.pool_allowance(grid);
            for (std::size_t i = 0; i < grid.size(); ++i) allowance[i] += prev_allowance[i];
            check_increase(new_vals, old_vals, &allowance);
            const double sup = record_diffs(new_vals, old_vals);
            for (std::size_t i = 0; i < grid.size(); ++i)
                prev_allowance[i] = allowance[i] - prev_allowance[i];
            old_vals = std::move(new_vals);
            if (sup <= opts.tol) {
                res.converged = true;
                break;
            }
        }
        const double s0 = 1e-6;
        auto mean_q = [&](double s) { return cur.lst_one_minus(s) / s; };
        res.extracted_mu1 = quadratic_extrapolate_to_zero(s0, 2.0 * s0, 4.0 * s0, mean_q(s0),
                                                          mean_q(2.0 * s0), mean_q(4.0 * s0));
        auto second_q = [&](double s) {
            return (res.extracted_mu1 * s - cur.lst_one_minus(s)) / (s * s);
        };
        res.extracted_mu2 = 2.0 * quadratic_extrapolate_to_zero(s0, 2.0 * s0, 4.0 * s0,
                                                                second_q(s0), second_q(2.0 * s0),
                                                                second_q(4.0 * s0));
        res.solution = std::move(cur);
    }

    const double analytic = 2.0 * mu_w * s_max * std::pow(rate_cert, res.iterations);
    const double empirical = (res.sup_diffs.empty() || rate_cert >= 1.0)
                                 ? analytic
                                 : res.sup_diffs.back() * rate_cert / (1.0 - rate_cert);
    res.certified_error = std::min(analytic, empirical);
    return res;
}

} // namespace pfp
