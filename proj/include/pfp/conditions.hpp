#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pfp/errors.hpp"
#include "pfp/measures.hpp"

namespace pfp {

enum class EquationKind {
    homogeneous,              // X = sum_{i<=N} T_i X_i
    floored,                  // X = sum_{i<=N+m} T_i X_i, m >= 1
    nonhomogeneous,           // X = B + sum_{i<=N} T_i X_i
    common_t,                 // X = T * sum_{i<=N} X_i
    nonhomogeneous_common_t,  // X = B + T * sum_{i<=N} X_i
};

inline bool is_nonhomogeneous(EquationKind k) {
    return k == EquationKind::nonhomogeneous || k == EquationKind::nonhomogeneous_common_t;
}

inline bool is_common_scaling(EquationKind k) {
    return k == EquationKind::common_t || k == EquationKind::nonhomogeneous_common_t;
}

struct ProblemSpec {
    EquationKind kind;
    CountLaw n;
    DiscreteMeasure t;
    std::optional<DiscreteMeasure> b;  // present exactly for nonhomogeneous kinds
    double mu = 0.0;                   // target mean; derived for nonhomogeneous kinds
    int m = 0;                         // floor count, >= 1 for the floored kind

    int floor_m() const { return kind == EquationKind::floored ? m : 0; }

    void validate() const {
        if (is_nonhomogeneous(kind)) {
            if (!b) fail(errc::spec_invalid, "nonhomogeneous kinds require a B law");
        } else {
            if (b) fail(errc::spec_invalid, "B is only meaningful for nonhomogeneous kinds");
            if (!(mu > 0.0)) fail(errc::spec_invalid, "target mean must be > 0");
        }
        if (kind == EquationKind::floored) {
            if (m < 1) fail(errc::spec_invalid, "floored kind requires m >= 1");
        } else if (m != 0) {
            fail(errc::spec_invalid, "m is only meaningful for the floored kind");
        }
    }
};

// E[X] of the solution: the free target for homogeneous kinds, derived as
// E[B]/(1 - E[N]E[T]) for nonhomogeneous ones.
inline double target_mean(const ProblemSpec& p) {
    if (!is_nonhomogeneous(p.kind)) return p.mu;
    const double drift = count_stats(p.n).mean * p.t.mean();
    if (!(drift < 1.0))
        fail(errc::conditions_not_satisfied, "mean equation needs E[N]E[T] < 1");
    return p.b->mean() / (1.0 - drift);
}

struct ConditionScalars {
    double e_n, var_n, e_n2;
    double e_t, e_t2, var_t;
    double rho;  // E[T^2]/E[T]
    std::optional<double> e_b, var_b, mu_derived;
};

struct ConditionReport {
    bool satisfied = false;
    ConditionScalars scalars{};
    std::vector<std::string> failures;
    std::optional<double> liu_alpha;
    bool liu4 = false;   // solvability: E[N]E[T^a]=1 with E[T^a log T] <= 0, Pr(T>0)E[N] > 1
    bool liu5 = false;   // finite-mean solvability set
    bool prop1 = false;  // Pr(T>0)E[N] > 1 and E[T log T] < 0
    bool uniqueness_certified = false;
    std::string verdict;
    double tol_eq = 1e-9;
};

struct LiuAlphaRoot {
    double alpha;
    bool log_condition;  // E[T^alpha log T] <= 0 at the root
};

namespace detail {

inline double e_t_pow(const DiscreteMeasure& t, double alpha) {
    return t.moment(alpha);
}

inline double e_t_pow_log(const DiscreteMeasure& t, double alpha) {
    double acc = 0.0;
    for (const Atom& a : t.atoms())
        if (a.location > 0.0)
            acc += a.mass * std::pow(a.location, alpha) * std::log(a.location);
    return acc;  // 0 log 0 = 0
}

} // namespace detail

// Root of E[N] E[T^alpha] = 1 on (0,1], located by bisection after a sign
// check at the endpoints; phi(0+) = E[N] Pr(T>0).
inline std::optional<LiuAlphaRoot> solve_liu_alpha(const CountLaw& n, const DiscreteMeasure& t) {
    const double e_n = count_stats(n).mean;
    if (!(e_n > 0.0) || !(t.mass_positive() > 0.0)) return std::nullopt;
    const auto phi = [&](double a) { return e_n * detail::e_t_pow(t, a); };
    const double at_one = phi(1.0);
    if (std::abs(at_one - 1.0) <= 1e-12)
        return LiuAlphaRoot{1.0, detail::e_t_pow_log(t, 1.0) <= 0.0};
    const double at_zero = e_n * t.mass_positive();
    if ((at_zero - 1.0) * (at_one - 1.0) > 0.0) return std::nullopt;
    double lo = 0.0, hi = 1.0;
    double f_lo = at_zero - 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = phi(mid) - 1.0;
        if ((f_lo < 0.0) == (f_mid < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    const double root = 0.5 * (lo + hi);
    return LiuAlphaRoot{root, detail::e_t_pow_log(t, root) <= 0.0};
}

// Clause-by-clause verdict for the kind-matched existence/uniqueness
// condition set, with diagnostics for the weaker classical sets.
inline ConditionReport check_conditions(const ProblemSpec& p, double tol_eq = 1e-9) {
    p.validate();
    ConditionReport rep;
    rep.tol_eq = tol_eq;

    const CountStats ns = count_stats(p.n);
    const double a = p.t.mean();
    const double b2 = p.t.second_moment();
    rep.scalars = {ns.mean, ns.variance, ns.second_moment,
                   a, b2, b2 - a * a,
                   a > 0.0 ? b2 / a : std::numeric_limits<double>::infinity(),
                   std::nullopt, std::nullopt, std::nullopt};

    auto require = [&](bool ok, const std::string& clause) {
        if (!ok) rep.failures.push_back(clause);
    };

    switch (p.kind) {
        case EquationKind::homogeneous:
        case EquationKind::common_t:
            require(std::abs(ns.mean * a - 1.0) <= tol_eq, "E[N]E[T]=1");
            require(b2 > 0.0, "0<E[T^2]");
            require(b2 < a, "E[T^2]<E[T]");
            require(a < 1.0, "E[T]<1");
            require(std::isfinite(ns.second_moment), "E[N^2]<inf");
            break;
        case EquationKind::floored: {
            if (p.m == 1) {
                require(a > 0.0 && std::abs(ns.mean - (1.0 - a) / a) <= tol_eq,
                        "E[N]=(1-E[T])/E[T]");
                require(a < 1.0, "E[T]<1");
            } else {
                require(a > 0.0 && std::abs(ns.mean - (1.0 - p.m * a) / a) <= tol_eq,
                        "E[N]=(1-mE[T])/E[T]");
                require(a <= 1.0 / p.m + tol_eq, "E[T]<=1/m");
            }
            require(b2 > 0.0, "0<E[T^2]");
            require(b2 < a, "E[T^2]<E[T]");
            require(std::isfinite(ns.second_moment), "E[N^2]<inf");
            break;
        }
        case EquationKind::nonhomogeneous:
        case EquationKind::nonhomogeneous_common_t: {
            const double e_b = p.b->mean();
            const double var_b = p.b->variance();
            rep.scalars.e_b = e_b;
            rep.scalars.var_b = var_b;
            require(e_b > 0.0, "E[B]>0");
            require(ns.mean * a > 0.0, "0<E[N]E[T]");
            require(ns.mean * a < 1.0, "E[N]E[T]<1");
            require(ns.mean * b2 > 0.0, "0<E[N]E[T^2]");
            require(ns.mean * b2 < 1.0, "E[N]E[T^2]<1");
            require(p.n.prob_zero() < 1.0, "Pr(N=0)<1");
            require(p.t.mass_at_zero() < 1.0, "Pr(T=0)<1");
            // Var(B)+Var(T)+Var(N) = 0 means every law is degenerate and the
            // unique solution is the point mass at the derived mean; that is
            // admissible here, not a rejection.
            if (ns.mean * a < 1.0)
                rep.scalars.mu_derived = e_b / (1.0 - ns.mean * a);
            break;
        }
    }

    rep.satisfied = rep.failures.empty();
    if (is_nonhomogeneous(p.kind)) {
        rep.uniqueness_certified = rep.satisfied && b2 < a;
        rep.verdict = !rep.satisfied ? "not satisfied"
                     : rep.uniqueness_certified ? "satisfied"
                                                : "exists, uniqueness not certified";
    } else {
        rep.uniqueness_certified = rep.satisfied;
        rep.verdict = rep.satisfied ? "satisfied" : "not satisfied";
    }

    // diagnostics on the classical condition sets (they constrain N and T only)
    const double pr_t_pos = p.t.mass_positive();
    const double e_t_log_t = detail::e_t_pow_log(p.t, 1.0);
    rep.prop1 = pr_t_pos * ns.mean > 1.0 && e_t_log_t < 0.0;
    if (auto root = solve_liu_alpha(p.n, p.t)) {
        rep.liu_alpha = root->alpha;
        rep.liu4 = pr_t_pos * ns.mean > 1.0 && root->log_condition;
    }
    // E[N log+ N] is finite for every supported family
    rep.liu5 = pr_t_pos * ns.mean > 1.0 && std::abs(ns.mean * a - 1.0) <= tol_eq &&
               e_t_log_t < 0.0;
    return rep;
}

} // namespace pfp
