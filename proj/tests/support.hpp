#pragma once

// Shared random-instance generators for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfp/conditions.hpp"
#include "pfp/measures.hpp"
#include "pfp/rng.hpp"

namespace pfp::testgen {

struct TOptions {
    double loc_lo = 0.05;
    double loc_hi = 0.95;
    bool allow_zero_atom = true;
    double max_rho = 1.0;  // upper bound on E[T^2]/E[T]
};

// Random law for T with every atom in (0,1), so E[T^2] < E[T] < 1 holds by
// construction; optionally includes a zero atom.
inline DiscreteMeasure random_t(Rng& rng, const TOptions& opt = {}) {
    for (;;) {
        const int n_pos = 1 + static_cast<int>(rng.index(4));
        std::vector<Atom> atoms;
        double total = 0.0;
        for (int i = 0; i < n_pos; ++i) {
            const double w = 0.1 + rng.uniform01();
            atoms.push_back({rng.uniform(opt.loc_lo, opt.loc_hi), w});
            total += w;
        }
        if (opt.allow_zero_atom && rng.uniform01() < 0.3) {
            const double w = 0.3 * total * rng.uniform01();
            atoms.push_back({0.0, w});
            total += w;
        }
        for (Atom& a : atoms) a.mass /= total;
        DiscreteMeasure t = DiscreteMeasure::from_atoms(atoms);
        if (t.second_moment() / t.mean() <= opt.max_rho) return t;
    }
}

// Count law with the given mean, hit exactly: a two-point pmf on
// {floor(mean), floor(mean)+1}, or the matching geometric/poisson family
// when the mean allows it.
inline CountLaw matched_count(Rng& rng, double mean) {
    const int family = static_cast<int>(rng.index(3));
    if (family == 1 && mean > 1.0) return CountLaw::geometric1(1.0 / mean);
    if (family == 2 && mean > 0.0) return CountLaw::poisson(mean);
    const long k = static_cast<long>(std::floor(mean));
    const double hi_mass = mean - static_cast<double>(k);
    if (hi_mass < 1e-12) return CountLaw::degenerate(k);
    return CountLaw::explicit_pmf({{k, 1.0 - hi_mass}, {k + 1, hi_mass}});
}

// Random instance satisfying the kind-matched moment conditions exactly.
inline ProblemSpec conforming_instance(EquationKind kind, Rng& rng, const TOptions& topt = {}) {
    switch (kind) {
        case EquationKind::homogeneous:
        case EquationKind::common_t: {
            const DiscreteMeasure t = random_t(rng, topt);
            return {kind, matched_count(rng, 1.0 / t.mean()), t, std::nullopt,
                    rng.uniform(0.5, 2.0), 0};
        }
        case EquationKind::floored: {
            const int m = 1 + static_cast<int>(rng.index(3));
            TOptions opt = topt;
            opt.loc_hi = std::min(opt.loc_hi, 0.95 / m);
            for (;;) {
                const DiscreteMeasure t = random_t(rng, opt);
                const double target = 1.0 / t.mean() - m;
                if (target < 0.05) continue;
                return {kind, matched_count(rng, target), t, std::nullopt,
                        rng.uniform(0.5, 2.0), m};
            }
        }
        case EquationKind::nonhomogeneous:
        case EquationKind::nonhomogeneous_common_t: {
            for (;;) {
                const DiscreteMeasure t = random_t(rng, topt);
                const double mean_n = rng.uniform(0.3, std::min(2.5, 0.9 / t.mean()));
                const CountLaw n = matched_count(rng, mean_n);
                if (count_stats(n).mean * t.second_moment() > 0.9) continue;
                std::vector<Atom> batoms{{rng.uniform(0.0, 0.5), 0.5},
                                         {rng.uniform(0.8, 2.5), 0.5}};
                const DiscreteMeasure b = DiscreteMeasure::from_atoms(batoms);
                return {kind, n, t, b, 0.0, 0};
            }
        }
    }
    throw std::logic_error("unreachable");
}

} // namespace pfp::testgen
