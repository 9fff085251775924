#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pfp/config.hpp"
#include "pfp/conditions.hpp"
#include "pfp/errors.hpp"
#include "pfp/simulate.hpp"
#include "pfp/solver.hpp"
#include "pfp/transforms.hpp"

namespace pfp {

namespace detail {

using nlohmann::json;

inline json to_json(const ConditionReport& r) {
    json scalars{{"e_n", r.scalars.e_n},     {"var_n", r.scalars.var_n},
                 {"e_n2", r.scalars.e_n2},   {"e_t", r.scalars.e_t},
                 {"e_t2", r.scalars.e_t2},   {"var_t", r.scalars.var_t},
                 {"rho", r.scalars.rho}};
    if (r.scalars.e_b) scalars["e_b"] = *r.scalars.e_b;
    if (r.scalars.var_b) scalars["var_b"] = *r.scalars.var_b;
    if (r.scalars.mu_derived) scalars["mu_derived"] = *r.scalars.mu_derived;
    json j{{"satisfied", r.satisfied},
           {"verdict", r.verdict},
           {"scalars", scalars},
           {"failures", r.failures},
           {"liu4", r.liu4},
           {"liu5", r.liu5},
           {"prop1", r.prop1},
           {"uniqueness_certified", r.uniqueness_certified},
           {"tol_eq", r.tol_eq}};
    j["liu_alpha"] = r.liu_alpha ? json(*r.liu_alpha) : json(nullptr);
    return j;
}

inline json to_json(const MomentReport& r) {
    return {{"mu1", r.mu1}, {"mu2", r.mu2}, {"variance", r.variance},
            {"formula_kind", r.formula_kind}};
}

inline json to_json(const SolveResult& r) {
    json j{{"backend", r.is_discrete() ? "discrete" : "grid"},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"sup_diff_final", r.sup_diffs.empty() ? 0.0 : r.sup_diffs.back()},
           {"contraction_rate", r.contraction_rate},
           {"certified_error", r.certified_error},
           {"moment_drift", r.moment_drift},
           {"extrapolation_used", r.extrapolation_used},
           {"max_pointwise_increase", r.max_pointwise_increase},
           {"extracted_mu1", r.extracted_mu1},
           {"extracted_mu2", r.extracted_mu2},
           {"extracted_variance", r.extracted_mu2 - r.extracted_mu1 * r.extracted_mu1}};
    j["solution_size"] = r.is_discrete() ? r.measure().size() : r.curve().grid().size();
    return j;
}

inline json to_json(const McReport& r) {
    return {{"n_samples", r.n_samples}, {"depth", r.depth},   {"mean_hat", r.mean_hat},
            {"var_hat", r.var_hat},     {"se_mean", r.se_mean}, {"se_var", r.se_var},
            {"seed", r.seed}};
}

} // namespace detail

struct RunOutcome {
    int exit_code = 0;
    nlohmann::json report;        // emitted to stdout (or run.output) as JSON
    std::optional<std::string> curve_csv;   // emitted instead of JSON for stable-map
};

// Dispatches one command against a parsed configuration. Exit code 0 on
// success, 2 when the condition set is not satisfied, 3 when the report
// command finds its three variance estimates inconsistent; errors throw.
inline RunOutcome run_command(const RunConfig& cfg) {
    using nlohmann::json;
    using clock = std::chrono::steady_clock;
    RunOutcome out;
    json meta{{"version", kVersion}, {"seed", cfg.seed}, {"command", cfg.command}};
    json timings;

    const auto timed = [&](const char* name, auto&& fn) {
        const auto t0 = clock::now();
        auto result = fn();
        timings[name] =
            std::chrono::duration_cast<std::chrono::microseconds>(clock::now() - t0).count() /
            1000.0;
        return result;
    };

    const ConditionReport cond =
        timed("check_ms", [&] { return check_conditions(cfg.problem, cfg.tol_eq); });
    out.report["conditions"] = detail::to_json(cond);

    if (!cond.satisfied) {
        out.exit_code = 2;
        meta["timings_ms"] = timings;
        out.report["meta"] = meta;
        return out;
    }

    SolveOptions sopts;
    sopts.tol = cfg.tol;
    sopts.max_iter = cfg.max_iter;
    sopts.backend = cfg.backend;

    auto dump_solution_curve = [&](const SolveResult& sr) {
        std::ostringstream os;
        if (sr.is_discrete()) {
            const std::vector<double> grid = default_lst_grid();
            std::vector<double> vals(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = sr.measure().lst(grid[i]);
            write_curve_csv(os, grid, vals);
        } else {
            write_curve_csv(os, sr.curve().grid(), sr.curve().values());
        }
        return os.str();
    };

    if (cfg.command == "check") {
        // verdict already emitted
    } else if (cfg.command == "solve" || cfg.command == "report" || cfg.command == "stable-map") {
        const MomentReport cf = closed_form_moments(cfg.problem);
        out.report["closed_form"] = detail::to_json(cf);
        const SolveResult sr = timed("solve_ms", [&] { return solve(cfg.problem, sopts); });
        out.report["solve"] = detail::to_json(sr);
        if (cfg.curve_path) {
            std::ofstream f(*cfg.curve_path);
            if (!f) fail(errc::io_error, "cannot open " + *cfg.curve_path);
            f << dump_solution_curve(sr);
        }
        if (cfg.command == "stable-map") {
            if (!cfg.alpha) fail(errc::missing_field, "run.alpha (or --alpha) for stable-map");
            const double alpha = *cfg.alpha;
            const std::vector<double> grid = default_lst_grid();
            std::vector<double> vals(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i)
                vals[i] = std::visit(
                    [&](const auto& sol) { return stable_map(sol, alpha, grid[i]); },
                    sr.solution);
            std::ostringstream os;
            write_curve_csv(os, grid, vals);
            out.curve_csv = os.str();
        }
        if (cfg.command == "report") {
            const McReport mc = timed("mc_ms", [&] {
                return mc_estimate(cfg.problem, cfg.samples, cfg.depth, cfg.seed);
            });
            out.report["mc"] = detail::to_json(mc);
            const double var_cf = cf.variance;
            const double var_solver = sr.extracted_mu2 - sr.extracted_mu1 * sr.extracted_mu1;
            const double tol_solver = 1e-4 * std::max(1.0, std::abs(var_cf)) + sr.moment_drift;
            const double tol_mc = std::max(0.05 * std::abs(var_cf), 3.0 * mc.se_var);
            const bool consistent = std::abs(var_solver - var_cf) <= tol_solver &&
                                    std::abs(mc.var_hat - var_cf) <= tol_mc;
            out.report["comparison"] = {{"variance_closed_form", var_cf},
                                        {"variance_solver", var_solver},
                                        {"variance_mc", mc.var_hat},
                                        {"tol_solver", tol_solver},
                                        {"tol_mc", tol_mc},
                                        {"consistent", consistent}};
            if (!consistent) out.exit_code = 3;
        }
    } else if (cfg.command == "simulate") {
        const McReport mc = timed("mc_ms", [&] {
            return mc_estimate(cfg.problem, cfg.samples, cfg.depth, cfg.seed);
        });
        out.report["mc"] = detail::to_json(mc);
    } else {
        fail(errc::parse_error, "unknown command \"" + cfg.command + "\"");
    }

    meta["timings_ms"] = timings;
    out.report["meta"] = meta;
    return out;
}

} // namespace pfp
