#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfp/conditions.hpp"
#include "pfp/errors.hpp"
#include "pfp/measures.hpp"
#include "pfp/solver.hpp"

namespace pfp {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    ProblemSpec problem;
    std::string command = "check";  // check | solve | simulate | stable-map | report
    double tol = 1e-8;
    std::optional<int> max_iter;
    Backend backend = Backend::automatic;
    std::size_t samples = 100000;
    std::size_t depth = 40;
    std::optional<double> alpha;
    std::uint64_t seed = 0;
    std::optional<std::string> output_path;
    std::optional<std::string> curve_path;
    double tol_eq = 1e-9;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end())
            fail(errc::parse_error, "unknown key \"" + where + "." + it.key() + "\"");
    }
}

inline double require_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) fail(errc::missing_field, where + "." + key);
    if (!obj[key].is_number()) fail(errc::parse_error, where + "." + key + " must be a number");
    return obj[key].get<double>();
}

inline DiscreteMeasure parse_measure(const json& obj, const std::string& where) {
    reject_unknown_keys(obj, {"atoms"}, where);
    if (!obj.contains("atoms")) fail(errc::missing_field, where + ".atoms");
    if (!obj["atoms"].is_array()) fail(errc::parse_error, where + ".atoms must be an array");
    std::vector<Atom> atoms;
    for (const auto& pair : obj["atoms"]) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
            fail(errc::parse_error, where + ".atoms entries must be [location, mass] pairs");
        atoms.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    try {
        return DiscreteMeasure::from_atoms(std::move(atoms));
    } catch (const Error& e) {
        fail(errc::invalid_law, where + ": " + e.what());
    }
}

inline CountLaw parse_count_law(const json& obj) {
    if (!obj.contains("family")) fail(errc::missing_field, "N.family");
    const std::string family = obj["family"].get<std::string>();
    try {
        if (family == "degenerate") {
            reject_unknown_keys(obj, {"family", "k"}, "N");
            if (!obj.contains("k")) fail(errc::missing_field, "N.k");
            return CountLaw::degenerate(obj["k"].get<long>());
        }
        if (family == "explicit_pmf") {
            reject_unknown_keys(obj, {"family", "pmf"}, "N");
            if (!obj.contains("pmf")) fail(errc::missing_field, "N.pmf");
            std::vector<std::pair<long, double>> pmf;
            for (const auto& pair : obj["pmf"]) {
                if (!pair.is_array() || pair.size() != 2)
                    fail(errc::parse_error, "N.pmf entries must be [k, mass] pairs");
                pmf.emplace_back(pair[0].get<long>(), pair[1].get<double>());
            }
            return CountLaw::explicit_pmf(std::move(pmf));
        }
        if (family == "geometric1") {
            reject_unknown_keys(obj, {"family", "p"}, "N");
            return CountLaw::geometric1(require_number(obj, "p", "N"));
        }
        if (family == "geometric0") {
            reject_unknown_keys(obj, {"family", "p"}, "N");
            return CountLaw::geometric0(require_number(obj, "p", "N"));
        }
        if (family == "poisson") {
            reject_unknown_keys(obj, {"family", "lambda"}, "N");
            return CountLaw::poisson(require_number(obj, "lambda", "N"));
        }
    } catch (const Error& e) {
        if (e.code() == errc::invalid_law) fail(errc::invalid_law, std::string("N: ") + e.what());
        throw;
    }
    fail(errc::invalid_law, "N.family \"" + family + "\" is not recognized");
}

inline EquationKind parse_kind(const std::string& s) {
    if (s == "homogeneous") return EquationKind::homogeneous;
    if (s == "floored") return EquationKind::floored;
    if (s == "nonhomogeneous") return EquationKind::nonhomogeneous;
    if (s == "common_t") return EquationKind::common_t;
    if (s == "nonhomogeneous_common_t") return EquationKind::nonhomogeneous_common_t;
    fail(errc::unknown_equation_kind, "equation.kind \"" + s + "\"");
}

inline const char* kind_string(EquationKind k) {
    switch (k) {
        case EquationKind::homogeneous: return "homogeneous";
        case EquationKind::floored: return "floored";
        case EquationKind::nonhomogeneous: return "nonhomogeneous";
        case EquationKind::common_t: return "common_t";
        case EquationKind::nonhomogeneous_common_t: return "nonhomogeneous_common_t";
    }
    return "?";
}

inline Backend parse_backend(const std::string& s) {
    if (s == "auto") return Backend::automatic;
    if (s == "grid") return Backend::grid;
    if (s == "discrete") return Backend::discrete;
    fail(errc::parse_error, "run.backend must be auto, grid, or discrete");
}

inline const char* backend_string(Backend b) {
    switch (b) {
        case Backend::automatic: return "auto";
        case Backend::grid: return "grid";
        case Backend::discrete: return "discrete";
    }
    return "?";
}

} // namespace detail

// Parses the single-file problem configuration: JSON blocks "equation",
// "N", "T", optional "B", optional "run". Diagnostics name the offending
// key; syntax errors report the line.
inline RunConfig parse_config(const std::string& text) {
    using nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        fail(errc::parse_error, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!root.is_object()) fail(errc::parse_error, "top level must be a JSON object");
    detail::reject_unknown_keys(root, {"equation", "N", "T", "B", "run"}, "config");
    if (!root.contains("equation")) fail(errc::missing_field, "equation");
    if (!root.contains("N")) fail(errc::missing_field, "N");
    if (!root.contains("T")) fail(errc::missing_field, "T");

    const json& eq = root["equation"];
    detail::reject_unknown_keys(eq, {"kind", "mu", "m"}, "equation");
    if (!eq.contains("kind")) fail(errc::missing_field, "equation.kind");
    const EquationKind kind = detail::parse_kind(eq["kind"].get<std::string>());

    double mu = 0.0;
    if (is_nonhomogeneous(kind)) {
        if (eq.contains("mu"))
            fail(errc::parse_error, "equation.mu is derived for nonhomogeneous kinds");
    } else {
        mu = detail::require_number(eq, "mu", "equation");
        if (!(mu > 0.0)) fail(errc::parse_error, "equation.mu must be > 0");
    }
    int m = 0;
    if (kind == EquationKind::floored) {
        if (!eq.contains("m")) fail(errc::missing_field, "equation.m");
        m = eq["m"].get<int>();
        if (m < 1) fail(errc::parse_error, "equation.m must be >= 1");
    } else if (eq.contains("m")) {
        fail(errc::parse_error, "equation.m applies to the floored kind only");
    }

    CountLaw n = detail::parse_count_law(root["N"]);
    DiscreteMeasure t = detail::parse_measure(root["T"], "T");
    std::optional<DiscreteMeasure> b;
    if (is_nonhomogeneous(kind)) {
        if (!root.contains("B")) fail(errc::missing_field, "B");
        b = detail::parse_measure(root["B"], "B");
    } else if (root.contains("B")) {
        fail(errc::parse_error, "B applies to nonhomogeneous kinds only");
    }

    RunConfig cfg{.problem = ProblemSpec{kind, std::move(n), std::move(t), std::move(b), mu, m}};
    if (root.contains("run")) {
        const json& run = root["run"];
        detail::reject_unknown_keys(run,
                                    {"command", "tol", "max_iter", "backend", "samples", "depth",
                                     "alpha", "seed", "output", "curve_output", "tol_eq"},
                                    "run");
        if (run.contains("command")) cfg.command = run["command"].get<std::string>();
        if (run.contains("tol")) cfg.tol = run["tol"].get<double>();
        if (run.contains("max_iter")) cfg.max_iter = run["max_iter"].get<int>();
        if (run.contains("backend"))
            cfg.backend = detail::parse_backend(run["backend"].get<std::string>());
        if (run.contains("samples")) cfg.samples = run["samples"].get<std::size_t>();
        if (run.contains("depth")) cfg.depth = run["depth"].get<std::size_t>();
        if (run.contains("alpha")) cfg.alpha = run["alpha"].get<double>();
        if (run.contains("seed")) cfg.seed = run["seed"].get<std::uint64_t>();
        if (run.contains("output")) cfg.output_path = run["output"].get<std::string>();
        if (run.contains("curve_output")) cfg.curve_path = run["curve_output"].get<std::string>();
        if (run.contains("tol_eq")) cfg.tol_eq = run["tol_eq"].get<double>();
    }
    cfg.problem.validate();
    return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
    using nlohmann::json;
    json root;
    root["equation"]["kind"] = detail::kind_string(cfg.problem.kind);
    if (!is_nonhomogeneous(cfg.problem.kind)) root["equation"]["mu"] = cfg.problem.mu;
    if (cfg.problem.kind == EquationKind::floored) root["equation"]["m"] = cfg.problem.m;

    json n;
    using F = CountLaw::Family;
    switch (cfg.problem.n.family()) {
        case F::degenerate:
            n["family"] = "degenerate";
            n["k"] = cfg.problem.n.degenerate_value();
            break;
        case F::explicit_pmf: {
            n["family"] = "explicit_pmf";
            json pmf = json::array();
            for (auto& [k, w] : cfg.problem.n.pmf()) pmf.push_back({k, w});
            n["pmf"] = pmf;
            break;
        }
        case F::geometric1:
            n["family"] = "geometric1";
            n["p"] = cfg.problem.n.geometric_p();
            break;
        case F::geometric0:
            n["family"] = "geometric0";
            n["p"] = cfg.problem.n.geometric_p();
            break;
        case F::poisson:
            n["family"] = "poisson";
            n["lambda"] = cfg.problem.n.poisson_lambda();
            break;
    }
    root["N"] = n;

    auto measure_json = [](const DiscreteMeasure& m) {
        json atoms = json::array();
        for (const Atom& a : m.atoms()) atoms.push_back({a.location, a.mass});
        json obj;
        obj["atoms"] = atoms;
        return obj;
    };
    root["T"] = measure_json(cfg.problem.t);
    if (cfg.problem.b) root["B"] = measure_json(*cfg.problem.b);

    json run;
    run["command"] = cfg.command;
    run["tol"] = cfg.tol;
    if (cfg.max_iter) run["max_iter"] = *cfg.max_iter;
    run["backend"] = detail::backend_string(cfg.backend);
    run["samples"] = cfg.samples;
    run["depth"] = cfg.depth;
    if (cfg.alpha) run["alpha"] = *cfg.alpha;
    run["seed"] = cfg.seed;
    if (cfg.output_path) run["output"] = *cfg.output_path;
    if (cfg.curve_path) run["curve_output"] = *cfg.curve_path;
    run["tol_eq"] = cfg.tol_eq;
    root["run"] = run;
    return root.dump(2);
}

} // namespace pfp
