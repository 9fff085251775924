// pfp: checker, solver, and Monte Carlo verifier for distributional
// fixed-point equations of the form X =d sum_{i<=N} T_i X_i and its floored,
// nonhomogeneous, and common-factor variants.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pfp/config.hpp"
#include "pfp/report.hpp"

namespace {

struct CliOverrides {
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<std::string> backend;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> depth;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<std::string> curve_output;
    std::optional<double> tol_eq;
};

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) pfp::fail(pfp::errc::io_error, "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run(const std::string& command, const std::string& config_path, const CliOverrides& ov) {
    pfp::RunConfig cfg = pfp::parse_config(read_file(config_path));
    cfg.command = command;
    if (ov.tol) cfg.tol = *ov.tol;
    if (ov.max_iter) cfg.max_iter = *ov.max_iter;
    if (ov.backend) cfg.backend = pfp::detail::parse_backend(*ov.backend);
    if (ov.samples) cfg.samples = *ov.samples;
    if (ov.depth) cfg.depth = *ov.depth;
    if (ov.alpha) cfg.alpha = *ov.alpha;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.output) cfg.output_path = *ov.output;
    if (ov.curve_output) cfg.curve_path = *ov.curve_output;
    if (ov.tol_eq) cfg.tol_eq = *ov.tol_eq;

    const pfp::RunOutcome outcome = pfp::run_command(cfg);
    const std::string payload =
        outcome.curve_csv ? *outcome.curve_csv : outcome.report.dump(2) + "\n";
    if (cfg.output_path) {
        std::ofstream f(*cfg.output_path);
        if (!f) pfp::fail(pfp::errc::io_error, "cannot open " + *cfg.output_path);
        f << payload;
    } else {
        std::cout << payload;
    }
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"solver and verifier for fixed-point equations X =d sum T_i X_i"};
    app.require_subcommand(1);

    CliOverrides ov;
    std::string config_path;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "problem configuration (JSON)")->required();
        cmd->add_option("--tol", ov.tol, "solver stopping tolerance (default 1e-8)");
        cmd->add_option("--max-iter", ov.max_iter, "iteration cap (default from the contraction certificate)");
        cmd->add_option("--backend", ov.backend, "auto | grid | discrete (default auto)")
            ->check(CLI::IsMember({"auto", "grid", "discrete"}));
        cmd->add_option("--samples", ov.samples, "Monte Carlo sample count (default 100000)");
        cmd->add_option("--depth", ov.depth, "Monte Carlo recursion depth (default 40)");
        cmd->add_option("--alpha", ov.alpha, "stable index in (0,1), required for stable-map");
        cmd->add_option("--seed", ov.seed, "Monte Carlo seed (default 0)");
        cmd->add_option("--output", ov.output, "write the report (or curve) to this path");
        cmd->add_option("--curve-output", ov.curve_output, "also dump the solved curve as CSV");
        cmd->add_option("--tol-eq", ov.tol_eq, "tolerance for equality clauses (default 1e-9)");
        return cmd;
    };

    add_common(app.add_subcommand("check", "evaluate the existence/uniqueness conditions"));
    add_common(app.add_subcommand("solve", "construct the finite-variance solution"));
    add_common(app.add_subcommand("simulate", "Monte Carlo moments of the branching recursion"));
    add_common(app.add_subcommand("stable-map", "dump the stable-transformed solution curve"));
    add_common(app.add_subcommand("report", "check + solve + simulate with a comparison table"));

    CLI11_PARSE(app, argc, argv);

    try {
        return run(app.get_subcommands().front()->get_name(), config_path, ov);
    } catch (const pfp::Error& e) {
        std::cerr << "error [" << e.code_name() << "] " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
