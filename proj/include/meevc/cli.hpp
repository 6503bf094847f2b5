#pragma once

// Command-line front end: option parsing (CLI11) and the per-mode drivers that
// print tables and write output files.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driver.hpp"

namespace meevc {

/// Parses argv into a validated RunConfig. Returns nullopt after printing help.
/// Throws UsageError on bad flags, unknown config keys or inconsistent values.
inline std::optional<RunConfig> parse_config(const std::vector<std::string>& args, std::ostream& help_out = std::cout) {
    RunConfig c;
    CLI::App app{"Energy- and enstrophy-conserving mimetic FE solver for 2D periodic incompressible flow", "meevc"};
    app.set_config("--config", "", "read options from an INI/TOML file (keys are the long flag names)");
    app.allow_config_extras(CLI::config_extras_mode::error);

    const std::map<std::string, Mode> modes{{"simulate", Mode::simulate},
                                            {"converge-time", Mode::converge_time},
                                            {"converge-space", Mode::converge_space},
                                            {"reverse", Mode::reverse}};
    const std::map<std::string, MeshPattern> patterns{{"diagonal", MeshPattern::diagonal}, {"crisscross", MeshPattern::crisscross}};
    double nu = -1.0;

    app.add_option("--mode", c.mode, "simulate | converge-time | converge-space | reverse")->transform(CLI::CheckedTransformer(modes));
    app.add_option("--case", c.case_name, "taylor-green | shear-layer");
    app.add_option("--nx", c.nx, "cells in x");
    app.add_option("--ny", c.ny, "cells in y");
    app.add_option("--pattern", c.pattern, "diagonal | crisscross")->transform(CLI::CheckedTransformer(patterns));
    app.add_option("--mesh", c.mesh_file, "mesh file (overrides --nx/--ny/--pattern)");
    app.add_option("--p", c.degree, "polynomial degree N (1..4)");
    app.add_option("--dt", c.dt, "time step");
    app.add_option("--dts", c.dts, "time steps for converge-time")->delimiter(',');
    app.add_option("--cells", c.cells, "mesh sizes for converge-space")->delimiter(',');
    app.add_option("--t-end", c.t_end, "final time (reverse: forward span)");
    auto* nu_opt = app.add_option("--nu", nu, "viscosity (default: case value)");
    app.add_option("--out", c.out_dir, "output directory");
    app.add_option("--snapshot-every", c.snapshot_every, "steps between VTK snapshots (0: none)");
    app.add_flag("--paper", c.paper, "use the full-size reference configurations");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        help_out << app.help();
        return std::nullopt;
    } catch (const CLI::CallForAllHelp&) {
        help_out << app.help("", CLI::AppFormatMode::All);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    if (nu_opt->count() > 0) c.nu = nu;
    if (c.paper) apply_paper_mode(c);
    validate(c);
    return c;
}

inline std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::ostream& help_out = std::cout) {
    return parse_config(std::vector<std::string>(argv, argv + argc), help_out);
}

namespace detail {

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

}  // namespace detail

/// Runs the configured mode, printing a summary or table to `out`.
inline void execute(const RunConfig& c, std::ostream& out) {
    switch (c.mode) {
        case Mode::simulate: {
            const SimulationResult r = simulate(c);
            const auto& first = r.run.records.front();
            const auto& last = r.run.records.back();
            out << "steps " << r.run.reports.size() << "  t " << detail::fmt17(last.t) << '\n';
            out << "K " << detail::sci(last.K) << "  dK " << detail::sci(last.K - first.K) << '\n';
            out << "E " << detail::sci(last.E) << "  dE " << detail::sci(last.E - first.E) << '\n';
            out << "Wtot " << detail::sci(last.Wtot) << "  div " << detail::sci(last.div_norm) << '\n';
            if (last.err_u) out << "err_u " << detail::sci(*last.err_u) << "  err_w " << detail::sci(*last.err_w) << '\n';
            out << "wrote " << (std::filesystem::path(c.out_dir) / "diagnostics.csv").string() << '\n';
            break;
        }
        case Mode::converge_time: {
            out << "dt,err_u,err_u_staged,err_w\n" << std::flush;
            const TimeConvergence tc = run_convergence_time(c, [&](const TimeConvergenceRow& r) {
                out << detail::fmt17(r.dt) << ',' << detail::sci(r.err_u) << ',' << detail::sci(r.err_u_staged) << ','
                    << detail::sci(r.err_w) << '\n'
                    << std::flush;
            });
            out << "slope u " << detail::sci(tc.slope) << "  slope u (staggered time) " << detail::sci(tc.slope_staged) << "  slope w "
                << detail::sci(tc.slope_w) << '\n';
            break;
        }
        case Mode::converge_space: {
            out << "cells,h,err_u,err_w\n" << std::flush;
            const SpaceConvergence sc = run_convergence_space(c, [&](const SpaceConvergenceRow& r) {
                out << r.cells << ',' << detail::fmt17(r.h) << ',' << detail::sci(r.err_u) << ',' << detail::sci(r.err_w) << '\n' << std::flush;
            });
            out << "slope u " << detail::sci(sc.slope) << "  slope w " << detail::sci(sc.slope_w) << '\n';
            break;
        }
        case Mode::reverse: {
            const ReversalResult r = run_reversal(c);
            out << "steps " << r.forward.reports.size() << " forward, " << r.backward.reports.size() << " back\n";
            out << "max |omega_back - omega_0| " << detail::sci(r.vorticity_error) << '\n';
            out << "max |u_back - u_0| " << detail::sci(r.velocity_error) << '\n';
            out << "max pressure mismatch " << detail::sci(r.pressure_mismatch) << '\n';
            break;
        }
    }
}

/// Exit codes: 0 success, 1 other error, 2 usage error, 3 solver failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const auto c = parse_config(argc, argv, out);
        if (!c) return 0;
        execute(*c, out);
        return 0;
    } catch (const UsageError& e) {
        err << "meevc: " << e.what() << "\nrun 'meevc --help' for the list of options\n";
        return 2;
    } catch (const SolverError& e) {
        err << "meevc: solver failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "meevc: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace meevc
