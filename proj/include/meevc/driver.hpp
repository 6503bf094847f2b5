#pragma once

// Run configuration and the experiment drivers behind the command-line tool.

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "cases.hpp"
#include "io.hpp"
#include "mesh.hpp"
#include "timestepper.hpp"

namespace meevc {

enum class Mode { simulate, converge_time, converge_space, reverse };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::simulate: return "simulate";
        case Mode::converge_time: return "converge-time";
        case Mode::converge_space: return "converge-space";
        case Mode::reverse: return "reverse";
    }
    return "?";
}

inline std::string to_string(MeshPattern p) { return p == MeshPattern::diagonal ? "diagonal" : "crisscross"; }

struct RunConfig {
    std::string case_name = "taylor-green";
    int nx = 20, ny = 20;
    MeshPattern pattern = MeshPattern::diagonal;
    std::string mesh_file;  ///< overrides nx/ny/pattern when set
    int degree = 1;
    double dt = 0.0;
    std::vector<double> dts;  ///< converge-time
    std::vector<int> cells;   ///< converge-space: nx = ny = cells[i]
    double t_end = 1.0;
    std::optional<double> nu;  ///< defaults to the case viscosity
    std::string out_dir = "meevc-out";
    int snapshot_every = 0;  ///< steps between VTK snapshots; 0 disables them
    Mode mode = Mode::simulate;
    bool paper = false;

    double viscosity() const { return nu.value_or(case_by_name(case_name).nu); }
};

namespace detail {

inline bool is_step_multiple(double span, double dt) {
    const double n = span / dt;
    return std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, n) && std::round(n) >= 1.0;
}

}  // namespace detail

/// Full-size settings: 6400-triangle shear layer, t = 8 reversal, untruncated
/// Taylor-Green studies.
inline void apply_paper_mode(RunConfig& c) {
    if (c.case_name == "shear-layer") {
        c.mesh_file.clear();
        c.nx = c.ny = 40;
        c.pattern = MeshPattern::crisscross;
        c.degree = 1;
        if (c.mode == Mode::reverse) c.t_end = 8.0;
        if (c.mode == Mode::simulate) c.t_end = 16.0;
    } else if (c.mode == Mode::converge_time) {
        c.degree = 4;
        c.dts = {1.0, 0.5, 0.25, 0.125, 0.0625};
        c.t_end = 1.0;
    } else if (c.mode == Mode::converge_space) {
        c.t_end = 1.0;
        if (c.degree == 1) c.dt = 2.5e-2;
        if (c.degree == 2) c.dt = 1e-3;
        if (c.degree == 4) c.dt = 1e-4;
    }
}

/// Throws UsageError on any inconsistent combination.
inline void validate(const RunConfig& c) {
    const auto fail = [](const std::string& m) { throw UsageError(m); };
    try {
        case_by_name(c.case_name);
    } catch (const InvalidArgument& e) {
        fail(e.what());
    }
    if (c.degree < 1 || c.degree > max_degree) fail("--p must be in 1..4");
    if (c.nx < 1 || c.ny < 1) fail("--nx and --ny must be >= 1");
    if (!(c.t_end > 0.0)) fail("--t-end must be positive");
    if (c.nu && !(*c.nu >= 0.0)) fail("--nu must be non-negative");
    if (c.snapshot_every < 0) fail("--snapshot-every must be >= 0");
    const auto check_dt = [&](double dt) {
        if (!(dt > 0.0)) fail("time steps must be positive");
        if (!detail::is_step_multiple(c.t_end, dt)) fail("--t-end must be a positive integer multiple of dt = " + detail::fmt17(dt));
    };
    switch (c.mode) {
        case Mode::simulate:
        case Mode::reverse:
            if (c.dt == 0.0) fail("missing required flag --dt (required: --dt; optional: --case --nx --ny --p --t-end --nu --out)");
            check_dt(c.dt);
            if (c.mode == Mode::reverse && c.viscosity() != 0.0) fail("reverse mode requires --nu 0 (reversibility holds only for inviscid flow)");
            break;
        case Mode::converge_time: {
            if (c.dts.empty()) fail("missing required flag --dts (comma separated time steps)");
            const std::set<double> distinct(c.dts.begin(), c.dts.end());
            if (distinct.size() < 2) fail("--dts needs at least two distinct time steps");
            for (double dt : c.dts) check_dt(dt);
            if (!case_by_name(c.case_name).has_exact()) fail("convergence studies need a case with an exact solution");
            break;
        }
        case Mode::converge_space: {
            if (c.dt == 0.0) fail("missing required flag --dt");
            check_dt(c.dt);
            const std::set<int> distinct(c.cells.begin(), c.cells.end());
            if (distinct.size() < 2) fail("--cells needs at least two distinct mesh sizes");
            for (int n : c.cells)
                if (n < 1) fail("--cells entries must be >= 1");
            if (!case_by_name(c.case_name).has_exact()) fail("convergence studies need a case with an exact solution");
            break;
        }
    }
}

/// Plain "key = value" manifest of the full configuration.
inline void write_manifest(std::ostream& out, const RunConfig& c) {
    const auto list = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::fmt17(static_cast<double>(v[i]));
        return s;
    };
    out << "case = " << c.case_name << "\nmode = " << to_string(c.mode) << "\n";
    if (c.mesh_file.empty())
        out << "mesh = generated " << c.nx << "x" << c.ny << " " << to_string(c.pattern) << "\n";
    else
        out << "mesh = file " << c.mesh_file << "\n";
    out << "p = " << c.degree << "\ndt = " << detail::fmt17(c.dt) << "\ndts = " << list(c.dts) << "\ncells = " << list(c.cells)
        << "\nt_end = " << detail::fmt17(c.t_end) << "\nnu = " << detail::fmt17(c.viscosity()) << "\nout = " << c.out_dir
        << "\nsnapshot_every = " << c.snapshot_every << "\npaper = " << (c.paper ? "true" : "false") << "\n";
}

struct Problem {
    CaseDefinition flow;
    std::shared_ptr<const Mesh> mesh;
    Discretization d;
};

inline Problem build_problem(const RunConfig& c, int nx, int ny) {
    Problem p{case_by_name(c.case_name), nullptr, {}};
    if (!c.mesh_file.empty()) {
        p.mesh = std::make_shared<const Mesh>(load_mesh(c.mesh_file));
        if (std::abs(p.mesh->lx() - p.flow.lx) > 1e-9 * p.flow.lx || std::abs(p.mesh->ly() - p.flow.ly) > 1e-9 * p.flow.ly)
            throw InvalidArgument("mesh '" + c.mesh_file + "' does not cover the " + p.flow.name + " domain");
    } else {
        p.mesh = std::make_shared<const Mesh>(make_periodic_rect_mesh(nx, ny, p.flow.lx, p.flow.ly, c.pattern));
    }
    p.d = Discretization::build(p.mesh, c.degree);
    return p;
}

inline Problem build_problem(const RunConfig& c) { return build_problem(c, c.nx, c.ny); }

/// Divergence-free projected velocity and L2-projected vorticity of the case's initial data.
inline std::pair<Field, Field> initial_fields(const Problem& p) {
    return {project_solenoidal(p.d, p.flow.initial_velocity()), project_l2(p.d.W, p.flow.initial_vorticity())};
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw InvalidArgument("loglog_slope: abscissae must be distinct");
    return sxy / sxx;
}

struct SimulationResult {
    RunResult run;
    std::vector<std::filesystem::path> snapshots;
};

/// Bootstrap plus forward run; writes diagnostics.csv, snapshots, manifest and a final checkpoint.
inline SimulationResult simulate(const RunConfig& c) {
    const Problem p = build_problem(c);
    const auto [u0, w0] = initial_fields(p);
    Stepper st(p.d);
    const SimState s0 = st.bootstrap(u0, w0, c.dt, c.viscosity());
    const std::filesystem::path out = c.out_dir;
    std::filesystem::create_directories(out);
    {
        auto m = detail::open_for_write(out / "run.manifest");
        write_manifest(m, c);
    }
    SimulationResult res;
    const auto snap = [&](const SimState& s) {
        if (c.snapshot_every <= 0 || s.k % c.snapshot_every != 0) return;
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%06d.vtk", s.k);
        save_vtk(out / name, s);
        res.snapshots.push_back(out / name);
    };
    snap(s0);
    RunOptions opts;
    opts.exact = p.flow.has_exact() ? &p.flow : nullptr;
    opts.on_step = [&](const SimState& s, const StepReport&) { snap(s); };
    res.run = st.run(s0, c.t_end, opts);
    save_diagnostics_csv(out / "diagnostics.csv", res.run.records);
    save_checkpoint(out / "final.checkpoint", res.run.state);
    return res;
}

struct TimeConvergenceRow {
    double dt = 0.0;
    double err_u = 0.0;        ///< final velocity iterate against the exact solution at t_end
    double err_u_staged = 0.0; ///< same iterate against the exact solution at its own time t_end + dt/2
    double err_w = 0.0;        ///< vorticity at t_end
};

struct TimeConvergence {
    std::vector<TimeConvergenceRow> rows;
    double slope = 0.0, slope_staged = 0.0, slope_w = 0.0;
};

inline TimeConvergence run_convergence_time(const RunConfig& c, const std::function<void(const TimeConvergenceRow&)>& on_row = {}) {
    const Problem p = build_problem(c);
    const auto [u0, w0] = initial_fields(p);
    const double nu = c.viscosity();
    TimeConvergence tc;
    for (double dt : c.dts) {
        Stepper st(p.d);
        const RunResult r = st.run(st.bootstrap(u0, w0, dt, nu), c.t_end);
        TimeConvergenceRow row;
        row.dt = dt;
        row.err_u = l2_error(r.state.u, p.flow.exact_velocity(c.t_end, nu));
        row.err_u_staged = l2_error(r.state.u, p.flow.exact_velocity(r.state.u.time, nu));
        row.err_w = l2_error(r.state.omega, p.flow.exact_vorticity(r.state.omega.time, nu));
        tc.rows.push_back(row);
        if (on_row) on_row(row);
    }
    std::vector<double> x, e, es, ew;
    for (const auto& row : tc.rows) x.push_back(row.dt), e.push_back(row.err_u), es.push_back(row.err_u_staged), ew.push_back(row.err_w);
    tc.slope = loglog_slope(x, e);
    tc.slope_staged = loglog_slope(x, es);
    tc.slope_w = loglog_slope(x, ew);
    return tc;
}

struct SpaceConvergenceRow {
    int cells = 0;
    double h = 0.0;
    double err_u = 0.0;  ///< velocity at its own time level
    double err_w = 0.0;
};

struct SpaceConvergence {
    std::vector<SpaceConvergenceRow> rows;
    double slope = 0.0, slope_w = 0.0;
};

inline SpaceConvergence run_convergence_space(const RunConfig& c, const std::function<void(const SpaceConvergenceRow&)>& on_row = {}) {
    const double nu = c.viscosity();
    SpaceConvergence sc;
    for (int n : c.cells) {
        const Problem p = build_problem(c, n, n);
        const auto [u0, w0] = initial_fields(p);
        Stepper st(p.d);
        const RunResult r = st.run(st.bootstrap(u0, w0, c.dt, nu), c.t_end);
        SpaceConvergenceRow row;
        row.cells = n;
        row.h = p.flow.lx / n;
        row.err_u = l2_error(r.state.u, p.flow.exact_velocity(r.state.u.time, nu));
        row.err_w = l2_error(r.state.omega, p.flow.exact_vorticity(r.state.omega.time, nu));
        sc.rows.push_back(row);
        if (on_row) on_row(row);
    }
    std::vector<double> h, e, ew;
    for (const auto& row : sc.rows) h.push_back(row.h), e.push_back(row.err_u), ew.push_back(row.err_w);
    sc.slope = loglog_slope(h, e);
    sc.slope_w = loglog_slope(h, ew);
    return sc;
}

struct ReversalResult {
    RunResult forward, backward;
    double vorticity_error = 0.0;  ///< max |omega_back - omega_0| over coefficients
    double velocity_error = 0.0;
    double pressure_mismatch = 0.0;
};

inline ReversalResult run_reversal(const RunConfig& c) {
    const Problem p = build_problem(c);
    const auto [u0, w0] = initial_fields(p);
    Stepper st(p.d);
    const SimState s0 = st.bootstrap(u0, w0, c.dt, 0.0);
    ReversalResult rr;
    rr.forward = st.run(s0, c.t_end);
    rr.backward = st.run_reversed(rr.forward.state, c.t_end);
    rr.vorticity_error = (rr.backward.state.omega.coeffs - s0.omega.coeffs).cwiseAbs().maxCoeff();
    rr.velocity_error = (rr.backward.state.u.coeffs - s0.u.coeffs).cwiseAbs().maxCoeff();
    for (const auto& rep : rr.backward.reports)
        if (rep.pressure_mismatch) rr.pressure_mismatch = std::max(rr.pressure_mismatch, *rep.pressure_mismatch);
    return rr;
}

}  // namespace meevc
