#pragma once

// Staggered midpoint integrator: vorticity lives at integer time levels,
// velocity at half levels. One step is a vorticity transport solve followed by
// a momentum saddle-point solve.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "assembly.hpp"
#include "cases.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"

namespace meevc {

struct SolverSettings {
    double residual_tolerance = 1e-12;  ///< target relative residual of every linear solve
    double abort_tolerance = 1e-9;      ///< a solve worse than this aborts the run
    int max_refinements = 3;
    double krylov_tolerance = 1e-14;    ///< BiCGSTAB target before falling back to sparse LU
    int krylov_max_iterations = 60;
    double picard_tolerance = 1e-12;
    int picard_max_iterations = 50;
};

struct SimState {
    Field u;      ///< velocity at t_k + dt/2
    Field omega;  ///< vorticity at t_k
    Field pbar;   ///< total pressure from the latest momentum solve
    int k = 0;
    double dt = 0.0;
    double nu = 0.0;

    double time() const { return omega.time; }
};

struct StepReport {
    double vorticity_residual = 0.0;
    double velocity_residual = 0.0;
    int picard_iterations = 0;
    double picard_residual = 0.0;
    double wall_seconds = 0.0;
    std::optional<double> pressure_mismatch;  ///< backward steps only
};

/// Direct sparse LU with a residual check and iterative refinement. The symbolic
/// analysis is reused while the sparsity pattern is unchanged.
class LinearSolver {
public:
    explicit LinearSolver(SolverSettings settings = {}) : settings_(settings) {}

    /// Solves a x = b and returns the final relative residual.
    double solve(const SparseMatrix& a, const Vector& b, Vector& x) {
        if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidArgument("LinearSolver: dimension mismatch");
        factorize(a);
        x = lu_.solve(b);
        if (lu_.info() != Eigen::Success || !x.allFinite()) throw SolverError("sparse LU solve failed");
        const double bn = b.norm();
        if (bn == 0.0) {
            x.setZero();
            return 0.0;
        }
        Vector r = b - a * x;
        double rel = r.norm() / bn;
        for (int it = 0; it < settings_.max_refinements && rel > settings_.residual_tolerance; ++it) {
            x += lu_.solve(r);
            r = b - a * x;
            rel = r.norm() / bn;
        }
        if (!(rel <= settings_.abort_tolerance))
            throw SolverError("linear solve residual " + std::to_string(rel) + " exceeds abort tolerance");
        return rel;
    }

private:
    void factorize(const SparseMatrix& a) {
        const bool same = analyzed_ && a.nonZeros() == nnz_ && a.rows() == rows_ &&
                          std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, outer_.begin()) &&
                          std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), inner_.begin());
        if (!same) {
            lu_.analyzePattern(a);
            analyzed_ = true;
            rows_ = a.rows();
            nnz_ = a.nonZeros();
            outer_.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
            inner_.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
        }
        lu_.factorize(a);
        if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorization failed (singular matrix?)");
    }

    SolverSettings settings_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
    Eigen::Index rows_ = 0, nnz_ = 0;
    std::vector<int> outer_, inner_;
};

namespace detail {

inline double relative_change(const Vector& next, const Vector& prev) {
    const double n = next.norm();
    const double d = (next - prev).norm();
    return d == 0.0 ? 0.0 : d / std::max(n, std::numeric_limits<double>::min());
}

/// Krylov preconditioner that applies a cached symmetric factorization.
class FactorPreconditioner {
public:
    using Factor = Eigen::SimplicialLDLT<SparseMatrix>;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    void set(const Factor* f) { factor_ = f; }
    template <class M>
    FactorPreconditioner& analyzePattern(const M&) { return *this; }
    template <class M>
    FactorPreconditioner& factorize(const M&) { return *this; }
    template <class M>
    FactorPreconditioner& compute(const M&) { return *this; }
    template <class Rhs>
    Vector solve(const Eigen::MatrixBase<Rhs>& b) const { return factor_->solve(b.derived()); }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
    const Factor* factor_ = nullptr;
};

inline std::unique_ptr<FactorPreconditioner::Factor> factor_spd(const SparseMatrix& a, const char* what) {
    auto f = std::make_unique<FactorPreconditioner::Factor>(a);
    if (f->info() != Eigen::Success) throw AssemblyError(std::string(what) + ": factorization failed");
    return f;
}

}  // namespace detail

/// Basis of the discretely divergence-free RT fields on the torus: curls of CG
/// fields (one CG dof dropped to remove the constants) plus the two constant
/// velocity fields, which span the harmonic part.
struct SolenoidalBasis {
    SparseMatrix Z;  ///< d_U x (d_W - 1 + 2)

    static SolenoidalBasis build(const Discretization& d) {
        const SparseMatrix c = assemble_curl_matrix(*d.W, *d.U);
        const Field hx = interpolate_rt(d.U, [](double, double) { return Eigen::Vector2d(1.0, 0.0); });
        const Field hy = interpolate_rt(d.U, [](double, double) { return Eigen::Vector2d(0.0, 1.0); });
        const int nc = static_cast<int>(c.cols()) - 1;
        std::vector<Triplet> trips;
        for (int k = 1; k < c.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(c, k); it; ++it) trips.emplace_back(it.row(), k - 1, it.value());
        for (int i = 0; i < d.U->dim(); ++i) {
            if (hx.coeffs(i) != 0.0) trips.emplace_back(i, nc, hx.coeffs(i));
            if (hy.coeffs(i) != 0.0) trips.emplace_back(i, nc + 1, hy.coeffs(i));
        }
        SolenoidalBasis b;
        b.Z.resize(d.U->dim(), nc + 2);
        b.Z.setFromTriplets(trips.begin(), trips.end());
        return b;
    }
};

/// Divergence-free L2 projection into RT: minimizes ||u_h - f|| subject to D u_h = 0.
inline Field project_solenoidal(const Discretization& d, const VectorFunction& f, double time = 0.0) {
    const SolenoidalBasis basis = SolenoidalBasis::build(d);
    const SparseMatrix zt = basis.Z.transpose();
    const SparseMatrix gram = zt * d.ops.M * basis.Z;
    const auto factor = detail::factor_spd(gram, "project_solenoidal");
    const Vector b = assemble_load(*d.U, f, function_quadrature_degree(d.degree()));
    return Field(d.U, basis.Z * factor->solve(zt * b), time);
}

struct RunOptions {
    std::function<void(const SimState&, const StepReport&)> on_step;
    const CaseDefinition* exact = nullptr;  ///< adds err_u, err_w to the records when set
};

struct RunResult {
    SimState state;
    std::vector<DiagnosticRecord> records;
    std::vector<StepReport> reports;
};

class Stepper {
public:
    explicit Stepper(const Discretization& d, SolverSettings settings = {})
        : d_(d), settings_(settings), vort_solver_(settings), vel_solver_(settings) {
        basis_ = SolenoidalBasis::build(d_);
        zt_ = basis_.Z.transpose();
        vel_sym_ = detail::factor_spd(SparseMatrix(zt_ * d_.ops.M * basis_.Z), "velocity preconditioner");
        // P with the first DG column removed has full column rank.
        pressure_p_ = d_.ops.P.rightCols(d_.Q->dim() - 1);
        pressure_normal_ = detail::factor_spd(SparseMatrix(SparseMatrix(pressure_p_.transpose()) * pressure_p_), "pressure recovery");
    }

    const Discretization& discretization() const noexcept { return d_; }

    /// Implicit coupled first step by Picard iteration. Returns (u^{1/2}, omega^0).
    SimState bootstrap(const Field& u0, const Field& omega0, double dt, double nu, StepReport* report = nullptr) {
        check_inputs(u0, omega0, dt, nu);
        const double div = (d_.ops.D * u0.coeffs).cwiseAbs().maxCoeff();
        if (div > 1e-10 * std::max(1.0, u0.coeffs.cwiseAbs().maxCoeff()))
            throw InvalidArgument("bootstrap: initial velocity is not divergence-free (max |D u| = " + std::to_string(div) + ")");
        const auto start = std::chrono::steady_clock::now();
        StepReport rep;
        Field u_mid = u0, w_mid = omega0;
        Vector u1 = u0.coeffs, w1 = omega0.coeffs, p1 = Vector::Zero(d_.Q->dim());
        double change = std::numeric_limits<double>::infinity();
        int it = 0;
        while (it < settings_.picard_max_iterations) {
            ++it;
            const Vector w_prev = w1, u_prev = u1;
            rep.vorticity_residual = std::max(rep.vorticity_residual, solve_vorticity(u_mid, omega0.coeffs, dt, nu, w1));
            w_mid.coeffs = 0.5 * (omega0.coeffs + w1);
            rep.velocity_residual = std::max(rep.velocity_residual, solve_velocity(u0.coeffs, w_mid, dt, nu, u1, p1));
            u_mid.coeffs = 0.5 * (u0.coeffs + u1);
            change = std::max(detail::relative_change(w1, w_prev), detail::relative_change(u1, u_prev));
            if (change <= settings_.picard_tolerance) break;
        }
        rep.picard_iterations = it;
        rep.picard_residual = change;
        if (change > settings_.picard_tolerance)
            throw ConvergenceError("bootstrap: Picard iteration did not converge in " + std::to_string(it) + " iterations", change);
        SimState s;
        s.u = Field(d_.U, u_mid.coeffs, omega0.time + 0.5 * dt);
        s.omega = omega0;
        s.pbar = Field(d_.Q, p1, omega0.time + 0.5 * dt);
        s.k = 0;
        s.dt = dt;
        s.nu = nu;
        rep.wall_seconds = seconds_since(start);
        if (report) *report = rep;
        return s;
    }

    /// omega^{k+1} from omega^k with the transport matrix of u^{k+1/2}. A negative
    /// dt runs the same equation backwards.
    Field step_vorticity(const SimState& s, double dt, double* residual = nullptr) {
        Vector w;
        const double r = solve_vorticity(s.u, s.omega.coeffs, dt, s.nu, w);
        if (residual) *residual = r;
        return Field(d_.W, std::move(w), s.omega.time + dt);
    }

    /// u^{k+3/2} and pbar^{k+1} from u^{k+1/2} and omega^{k+1}.
    std::pair<Field, Field> step_velocity(const SimState& s, const Field& omega_next, double dt, double* residual = nullptr) {
        Vector u, p;
        const double r = solve_velocity(s.u.coeffs, omega_next, dt, s.nu, u, p);
        if (residual) *residual = r;
        return {Field(d_.U, std::move(u), s.u.time + dt), Field(d_.Q, std::move(p), omega_next.time)};
    }

    StepReport step(SimState& s) {
        const auto start = std::chrono::steady_clock::now();
        StepReport rep;
        Field w = step_vorticity(s, s.dt, &rep.vorticity_residual);
        auto [u, p] = step_velocity(s, w, s.dt, &rep.velocity_residual);
        s.omega = std::move(w);
        s.u = std::move(u);
        s.pbar = std::move(p);
        ++s.k;
        rep.wall_seconds = seconds_since(start);
        return rep;
    }

    /// Inverse of step(): the velocity back-step uses the current vorticity, then
    /// the vorticity back-step uses the recovered velocity. Inviscid only.
    StepReport step_back(SimState& s) {
        if (s.nu != 0.0) throw CapabilityError("time reversal is only defined for nu = 0");
        const auto start = std::chrono::steady_clock::now();
        StepReport rep;
        SimState back = s;
        auto [u, p] = step_velocity(s, s.omega, -s.dt, &rep.velocity_residual);
        // Only a pressure produced at the current vorticity level can be compared.
        if (s.pbar.space && std::abs(s.pbar.time - s.omega.time) <= 1e-12 * std::max(1.0, std::abs(s.omega.time)))
            rep.pressure_mismatch = (p.coeffs - s.pbar.coeffs).cwiseAbs().maxCoeff();
        back.u = std::move(u);
        back.omega = step_vorticity(back, -s.dt, &rep.vorticity_residual);
        back.pbar = std::move(p);
        --back.k;
        s = std::move(back);
        rep.wall_seconds = seconds_since(start);
        return rep;
    }

    DiagnosticRecord record(const SimState& s, const CaseDefinition* exact = nullptr) const {
        DiagnosticRecord r = diagnose(s.u, s.omega, d_.ops);
        if (exact && exact->has_exact()) {
            r.err_u = l2_error(s.u, exact->exact_velocity(s.u.time, s.nu));
            r.err_w = l2_error(s.omega, exact->exact_vorticity(s.omega.time, s.nu));
        }
        return r;
    }

    /// Advances until the vorticity time reaches t_end (an integer number of steps).
    RunResult run(SimState s, double t_end, const RunOptions& opts = {}) {
        const int steps = step_count(t_end - s.time(), s.dt);
        if (steps < 0) throw InvalidArgument("run: t_end lies before the current time");
        RunResult out;
        out.records.push_back(record(s, opts.exact));
        for (int i = 0; i < steps; ++i) {
            StepReport rep = step(s);
            if (!s.u.finite() || !s.omega.finite()) throw SolverError("non-finite state at step " + std::to_string(s.k));
            out.records.push_back(record(s, opts.exact));
            if (opts.on_step) opts.on_step(s, rep);
            out.reports.push_back(rep);
        }
        out.state = std::move(s);
        return out;
    }

    /// Runs backwards by t_back (an integer number of steps).
    RunResult run_reversed(SimState s, double t_back, const RunOptions& opts = {}) {
        if (s.nu != 0.0) throw CapabilityError("time reversal is only defined for nu = 0");
        const int steps = step_count(t_back, s.dt);
        if (steps < 0) throw InvalidArgument("run_reversed: t_back must be non-negative");
        RunResult out;
        out.records.push_back(record(s, opts.exact));
        for (int i = 0; i < steps; ++i) {
            StepReport rep = step_back(s);
            out.records.push_back(record(s, opts.exact));
            if (opts.on_step) opts.on_step(s, rep);
            out.reports.push_back(rep);
        }
        out.state = std::move(s);
        return out;
    }

    static int step_count(double span, double dt) {
        if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
        const double n = span / dt;
        const double r = std::round(n);
        if (std::abs(n - r) > 1e-9 * std::max(1.0, std::abs(n)))
            throw InvalidArgument("time span " + std::to_string(span) + " is not an integer multiple of dt = " + std::to_string(dt));
        return static_cast<int>(r);
    }

private:
    void check_inputs(const Field& u, const Field& w, double dt, double nu) const {
        if (u.space.get() != d_.U.get() || w.space.get() != d_.W.get())
            throw InvalidArgument("fields do not belong to this discretization");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive");
        if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidArgument("viscosity must be non-negative");
    }

    // Krylov solve preconditioned by the factored symmetric part, with a sparse LU
    // fallback. Returns the relative residual.
    double hybrid_solve(const SparseMatrix& a, const detail::FactorPreconditioner::Factor& sym, const Vector& b, Vector& x, LinearSolver& direct) {
        const double bn = b.norm();
        if (bn == 0.0) {
            x = Vector::Zero(b.size());
            return 0.0;
        }
        Eigen::BiCGSTAB<SparseMatrix, detail::FactorPreconditioner> krylov;
        krylov.preconditioner().set(&sym);
        krylov.setTolerance(settings_.krylov_tolerance);
        krylov.setMaxIterations(settings_.krylov_max_iterations);
        krylov.compute(a);
        x = krylov.solveWithGuess(b, sym.solve(b));
        double rel = x.allFinite() ? (b - a * x).norm() / bn : std::numeric_limits<double>::infinity();
        if (rel > settings_.residual_tolerance) rel = direct.solve(a, b, x);
        return rel;
    }

    const detail::FactorPreconditioner::Factor& vorticity_preconditioner(double dt, double nu) {
        const double key = nu * dt;
        if (!vort_sym_ || key != vort_key_) {
            vort_sym_ = detail::factor_spd(SparseMatrix(d_.ops.N + (0.5 * key) * d_.ops.L), "vorticity preconditioner");
            vort_key_ = key;
        }
        return *vort_sym_;
    }

    // (N - dt/4 (W - W^T) + nu dt/2 L) w1 = (N + dt/4 (W - W^T) - nu dt/2 L) w0
    double solve_vorticity(const Field& u, const Vector& w0, double dt, double nu, Vector& w1) {
        const SparseMatrix w = assemble_transport(*d_.W, u);
        const SparseMatrix skew = w - SparseMatrix(w.transpose());
        const SparseMatrix lhs = d_.ops.N - (0.25 * dt) * skew + (0.5 * nu * dt) * d_.ops.L;
        const Vector rhs = d_.ops.N * w0 + (0.25 * dt) * (skew * w0) - (0.5 * nu * dt) * (d_.ops.L * w0);
        return hybrid_solve(lhs, vorticity_preconditioner(dt, nu), rhs, w1, vort_solver_);
    }

    // Momentum step (M + dt/2 R) u1 - dt P p = (M - dt/2 R) u0 - nu dt l with D u1 = 0.
    // u1 is sought in the divergence-free basis, so the pressure drops out; it is
    // then recovered from P p = (A u1 - rhs) / dt with <p, 1> = 0.
    // Returns the relative residual of the full saddle-point system.
    double solve_velocity(const Vector& u0, const Field& omega, double dt, double nu, Vector& u1, Vector& p) {
        const SparseMatrix r = assemble_rotation(*d_.U, omega);
        const SparseMatrix a = d_.ops.M + (0.5 * dt) * r;
        Vector rhs = d_.ops.M * u0 - (0.5 * dt) * (r * u0);
        if (nu != 0.0) rhs -= (nu * dt) * assemble_curl_load(*d_.U, omega);
        const SparseMatrix reduced = zt_ * (a * basis_.Z);
        Vector y;
        hybrid_solve(reduced, *vel_sym_, zt_ * rhs, y, vel_solver_);
        u1 = basis_.Z * y;
        const Vector force = (a * u1 - rhs) / dt;
        p = Vector::Zero(d_.Q->dim());
        p.tail(d_.Q->dim() - 1) = pressure_normal_->solve(pressure_p_.transpose() * force);
        // DG bases reproduce constants and P annihilates them: shift to zero mean.
        p.array() -= d_.ops.q_integrals.dot(p) / d_.ops.q_integrals.sum();
        const double rn = rhs.norm();
        if (rn == 0.0) return 0.0;
        const Vector res_u = a * u1 - dt * (d_.ops.P * p) - rhs;
        const Vector res_q = d_.ops.D * u1;
        const double rel = std::sqrt(res_u.squaredNorm() + res_q.squaredNorm()) / rn;
        if (!(rel <= settings_.abort_tolerance))
            throw SolverError("momentum solve residual " + std::to_string(rel) + " exceeds abort tolerance");
        return rel;
    }

    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    Discretization d_;
    SolverSettings settings_;
    LinearSolver vort_solver_, vel_solver_;
    SolenoidalBasis basis_;
    SparseMatrix zt_;
    std::unique_ptr<detail::FactorPreconditioner::Factor> vel_sym_, vort_sym_;
    double vort_key_ = 0.0;
    SparseMatrix pressure_p_;
    std::unique_ptr<detail::FactorPreconditioner::Factor> pressure_normal_;
};

}  // namespace meevc
