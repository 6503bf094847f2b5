#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "spaces.hpp"

namespace meevc {

/// Conserved quantities of one (u, omega) pair. K is evaluated on the velocity
/// iterate and E, Wtot on the vorticity iterate; `t` is the vorticity time.
struct DiagnosticRecord {
    double t = 0.0;
    double K = 0.0;
    double E = 0.0;
    double Wtot = 0.0;
    double div_norm = 0.0;
    std::optional<double> err_u;
    std::optional<double> err_w;
};

/// K = 1/2 u^T M u.
inline double kinetic_energy(const Field& u, const SparseMatrix& M) {
    if (u.coeffs.size() != M.rows()) throw InvalidArgument("kinetic_energy: dimension mismatch");
    return 0.5 * u.coeffs.dot(M * u.coeffs);
}

/// E = 1/2 w^T N w.
inline double enstrophy(const Field& omega, const SparseMatrix& N) {
    if (omega.coeffs.size() != N.rows()) throw InvalidArgument("enstrophy: dimension mismatch");
    return 0.5 * omega.coeffs.dot(N * omega.coeffs);
}

/// <w_h, 1> = 1^T N w (CG bases reproduce the constant 1 with all-ones coefficients).
inline double total_vorticity(const Field& omega, const SparseMatrix& N) {
    if (omega.coeffs.size() != N.rows()) throw InvalidArgument("total_vorticity: dimension mismatch");
    return (N * omega.coeffs).sum();
}

/// ||div u_h||_{L2}. div u_h lies in DG_{N-1}, so integrating its square with a
/// rule exact to degree 2N-2 equals the norm of its DG projection.
inline double divergence_norm(const Field& u) {
    const FunctionSpace& U = *u.space;
    if (U.family() != Family::RT) throw InvalidArgument("divergence_norm: expected an RT field");
    const QuadratureRule rule = triangle_quadrature(2 * U.degree());
    const ReferenceTabulation tab(U.element(), rule);
    double acc = 0.0;
    for (int t = 0; t < U.mesh().num_triangles(); ++t) {
        const auto v = map_vector(tab.vector(), U.mesh().affine_map(t), U.signs(t), rule.weights);
        const Eigen::VectorXd div = v.div.transpose() * local_coefficients(u, t);
        acc += div.cwiseProduct(div).dot(v.jxw);
    }
    return std::sqrt(acc);
}

/// sqrt of the integral of |exact - field|^2 for scalar fields.
inline double l2_error(const Field& field, const ScalarFunction& exact) {
    const FunctionSpace& S = *field.space;
    if (S.is_vector()) throw InvalidArgument("l2_error: scalar exact solution given for a vector field");
    const QuadratureRule rule = triangle_quadrature(function_quadrature_degree(S.degree()));
    const ReferenceTabulation tab(S.element(), rule);
    double acc = 0.0;
    for (int t = 0; t < S.mesh().num_triangles(); ++t) {
        const AffineMap map = S.mesh().affine_map(t);
        const auto v = map_scalar(tab.scalar(), map, S.signs(t), rule.weights);
        const Eigen::VectorXd fh = v.value.transpose() * local_coefficients(field, t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = map(rule.points[q]);
            const double e = exact(x.x, x.y) - fh(static_cast<Eigen::Index>(q));
            acc += e * e * v.jxw(static_cast<Eigen::Index>(q));
        }
    }
    return std::sqrt(acc);
}

/// sqrt of the integral of |exact - field|^2 for RT fields.
inline double l2_error(const Field& field, const VectorFunction& exact) {
    const FunctionSpace& U = *field.space;
    if (!U.is_vector()) throw InvalidArgument("l2_error: vector exact solution given for a scalar field");
    const QuadratureRule rule = triangle_quadrature(function_quadrature_degree(U.degree()));
    const ReferenceTabulation tab(U.element(), rule);
    double acc = 0.0;
    for (int t = 0; t < U.mesh().num_triangles(); ++t) {
        const AffineMap map = U.mesh().affine_map(t);
        const auto v = map_vector(tab.vector(), map, U.signs(t), rule.weights);
        const Eigen::VectorXd c = local_coefficients(field, t);
        const Eigen::VectorXd ux = v.vx.transpose() * c, uy = v.vy.transpose() * c;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = map(rule.points[q]);
            const Eigen::Vector2d e = exact(x.x, x.y) - Eigen::Vector2d(ux(static_cast<Eigen::Index>(q)), uy(static_cast<Eigen::Index>(q)));
            acc += e.squaredNorm() * v.jxw(static_cast<Eigen::Index>(q));
        }
    }
    return std::sqrt(acc);
}

inline DiagnosticRecord diagnose(const Field& u, const Field& omega, const OperatorSet& ops) {
    DiagnosticRecord r;
    r.t = omega.time;
    r.K = kinetic_energy(u, ops.M);
    r.E = enstrophy(omega, ops.N);
    r.Wtot = total_vorticity(omega, ops.N);
    r.div_norm = divergence_norm(u);
    return r;
}

}  // namespace meevc
