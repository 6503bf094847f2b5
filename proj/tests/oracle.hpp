#pragma once

// Dense brute-force reference for the assembled operators: every global basis
// function tabulated at every quadrature point, mapped by hand.

#include <algorithm>
#include <map>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "meevc/assembly.hpp"

namespace meevc::oracle {

inline Vector random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

// Values of every global basis function at every quadrature point of every
// triangle, mapped by hand (no use of the library's mapping helpers).
// Layout: rows are global dofs, columns run over (triangle, point).
struct GlobalTable {
    Eigen::MatrixXd value, dx, dy;  // scalar spaces
    Eigen::MatrixXd vx, vy, div;    // RT
    Eigen::VectorXd jxw;
};

inline GlobalTable tabulate(const FunctionSpace& s, const QuadratureRule& rule) {
    const Mesh& mesh = s.mesh();
    const int nq = static_cast<int>(rule.size());
    const int cols = mesh.num_triangles() * nq;
    GlobalTable g;
    const auto zero = [&] { return Eigen::MatrixXd::Zero(s.dim(), cols); };
    g.value = zero(), g.dx = zero(), g.dy = zero(), g.vx = zero(), g.vy = zero(), g.div = zero();
    g.jxw.resize(cols);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const AffineMap map = mesh.affine_map(t);
        const Eigen::Matrix2d j = map.jacobian;
        const Eigen::Matrix2d jit = j.inverse().transpose();
        const auto dofs = s.dofs(t);
        const auto signs = s.signs(t);
        for (int q = 0; q < nq; ++q) {
            const int col = t * nq + q;
            g.jxw(col) = rule.weights[static_cast<std::size_t>(q)] * std::abs(j.determinant());
            const std::vector<Point> pt{rule.points[static_cast<std::size_t>(q)]};
            if (s.is_vector()) {
                const auto r = s.element().eval_vector(pt);
                for (int i = 0; i < s.local_dim(); ++i) {
                    const Eigen::Vector2d v = j * Eigen::Vector2d(r.vx(i, 0), r.vy(i, 0)) / j.determinant();
                    g.vx(dofs[i], col) += signs[i] * v.x();
                    g.vy(dofs[i], col) += signs[i] * v.y();
                    g.div(dofs[i], col) += signs[i] * r.div(i, 0) / j.determinant();
                }
            } else {
                const auto r = s.element().eval_scalar(pt);
                for (int i = 0; i < s.local_dim(); ++i) {
                    const Eigen::Vector2d grad = jit * Eigen::Vector2d(r.dx(i, 0), r.dy(i, 0));
                    g.value(dofs[i], col) += signs[i] * r.value(i, 0);
                    g.dx(dofs[i], col) += signs[i] * grad.x();
                    g.dy(dofs[i], col) += signs[i] * grad.y();
                }
            }
        }
    }
    return g;
}

inline double max_abs_diff(const SparseMatrix& a, const Eigen::MatrixXd& b) {
    return (Eigen::MatrixXd(a) - b).cwiseAbs().maxCoeff();
}

/// Largest entrywise difference per operator, divided by max(1, max|L|).
inline std::map<std::string, double> dense_oracle_errors(const Discretization& d, unsigned seed = 0) {
    const QuadratureRule rule = triangle_quadrature(max_quadrature_degree);
    const int n = d.degree();
    const auto gu = tabulate(*d.U, rule), gq = tabulate(*d.Q, rule), gw = tabulate(*d.W, rule);
    const auto w = gu.jxw.asDiagonal();
    const double scale = std::max(1.0, Eigen::MatrixXd(d.ops.L).cwiseAbs().maxCoeff());
    std::map<std::string, double> err;

    const Eigen::MatrixXd m = gu.vx * w * gu.vx.transpose() + gu.vy * w * gu.vy.transpose();
    err["M"] = max_abs_diff(d.ops.M, m);
    err["N"] = max_abs_diff(d.ops.N, gw.value * w * gw.value.transpose());
    const Eigen::MatrixXd p = gu.div * w * gq.value.transpose();
    err["P"] = max_abs_diff(d.ops.P, p);
    err["D"] = max_abs_diff(d.ops.D, p.transpose());
    err["L"] = max_abs_diff(d.ops.L, gw.dx * w * gw.dx.transpose() + gw.dy * w * gw.dy.transpose());
    err["q"] = (d.ops.q_integrals - gq.value * gu.jxw).cwiseAbs().maxCoeff();

    const Field omega(d.W, random_vector(d.W->dim(), seed + 3u + n));
    const Field u(d.U, random_vector(d.U->dim(), seed + 11u + n));
    const Eigen::VectorXd om = gw.value.transpose() * omega.coeffs;
    const Eigen::VectorXd omx = gw.dx.transpose() * omega.coeffs, omy = gw.dy.transpose() * omega.coeffs;
    const Eigen::VectorXd ux = gu.vx.transpose() * u.coeffs, uy = gu.vy.transpose() * u.coeffs;
    const Eigen::VectorXd udiv = gu.div.transpose() * u.coeffs;

    // R(i, j) = int w (v_jx v_iy - v_jy v_ix)
    const Eigen::MatrixXd wr = (om.cwiseProduct(gu.jxw)).asDiagonal();
    err["R"] = max_abs_diff(assemble_rotation(*d.U, omega), gu.vy * wr * gu.vx.transpose() - gu.vx * wr * gu.vy.transpose());

    // W(r, c) = int xi_c (xi_r div u + u . grad xi_r)
    const Eigen::MatrixXd g = gw.value * udiv.asDiagonal() + gw.dx * ux.asDiagonal() + gw.dy * uy.asDiagonal();
    err["W"] = max_abs_diff(assemble_transport(*d.W, u), g * w * gw.value.transpose());

    // l_i = int (dw/dy v_ix - dw/dx v_iy)
    err["l"] = (assemble_curl_load(*d.U, omega) - (gu.vx * w * omy - gu.vy * w * omx)).cwiseAbs().maxCoeff();
    for (auto& [k, v] : err) v /= scale;
    return err;
}

}  // namespace meevc::oracle
