#pragma once

// Global sparse operators of the semi-discrete system
//
//   M du/dt + R(w) u - P p = -nu l(w)
//   N dw/dt - 1/2 W(u) w + 1/2 W(u)^T w = -nu L w
//   D u = 0
//
// with M_ij = <v_j, v_i>, R_ij = <w x v_j, v_i>, P_ij = <q_j, div v_i>,
// l_i = <curl w, v_i>, N_ij = <xi_j, xi_i>, W_ij = <xi_j, div(u xi_i)>,
// L_ij = <curl xi_j, curl xi_i>, D = P^T.

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "elements.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"
#include "spaces.hpp"

namespace meevc {

/// Worker count for element loops: MEEVC_THREADS if set, else hardware concurrency.
inline int assembly_threads() {
    if (const char* env = std::getenv("MEEVC_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `body(t, triplets)` over all triangles, split into contiguous chunks.
/// Chunks are concatenated in triangle order, so the triplet sequence (and the
/// summed matrix) does not depend on the worker count.
template <class Body>
std::vector<Triplet> element_loop(int num_triangles, Body&& body) {
    const int workers = std::clamp(assembly_threads(), 1, std::max(1, num_triangles / 64));
    std::vector<std::vector<Triplet>> parts(static_cast<std::size_t>(workers));
    auto run = [&](int w) {
        const int begin = static_cast<int>(static_cast<long>(num_triangles) * w / workers);
        const int end = static_cast<int>(static_cast<long>(num_triangles) * (w + 1) / workers);
        for (int t = begin; t < end; ++t) body(t, parts[static_cast<std::size_t>(w)]);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    std::vector<Triplet> all;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    all.reserve(total);
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
}

inline void scatter(std::vector<Triplet>& out, std::span<const int> rows, std::span<const int> cols, const Eigen::MatrixXd& local) {
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out.emplace_back(rows[i], cols[j], local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

inline SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& trips) {
    SparseMatrix a(rows, cols);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

struct OperatorSet {
    SparseMatrix M;      ///< d_U x d_U velocity mass
    SparseMatrix N;      ///< d_W x d_W vorticity mass
    SparseMatrix P;      ///< d_U x d_Q, P_ij = <q_j, div v_i>
    SparseMatrix D;      ///< d_Q x d_U, D = P^T
    SparseMatrix L;      ///< d_W x d_W curl-curl stiffness
    SparseMatrix Qmass;  ///< d_Q x d_Q pressure mass (block diagonal)
    Vector q_integrals;  ///< <q_j, 1>, used for the pressure mean constraint
    int bilinear_degree = 0;
    int trilinear_degree = 0;
};

inline void check_same_mesh(const FunctionSpace& a, const FunctionSpace& b) {
    if (!a.same_mesh(b)) throw InvalidArgument("function spaces are defined on different meshes");
}

inline OperatorSet assemble_constant_operators(const FunctionSpace& U, const FunctionSpace& Q, const FunctionSpace& W) {
    check_same_mesh(U, Q);
    check_same_mesh(U, W);
    if (U.family() != Family::RT || Q.family() != Family::DG || W.family() != Family::CG)
        throw InvalidArgument("assemble_constant_operators: expected (RT, DG, CG) spaces");
    if (U.degree() != Q.degree() || U.degree() != W.degree())
        throw InvalidArgument("assemble_constant_operators: spaces must share the degree N");
    const Mesh& mesh = U.mesh();
    const int n = U.degree();
    OperatorSet ops;
    ops.bilinear_degree = bilinear_quadrature_degree(n);
    ops.trilinear_degree = trilinear_quadrature_degree(n);
    const QuadratureRule rule = triangle_quadrature(ops.bilinear_degree);
    const ReferenceTabulation tu(U.element(), rule), tq(Q.element(), rule), tw(W.element(), rule);

    std::vector<Triplet> tm, tn, tp, tl, tqm;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const AffineMap map = mesh.affine_map(t);
        const auto u = map_vector(tu.vector(), map, U.signs(t), rule.weights);
        const auto q = map_scalar(tq.scalar(), map, Q.signs(t), rule.weights);
        const auto w = map_scalar(tw.scalar(), map, W.signs(t), rule.weights);
        const auto jxw = u.jxw.asDiagonal();
        scatter(tm, U.dofs(t), U.dofs(t), u.vx * jxw * u.vx.transpose() + u.vy * jxw * u.vy.transpose());
        scatter(tn, W.dofs(t), W.dofs(t), w.value * jxw * w.value.transpose());
        scatter(tp, U.dofs(t), Q.dofs(t), u.div * jxw * q.value.transpose());
        scatter(tl, W.dofs(t), W.dofs(t), w.dx * jxw * w.dx.transpose() + w.dy * jxw * w.dy.transpose());
        scatter(tqm, Q.dofs(t), Q.dofs(t), q.value * jxw * q.value.transpose());
    }
    ops.M = from_triplets(U.dim(), U.dim(), tm);
    ops.N = from_triplets(W.dim(), W.dim(), tn);
    ops.P = from_triplets(U.dim(), Q.dim(), tp);
    ops.D = SparseMatrix(ops.P.transpose());
    ops.L = from_triplets(W.dim(), W.dim(), tl);
    ops.Qmass = from_triplets(Q.dim(), Q.dim(), tqm);
    // DG bases reproduce constants, so <q_j, 1> is the column sum of the mass matrix.
    ops.q_integrals = ops.Qmass.transpose() * Vector::Ones(Q.dim());
    return ops;
}

/// R_ij = <w x v_j, v_i> with the 2D convention w x v = w (-v_y, v_x). Skew-symmetric.
inline SparseMatrix assemble_rotation(const FunctionSpace& U, const Field& omega) {
    check_same_mesh(U, *omega.space);
    if (omega.space->family() != Family::CG) throw InvalidArgument("assemble_rotation: vorticity must be a CG field");
    const Mesh& mesh = U.mesh();
    const QuadratureRule rule = triangle_quadrature(trilinear_quadrature_degree(U.degree()));
    const ReferenceTabulation tu(U.element(), rule), tw(omega.space->element(), rule);
    const auto trips = element_loop(mesh.num_triangles(), [&](int t, std::vector<Triplet>& out) {
        const AffineMap map = mesh.affine_map(t);
        const auto u = map_vector(tu.vector(), map, U.signs(t), rule.weights);
        const auto w = map_scalar(tw.scalar(), map, omega.space->signs(t));
        const Eigen::VectorXd wq = (w.value.transpose() * local_coefficients(omega, t)).cwiseProduct(u.jxw);
        const Eigen::MatrixXd cross = u.vy * wq.asDiagonal() * u.vx.transpose();
        // local(i, j) = sum_q wq (v_jx v_iy - v_jy v_ix)
        scatter(out, U.dofs(t), U.dofs(t), cross - cross.transpose());
    });
    return from_triplets(U.dim(), U.dim(), trips);
}

/// W[r, c] = <xi_c, div(u xi_r)> = <xi_c, (div u) xi_r + u . grad xi_r>.
/// Row index is the function inside the divergence.
inline SparseMatrix assemble_transport(const FunctionSpace& W, const Field& u) {
    check_same_mesh(W, *u.space);
    if (u.space->family() != Family::RT) throw InvalidArgument("assemble_transport: velocity must be an RT field");
    const Mesh& mesh = W.mesh();
    const QuadratureRule rule = triangle_quadrature(trilinear_quadrature_degree(W.degree()));
    const ReferenceTabulation tw(W.element(), rule), tu(u.space->element(), rule);
    const auto trips = element_loop(mesh.num_triangles(), [&](int t, std::vector<Triplet>& out) {
        const AffineMap map = mesh.affine_map(t);
        const auto w = map_scalar(tw.scalar(), map, W.signs(t), rule.weights);
        const auto v = map_vector(tu.vector(), map, u.space->signs(t));
        const Eigen::VectorXd c = local_coefficients(u, t);
        const Eigen::VectorXd ux = v.vx.transpose() * c, uy = v.vy.transpose() * c, div = v.div.transpose() * c;
        const Eigen::MatrixXd g = w.value * div.asDiagonal() + w.dx * ux.asDiagonal() + w.dy * uy.asDiagonal();
        scatter(out, W.dofs(t), W.dofs(t), g * w.jxw.asDiagonal() * w.value.transpose());
    });
    return from_triplets(W.dim(), W.dim(), trips);
}

/// l_i = <curl w, v_i> with curl w = (dw/dy, -dw/dx).
inline Vector assemble_curl_load(const FunctionSpace& U, const Field& omega) {
    check_same_mesh(U, *omega.space);
    if (omega.space->family() != Family::CG) throw InvalidArgument("assemble_curl_load: vorticity must be a CG field");
    const Mesh& mesh = U.mesh();
    const QuadratureRule rule = triangle_quadrature(bilinear_quadrature_degree(U.degree()));
    const ReferenceTabulation tu(U.element(), rule), tw(omega.space->element(), rule);
    Vector l = Vector::Zero(U.dim());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const AffineMap map = mesh.affine_map(t);
        const auto u = map_vector(tu.vector(), map, U.signs(t), rule.weights);
        const auto w = map_scalar(tw.scalar(), map, omega.space->signs(t));
        const Eigen::VectorXd c = local_coefficients(omega, t);
        const Eigen::VectorXd cx = (w.dy.transpose() * c).cwiseProduct(u.jxw);
        const Eigen::VectorXd cy = (-(w.dx.transpose() * c)).cwiseProduct(u.jxw);
        const Eigen::VectorXd local = u.vx * cx + u.vy * cy;
        const auto dofs = U.dofs(t);
        for (int i = 0; i < U.local_dim(); ++i) l(dofs[i]) += local(i);
    }
    return l;
}

/// Matrix C taking CG coefficients to the RT coefficients of their curl.
/// The curl commutes with the affine pull-backs (covariant gradient rotated by
/// 90 degrees is contravariant), so the local block is the same on every triangle.
inline SparseMatrix assemble_curl_matrix(const FunctionSpace& W, const FunctionSpace& U) {
    check_same_mesh(W, U);
    if (W.family() != Family::CG || U.family() != Family::RT || W.degree() != U.degree())
        throw InvalidArgument("assemble_curl_matrix: expected CG_N and RT_N");
    const auto& cg = W.element();
    const auto& rt = U.element();
    Eigen::MatrixXd local(rt.dim(), cg.dim());
    for (int j = 0; j < cg.dim(); ++j) {
        local.col(j) = rt.rt_dofs_of([&](Point p) -> std::array<double, 2> {
            const std::array<Point, 1> pt{p};
            const auto tab = cg.eval_scalar(pt);
            return {tab.dy(j, 0), -tab.dx(j, 0)};
        });
    }
    const Mesh& mesh = U.mesh();
    std::vector<char> done(static_cast<std::size_t>(U.dim()), 0);
    std::vector<Triplet> trips;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto rdofs = U.dofs(t);
        const auto rsigns = U.signs(t);
        const auto cdofs = W.dofs(t);
        for (int i = 0; i < rt.dim(); ++i) {
            const int row = rdofs[i];
            if (done[static_cast<std::size_t>(row)]) continue;
            done[static_cast<std::size_t>(row)] = 1;
            for (int j = 0; j < cg.dim(); ++j) {
                const double v = rsigns[i] * local(i, j);
                if (v != 0.0) trips.emplace_back(row, cdofs[j], v);
            }
        }
    }
    SparseMatrix c = from_triplets(U.dim(), W.dim(), trips);
    c.prune(0.0, 1e-14);
    return c;
}

/// Canonical RT interpolant: applies the global dof functionals to f.
inline Field interpolate_rt(const std::shared_ptr<const FunctionSpace>& U, const VectorFunction& f, double time = 0.0) {
    if (U->family() != Family::RT) throw InvalidArgument("interpolate_rt: expected an RT space");
    const Mesh& mesh = U->mesh();
    Vector c = Vector::Zero(U->dim());
    std::vector<char> done(static_cast<std::size_t>(U->dim()), 0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const AffineMap map = mesh.affine_map(t);
        const Eigen::Matrix2d pull = map.det * map.jacobian.inverse();
        const Eigen::VectorXd local = U->element().rt_dofs_of([&](Point p) -> std::array<double, 2> {
            const Point x = map(p);
            const Eigen::Vector2d v = pull * f(x.x, x.y);
            return {v.x(), v.y()};
        });
        const auto dofs = U->dofs(t);
        const auto signs = U->signs(t);
        for (int i = 0; i < U->local_dim(); ++i) {
            if (done[static_cast<std::size_t>(dofs[i])]) continue;
            done[static_cast<std::size_t>(dofs[i])] = 1;
            c(dofs[i]) = signs[i] * local(i);
        }
    }
    return Field(U, std::move(c), time);
}

/// Nodal interpolant into a CG or DG space.
inline Field interpolate_nodal(const std::shared_ptr<const FunctionSpace>& S, const ScalarFunction& f, double time = 0.0) {
    if (S->is_vector()) throw InvalidArgument("interpolate_nodal: expected a scalar space");
    const Mesh& mesh = S->mesh();
    Vector c = Vector::Zero(S->dim());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const AffineMap map = mesh.affine_map(t);
        const Eigen::VectorXd local = S->element().nodal_dofs_of([&](Point p) {
            const Point x = map(p);
            return f(x.x, x.y);
        });
        const auto dofs = S->dofs(t);
        for (int i = 0; i < S->local_dim(); ++i) c(dofs[i]) = local(i);
    }
    return Field(S, std::move(c), time);
}

/// Spaces and constant operators of one discretization (mesh + degree N).
struct Discretization {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<const FunctionSpace> U, Q, W;
    OperatorSet ops;

    static Discretization build(std::shared_ptr<const Mesh> mesh, int degree) {
        Discretization d;
        d.mesh = mesh;
        d.U = build_space(mesh, Family::RT, degree);
        d.Q = build_space(mesh, Family::DG, degree);
        d.W = build_space(mesh, Family::CG, degree);
        d.ops = assemble_constant_operators(*d.U, *d.Q, *d.W);
        return d;
    }

    int degree() const { return U->degree(); }
};

/// Writes an operator as "row col value" lines (debug dump).
inline void write_triplets(std::ostream& out, const SparseMatrix& a) {
    out.precision(17);
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace meevc
