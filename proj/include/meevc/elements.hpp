#pragma once

// Reference-triangle bases for the discrete complex CG_N -> RT_N -> DG_{N-1}.
//
// Every basis is built the same way: pick a spanning set of the polynomial
// space (monomials, or vector monomials for RT), apply the degree-of-freedom
// functionals to it, and invert the resulting generalized Vandermonde matrix.
//
// Reference triangle vertices: v0 = (0,0), v1 = (1,0), v2 = (0,1). Local edge i
// is opposite vertex i and runs counter-clockwise from v(i+1)%3 to v(i+2)%3.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"

namespace meevc {

enum class Family { CG, DG, RT };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::CG: return "CG";
        case Family::DG: return "DG";
        case Family::RT: return "RT";
    }
    return "?";
}

inline constexpr int max_degree = 4;

enum class DofKind { vertex, edge, interior };

/// Where a local degree of freedom lives. For edge dofs `index` is the local
/// edge and `order` the position along it (CG node number or RT moment order).
struct DofAttachment {
    DofKind kind = DofKind::interior;
    int index = 0;
    int order = 0;
};

/// Values of all local basis functions at a set of reference points; each table
/// is (basis count) x (point count).
struct ScalarBasisTable {
    Eigen::MatrixXd value, dx, dy;
};

struct VectorBasisTable {
    Eigen::MatrixXd vx, vy;
    Eigen::MatrixXd dvx_dx, dvx_dy, dvy_dx, dvy_dy;
    Eigen::MatrixXd div;
};

namespace detail {

struct Monomial {
    int a = 0, b = 0;  // x^a y^b
};

inline std::vector<Monomial> monomials(int degree) {
    std::vector<Monomial> out;
    for (int d = 0; d <= degree; ++d)
        for (int b = 0; b <= d; ++b) out.push_back({d - b, b});
    return out;
}

inline double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

struct MonoEval {
    double v, dx, dy;
};

/// Monomials are taken about the reference centroid to keep the Vandermonde
/// matrices well conditioned; the spanned spaces are unchanged.
inline MonoEval eval_monomial(Monomial m, Point q) {
    const Point p{q.x - 1.0 / 3.0, q.y - 1.0 / 3.0};
    return {ipow(p.x, m.a) * ipow(p.y, m.b), m.a > 0 ? m.a * ipow(p.x, m.a - 1) * ipow(p.y, m.b) : 0.0,
            m.b > 0 ? m.b * ipow(p.x, m.a) * ipow(p.y, m.b - 1) : 0.0};
}

/// Vector spanning function (x-monomial or 0, y-monomial or 0).
struct VectorMonomial {
    bool has_x = false, has_y = false;
    Monomial mx, my;
};

/// RT_N = P_{N-1}^2 + x P~_{N-1}: dimension N(N+2).
inline std::vector<VectorMonomial> rt_span(int n) {
    std::vector<VectorMonomial> out;
    for (const auto& m : monomials(n - 1)) out.push_back({true, false, m, {}});
    for (const auto& m : monomials(n - 1)) out.push_back({false, true, {}, m});
    for (int b = 0; b <= n - 1; ++b) {
        const int a = n - 1 - b;
        out.push_back({true, true, {a + 1, b}, {a, b + 1}});
    }
    return out;
}

/// Legendre polynomial of order m on [0,1].
inline double legendre01(int m, double s) {
    const double x = 2.0 * s - 1.0;
    double p0 = 1.0, p1 = x;
    if (m == 0) return p0;
    for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

inline constexpr std::array<Point, 3> reference_vertices{Point{0.0, 0.0}, Point{1.0, 0.0}, Point{0.0, 1.0}};

inline Point edge_start(int e) { return reference_vertices[(e + 1) % 3]; }
inline Point edge_end(int e) { return reference_vertices[(e + 2) % 3]; }

}  // namespace detail

/// Reference element for one family and degree N. For DG the polynomial degree
/// is N-1 (the pressure partner of RT_N).
class ReferenceElement {
public:
    ReferenceElement() = default;

    ReferenceElement(Family family, int degree) : family_(family), degree_(degree) {
        if (degree < 1 || degree > max_degree)
            throw CapabilityError(to_string(family) + " degree " + std::to_string(degree) + " unsupported (1.." +
                                  std::to_string(max_degree) + ")");
        switch (family) {
            case Family::CG: build_lagrange(degree, true); break;
            case Family::DG: build_lagrange(degree - 1, false); break;
            case Family::RT: build_rt(degree); break;
        }
    }

    Family family() const noexcept { return family_; }
    int degree() const noexcept { return degree_; }
    /// Polynomial degree of the scalar space (N for CG, N-1 for DG, N for RT).
    int polynomial_degree() const noexcept { return family_ == Family::DG ? degree_ - 1 : degree_; }
    int dim() const noexcept { return static_cast<int>(dofs_.size()); }
    bool is_vector() const noexcept { return family_ == Family::RT; }
    const std::vector<DofAttachment>& dofs() const noexcept { return dofs_; }

    /// Lagrange nodes (CG/DG only).
    const std::vector<Point>& nodes() const noexcept { return nodes_; }

    /// Condition number of the generalized Vandermonde matrix.
    double vandermonde_condition() const noexcept { return condition_; }

    ScalarBasisTable eval_scalar(std::span<const Point> points) const {
        if (is_vector()) throw InvalidArgument("eval_scalar called on an RT element");
        check_points(points);
        const int np = static_cast<int>(points.size());
        const int ns = static_cast<int>(scalar_span_.size());
        Eigen::MatrixXd v(ns, np), dx(ns, np), dy(ns, np);
        for (int q = 0; q < np; ++q) {
            for (int j = 0; j < ns; ++j) {
                const auto e = detail::eval_monomial(scalar_span_[j], points[q]);
                v(j, q) = e.v;
                dx(j, q) = e.dx;
                dy(j, q) = e.dy;
            }
        }
        return {coeffs_ * v, coeffs_ * dx, coeffs_ * dy};
    }

    VectorBasisTable eval_vector(std::span<const Point> points) const {
        if (!is_vector()) throw InvalidArgument("eval_vector called on a scalar element");
        check_points(points);
        const int np = static_cast<int>(points.size());
        const int ns = static_cast<int>(vector_span_.size());
        Eigen::MatrixXd vx = Eigen::MatrixXd::Zero(ns, np), vy = vx, xx = vx, xy = vx, yx = vx, yy = vx;
        for (int q = 0; q < np; ++q) {
            for (int j = 0; j < ns; ++j) {
                const auto& s = vector_span_[j];
                if (s.has_x) {
                    const auto e = detail::eval_monomial(s.mx, points[q]);
                    vx(j, q) = e.v;
                    xx(j, q) = e.dx;
                    xy(j, q) = e.dy;
                }
                if (s.has_y) {
                    const auto e = detail::eval_monomial(s.my, points[q]);
                    vy(j, q) = e.v;
                    yx(j, q) = e.dx;
                    yy(j, q) = e.dy;
                }
            }
        }
        VectorBasisTable t;
        t.vx = coeffs_ * vx;
        t.vy = coeffs_ * vy;
        t.dvx_dx = coeffs_ * xx;
        t.dvx_dy = coeffs_ * xy;
        t.dvy_dx = coeffs_ * yx;
        t.dvy_dy = coeffs_ * yy;
        t.div = t.dvx_dx + t.dvy_dy;
        return t;
    }

    /// Applies the local dof functionals to a reference vector field (RT only).
    template <class VectorFn>
    Eigen::VectorXd rt_dofs_of(VectorFn&& f) const {
        if (!is_vector()) throw InvalidArgument("rt_dofs_of called on a scalar element");
        Eigen::VectorXd out(dim());
        for (int i = 0; i < dim(); ++i) out(i) = rt_functional(dofs_[i], f);
        return out;
    }

    /// Applies the local dof functionals (nodal evaluation) to a scalar function (CG/DG).
    template <class ScalarFn>
    Eigen::VectorXd nodal_dofs_of(ScalarFn&& f) const {
        if (is_vector()) throw InvalidArgument("nodal_dofs_of called on an RT element");
        Eigen::VectorXd out(dim());
        for (int i = 0; i < dim(); ++i) out(i) = f(nodes_[i]);
        return out;
    }

private:
    static void check_points(std::span<const Point> points) {
        constexpr double tol = 1e-12;
        for (const auto& p : points) {
            if (p.x < -tol || p.y < -tol || p.x + p.y > 1.0 + tol)
                throw InvalidArgument("reference point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                      ") lies outside the reference triangle");
        }
    }

    void finish(const Eigen::MatrixXd& vandermonde) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(vandermonde);
        if (!lu.isInvertible()) throw CapabilityError("degrees of freedom are not unisolvent");
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(vandermonde);
        condition_ = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
        // V(i, j) = l_i(s_j); basis phi_k = sum_j C(k, j) s_j with l_i(phi_k) = delta_ik.
        coeffs_ = lu.inverse().transpose();
    }

    void build_lagrange(int p, bool continuous) {
        scalar_span_ = detail::monomials(p);
        nodes_.clear();
        dofs_.clear();
        if (p == 0) {
            nodes_.push_back({1.0 / 3.0, 1.0 / 3.0});
            dofs_.push_back({DofKind::interior, 0, 0});
        } else if (continuous) {
            for (int v = 0; v < 3; ++v) {
                nodes_.push_back(detail::reference_vertices[v]);
                dofs_.push_back({DofKind::vertex, v, 0});
            }
            for (int e = 0; e < 3; ++e) {
                const Point a = detail::edge_start(e), b = detail::edge_end(e);
                for (int k = 1; k < p; ++k) {
                    nodes_.push_back(a + (static_cast<double>(k) / p) * (b - a));
                    dofs_.push_back({DofKind::edge, e, k - 1});
                }
            }
            int idx = 0;
            for (int j = 1; j < p; ++j)
                for (int i = 1; i + j < p; ++i) {
                    nodes_.push_back({static_cast<double>(i) / p, static_cast<double>(j) / p});
                    dofs_.push_back({DofKind::interior, idx++, 0});
                }
        } else {
            int idx = 0;
            for (int j = 0; j <= p; ++j)
                for (int i = 0; i + j <= p; ++i) {
                    nodes_.push_back({static_cast<double>(i) / p, static_cast<double>(j) / p});
                    dofs_.push_back({DofKind::interior, idx++, 0});
                }
        }
        const int n = static_cast<int>(nodes_.size());
        Eigen::MatrixXd vand(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) vand(i, j) = detail::eval_monomial(scalar_span_[j], nodes_[i]).v;
        finish(vand);
    }

    void build_rt(int n) {
        vector_span_ = detail::rt_span(n);
        dofs_.clear();
        for (int e = 0; e < 3; ++e)
            for (int m = 0; m < n; ++m) dofs_.push_back({DofKind::edge, e, m});
        int idx = 0;
        for (std::size_t k = 0; k < detail::monomials(n - 2).size() * (n >= 2 ? 2 : 0); ++k) dofs_.push_back({DofKind::interior, idx++, 0});
        edge_rule_ = gauss_legendre(12);
        interior_rule_ = triangle_quadrature(max_quadrature_degree);
        interior_weights_ = detail::monomials(n - 2);
        orthonormalize_interior_weights();
        const int dim = static_cast<int>(vector_span_.size());
        if (static_cast<int>(dofs_.size()) != dim) throw CapabilityError("RT dof count mismatch");
        Eigen::MatrixXd vand(dim, dim);
        for (int j = 0; j < dim; ++j) {
            const auto& s = vector_span_[j];
            auto f = [&s](Point p) -> std::array<double, 2> {
                return {s.has_x ? detail::eval_monomial(s.mx, p).v : 0.0, s.has_y ? detail::eval_monomial(s.my, p).v : 0.0};
            };
            for (int i = 0; i < dim; ++i) vand(i, j) = rt_functional(dofs_[i], f);
        }
        finish(vand);
    }

    // Interior moments are taken against an L2-orthonormal basis of P_{N-2}
    // (rows of interior_orth_ in the monomial basis).
    void orthonormalize_interior_weights() {
        const int nw = static_cast<int>(interior_weights_.size());
        interior_orth_.resize(nw, nw);
        if (nw == 0) return;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nw, nw);
        for (std::size_t q = 0; q < interior_rule_.size(); ++q) {
            Eigen::VectorXd m(nw);
            for (int j = 0; j < nw; ++j) m(j) = detail::eval_monomial(interior_weights_[j], interior_rule_.points[q]).v;
            gram += interior_rule_.weights[q] * m * m.transpose();
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(gram);
        // gram = L L^T; rows of L^{-1} give orthonormal combinations.
        interior_orth_ = llt.matrixL().solve(Eigen::MatrixXd::Identity(nw, nw));
    }

    // Edge dof: integral over the edge of v . n P_m(s) ds with n the outward normal
    // scaled by the edge length, i.e. the flux moment. Interior dof k:
    // integral of v . (w, 0) or v . (0, w) with w a monomial of degree <= N-2.
    template <class VectorFn>
    double rt_functional(const DofAttachment& dof, VectorFn&& f) const {
        double acc = 0.0;
        if (dof.kind == DofKind::edge) {
            const Point a = detail::edge_start(dof.index), b = detail::edge_end(dof.index);
            const Point t = b - a;
            const Point nrm{t.y, -t.x};
            for (std::size_t q = 0; q < edge_rule_.points.size(); ++q) {
                const double s = edge_rule_.points[q];
                const auto v = f(a + s * t);
                acc += edge_rule_.weights[q] * (v[0] * nrm.x + v[1] * nrm.y) * detail::legendre01(dof.order, s);
            }
        } else {
            const int nw = static_cast<int>(interior_weights_.size());
            const int comp = dof.index / nw;
            const int k = dof.index % nw;
            for (std::size_t q = 0; q < interior_rule_.size(); ++q) {
                const Point p = interior_rule_.points[q];
                const auto v = f(p);
                double w = 0.0;
                for (int j = 0; j < nw; ++j) w += interior_orth_(k, j) * detail::eval_monomial(interior_weights_[j], p).v;
                acc += interior_rule_.weights[q] * v[comp] * w;
            }
        }
        return acc;
    }

    Family family_ = Family::CG;
    int degree_ = 1;
    std::vector<DofAttachment> dofs_;
    std::vector<Point> nodes_;
    std::vector<detail::Monomial> scalar_span_;
    std::vector<detail::VectorMonomial> vector_span_;
    std::vector<detail::Monomial> interior_weights_;
    Eigen::MatrixXd interior_orth_;
    LineRule edge_rule_;
    QuadratureRule interior_rule_;
    Eigen::MatrixXd coeffs_;
    double condition_ = 1.0;
};

inline ReferenceElement build_reference_element(Family family, int degree) { return ReferenceElement(family, degree); }

/// Contravariant Piola transform of one RT value: (1/det J) J v_ref.
inline Eigen::Vector2d piola_map_rt(const Eigen::Vector2d& ref_value, const AffineMap& map) {
    return map.jacobian * ref_value / map.det;
}

inline double piola_map_rt_divergence(double ref_divergence, const AffineMap& map) { return ref_divergence / map.det; }

/// Physical gradient of a scalar basis from its reference gradient.
inline Eigen::Vector2d map_gradient(const Eigen::Vector2d& ref_grad, const AffineMap& map) {
    return map.inverse_transpose * ref_grad;
}

}  // namespace meevc
