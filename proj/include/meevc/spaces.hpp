#pragma once

// Global function spaces over a periodic mesh:
//   U_h = RT_N (velocity), Q_h = DG_{N-1} (total pressure), W_h = CG_N (vorticity).

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "elements.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"

namespace meevc {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

using ScalarFunction = std::function<double(double, double)>;
using VectorFunction = std::function<Eigen::Vector2d(double, double)>;

class FunctionSpace {
public:
    FunctionSpace(std::shared_ptr<const Mesh> mesh, Family family, int degree)
        : mesh_(std::move(mesh)), element_(family, degree) {
        if (!mesh_) throw InvalidArgument("build_space: null mesh");
        number_dofs();
    }

    const Mesh& mesh() const noexcept { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const noexcept { return mesh_; }
    const ReferenceElement& element() const noexcept { return element_; }
    Family family() const noexcept { return element_.family(); }
    int degree() const noexcept { return element_.degree(); }
    int dim() const noexcept { return ndofs_; }
    int local_dim() const noexcept { return element_.dim(); }
    bool is_vector() const noexcept { return element_.is_vector(); }

    std::span<const int> dofs(int t) const {
        return {dof_index_.data() + static_cast<std::size_t>(t) * local_dim(), static_cast<std::size_t>(local_dim())};
    }
    std::span<const double> signs(int t) const {
        return {dof_sign_.data() + static_cast<std::size_t>(t) * local_dim(), static_cast<std::size_t>(local_dim())};
    }

    /// e.g. "RT2", "DG1", "CG2" (DG carries its own polynomial degree).
    std::string descriptor() const {
        return to_string(family()) + std::to_string(element_.polynomial_degree());
    }

    bool same_mesh(const FunctionSpace& other) const noexcept { return mesh_ == other.mesh_; }

private:
    void number_dofs() {
        const Mesh& m = *mesh_;
        const int n = degree();
        const int nt = m.num_triangles(), ne = m.num_edges(), nv = m.num_vertices();
        const int ld = local_dim();
        dof_index_.assign(static_cast<std::size_t>(nt) * ld, -1);
        dof_sign_.assign(static_cast<std::size_t>(nt) * ld, 1.0);
        int interior_per_triangle = 0;
        for (const auto& d : element_.dofs())
            if (d.kind == DofKind::interior) ++interior_per_triangle;

        int edge_block = 0, vertex_block = 0;
        switch (family()) {
            case Family::CG: vertex_block = nv; edge_block = ne * (n - 1); break;
            case Family::RT: edge_block = ne * n; break;
            case Family::DG: break;
        }
        ndofs_ = vertex_block + edge_block + nt * interior_per_triangle;

        for (int t = 0; t < nt; ++t) {
            for (int i = 0; i < ld; ++i) {
                const auto& d = element_.dofs()[i];
                int g = -1;
                double s = 1.0;
                switch (d.kind) {
                    case DofKind::vertex:
                        g = m.canonical_vertex(m.triangles()[t][d.index]);
                        break;
                    case DofKind::edge: {
                        const TriangleEdge te = m.triangle_edges(t)[d.index];
                        if (family() == Family::CG) {
                            const int k = te.sign > 0 ? d.order : n - 2 - d.order;
                            g = vertex_block + te.edge * (n - 1) + k;
                        } else {
                            g = te.edge * n + d.order;
                            if (te.sign < 0) s = (d.order % 2 == 0) ? -1.0 : 1.0;
                        }
                        break;
                    }
                    case DofKind::interior:
                        g = vertex_block + edge_block + t * interior_per_triangle + d.index;
                        break;
                }
                dof_index_[static_cast<std::size_t>(t) * ld + i] = g;
                dof_sign_[static_cast<std::size_t>(t) * ld + i] = s;
            }
        }
    }

    std::shared_ptr<const Mesh> mesh_;
    ReferenceElement element_;
    int ndofs_ = 0;
    std::vector<int> dof_index_;
    std::vector<double> dof_sign_;
};

inline std::shared_ptr<const FunctionSpace> build_space(std::shared_ptr<const Mesh> mesh, Family family, int degree) {
    return std::make_shared<const FunctionSpace>(std::move(mesh), family, degree);
}

/// Coefficient vector over a space, tagged with the time instant it represents.
struct Field {
    std::shared_ptr<const FunctionSpace> space;
    Vector coeffs;
    double time = 0.0;

    Field() = default;
    Field(std::shared_ptr<const FunctionSpace> s, Vector c, double t = 0.0) : space(std::move(s)), coeffs(std::move(c)), time(t) {
        if (!space) throw InvalidArgument("Field: null space");
        if (coeffs.size() != space->dim()) throw InvalidArgument("Field: coefficient count does not match space dimension");
    }

    static Field zero(std::shared_ptr<const FunctionSpace> s, double t = 0.0) {
        const int n = s->dim();
        return Field(std::move(s), Vector::Zero(n), t);
    }

    bool finite() const { return coeffs.allFinite(); }
};

/// Reference basis tables of one element family on one quadrature rule.
class ReferenceTabulation {
public:
    ReferenceTabulation(const ReferenceElement& element, QuadratureRule rule) : rule_(std::move(rule)) {
        if (element.is_vector())
            vector_ = element.eval_vector(rule_.points);
        else
            scalar_ = element.eval_scalar(rule_.points);
    }
    const QuadratureRule& rule() const noexcept { return rule_; }
    const ScalarBasisTable& scalar() const noexcept { return scalar_; }
    const VectorBasisTable& vector() const noexcept { return vector_; }

private:
    QuadratureRule rule_;
    ScalarBasisTable scalar_;
    VectorBasisTable vector_;
};

/// Physical basis values on one triangle, signs applied. Tables are (local dim) x (points).
struct PhysicalScalarValues {
    Eigen::MatrixXd value, dx, dy;
    Eigen::VectorXd jxw;
};

struct PhysicalVectorValues {
    Eigen::MatrixXd vx, vy, div;
    Eigen::VectorXd jxw;
};

namespace detail {

inline Eigen::VectorXd signs_vector(std::span<const double> s) {
    return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

}  // namespace detail

inline PhysicalScalarValues map_scalar(const ScalarBasisTable& ref, const AffineMap& map, std::span<const double> signs,
                                       std::span<const double> weights = {}) {
    const auto& it = map.inverse_transpose;
    const Eigen::VectorXd s = detail::signs_vector(signs);
    PhysicalScalarValues out;
    out.value = s.asDiagonal() * ref.value;
    out.dx = s.asDiagonal() * (it(0, 0) * ref.dx + it(0, 1) * ref.dy);
    out.dy = s.asDiagonal() * (it(1, 0) * ref.dx + it(1, 1) * ref.dy);
    if (!weights.empty()) out.jxw = detail::signs_vector(weights) * map.det;
    return out;
}

inline PhysicalVectorValues map_vector(const VectorBasisTable& ref, const AffineMap& map, std::span<const double> signs,
                                       std::span<const double> weights = {}) {
    const auto& j = map.jacobian;
    const double inv = 1.0 / map.det;
    const Eigen::VectorXd s = detail::signs_vector(signs) * inv;
    PhysicalVectorValues out;
    out.vx = s.asDiagonal() * (j(0, 0) * ref.vx + j(0, 1) * ref.vy);
    out.vy = s.asDiagonal() * (j(1, 0) * ref.vx + j(1, 1) * ref.vy);
    out.div = s.asDiagonal() * ref.div;
    if (!weights.empty()) out.jxw = detail::signs_vector(weights) * map.det;
    return out;
}

inline Eigen::VectorXd local_coefficients(const Field& f, int t) {
    const auto dofs = f.space->dofs(t);
    Eigen::VectorXd c(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) c(static_cast<Eigen::Index>(i)) = f.coeffs(dofs[i]);
    return c;
}

struct ScalarValues {
    Eigen::VectorXd value, dx, dy;
};

struct VectorValues {
    Eigen::VectorXd x, y, div;
};

inline void check_triangle(const FunctionSpace& space, int t) {
    if (t < 0 || t >= space.mesh().num_triangles()) throw InvalidArgument("evaluate: triangle index out of range");
}

/// Scalar field (CG/DG) and its gradient at reference points of triangle t.
inline ScalarValues evaluate_scalar(const Field& field, int t, std::span<const Point> points) {
    const FunctionSpace& sp = *field.space;
    if (sp.is_vector()) throw InvalidArgument("evaluate_scalar: field is vector-valued");
    check_triangle(sp, t);
    const auto phys = map_scalar(sp.element().eval_scalar(points), sp.mesh().affine_map(t), sp.signs(t));
    const Eigen::VectorXd c = local_coefficients(field, t);
    return {phys.value.transpose() * c, phys.dx.transpose() * c, phys.dy.transpose() * c};
}

/// RT field and its divergence at reference points of triangle t (Piola-mapped).
inline VectorValues evaluate_vector(const Field& field, int t, std::span<const Point> points) {
    const FunctionSpace& sp = *field.space;
    if (!sp.is_vector()) throw InvalidArgument("evaluate_vector: field is scalar-valued");
    check_triangle(sp, t);
    const auto phys = map_vector(sp.element().eval_vector(points), sp.mesh().affine_map(t), sp.signs(t));
    const Eigen::VectorXd c = local_coefficients(field, t);
    return {phys.vx.transpose() * c, phys.vy.transpose() * c, phys.div.transpose() * c};
}

/// Default quadrature exactness for bilinear forms (2N+2) and trilinear forms (3N+2).
inline int bilinear_quadrature_degree(int n) { return 2 * n + 2; }
inline int trilinear_quadrature_degree(int n) { return 3 * n + 2; }
/// Exactness used when a non-polynomial function enters an integral.
inline int function_quadrature_degree(int n) { return std::min(2 * n + 6, max_quadrature_degree); }

/// Mass matrix <phi_j, phi_i> of a space.
inline SparseMatrix assemble_mass(const FunctionSpace& space, int quad_degree) {
    const ReferenceTabulation tab(space.element(), triangle_quadrature(quad_degree));
    const Mesh& m = space.mesh();
    const int ld = space.local_dim();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(m.num_triangles()) * ld * ld);
    Eigen::MatrixXd local(ld, ld);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const AffineMap map = m.affine_map(t);
        if (space.is_vector()) {
            const auto v = map_vector(tab.vector(), map, space.signs(t), tab.rule().weights);
            local = v.vx * v.jxw.asDiagonal() * v.vx.transpose() + v.vy * v.jxw.asDiagonal() * v.vy.transpose();
        } else {
            const auto v = map_scalar(tab.scalar(), map, space.signs(t), tab.rule().weights);
            local = v.value * v.jxw.asDiagonal() * v.value.transpose();
        }
        const auto dofs = space.dofs(t);
        for (int i = 0; i < ld; ++i)
            for (int j = 0; j < ld; ++j) trips.emplace_back(dofs[i], dofs[j], local(i, j));
    }
    SparseMatrix a(space.dim(), space.dim());
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

/// Load vector <f, phi_i> for a scalar function (CG/DG spaces).
inline Vector assemble_load(const FunctionSpace& space, const ScalarFunction& f, int quad_degree) {
    if (space.is_vector()) throw InvalidArgument("assemble_load: scalar function given for a vector space");
    const ReferenceTabulation tab(space.element(), triangle_quadrature(quad_degree));
    const Mesh& m = space.mesh();
    Vector b = Vector::Zero(space.dim());
    const auto& rule = tab.rule();
    Eigen::VectorXd fq(static_cast<Eigen::Index>(rule.size()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const AffineMap map = m.affine_map(t);
        const auto v = map_scalar(tab.scalar(), map, space.signs(t), rule.weights);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = map(rule.points[q]);
            fq(static_cast<Eigen::Index>(q)) = f(x.x, x.y) * v.jxw(static_cast<Eigen::Index>(q));
        }
        const Eigen::VectorXd local = v.value * fq;
        const auto dofs = space.dofs(t);
        for (int i = 0; i < space.local_dim(); ++i) b(dofs[i]) += local(i);
    }
    return b;
}

/// Load vector <f, v_i> for a vector function (RT spaces).
inline Vector assemble_load(const FunctionSpace& space, const VectorFunction& f, int quad_degree) {
    if (!space.is_vector()) throw InvalidArgument("assemble_load: vector function given for a scalar space");
    const ReferenceTabulation tab(space.element(), triangle_quadrature(quad_degree));
    const Mesh& m = space.mesh();
    Vector b = Vector::Zero(space.dim());
    const auto& rule = tab.rule();
    const auto nq = static_cast<Eigen::Index>(rule.size());
    Eigen::VectorXd fx(nq), fy(nq);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const AffineMap map = m.affine_map(t);
        const auto v = map_vector(tab.vector(), map, space.signs(t), rule.weights);
        for (Eigen::Index q = 0; q < nq; ++q) {
            const Point x = map(rule.points[static_cast<std::size_t>(q)]);
            const Eigen::Vector2d val = f(x.x, x.y);
            fx(q) = val.x() * v.jxw(q);
            fy(q) = val.y() * v.jxw(q);
        }
        const Eigen::VectorXd local = v.vx * fx + v.vy * fy;
        const auto dofs = space.dofs(t);
        for (int i = 0; i < space.local_dim(); ++i) b(dofs[i]) += local(i);
    }
    return b;
}

/// Cached factorization of a space's mass matrix, used for L2 projection.
class Projector {
public:
    explicit Projector(std::shared_ptr<const FunctionSpace> space)
        : space_(std::move(space)), mass_(assemble_mass(*space_, bilinear_quadrature_degree(space_->degree()))) {
        solver_.compute(mass_);
        if (solver_.info() != Eigen::Success) throw AssemblyError("L2 projection: mass matrix factorization failed");
        if ((solver_.vectorD().array() <= 0.0).any()) throw AssemblyError("L2 projection: mass matrix is singular (broken numbering?)");
    }

    const SparseMatrix& mass() const noexcept { return mass_; }

    Vector solve(const Vector& rhs) const { return solver_.solve(rhs); }

    template <class Fn>
    Field project(const Fn& f, double time = 0.0) const {
        const Vector b = assemble_load(*space_, f, function_quadrature_degree(space_->degree()));
        return Field(space_, solve(b), time);
    }

private:
    std::shared_ptr<const FunctionSpace> space_;
    SparseMatrix mass_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

/// Per-space projector cache keyed by the space object.
inline const Projector& projector_for(const std::shared_ptr<const FunctionSpace>& space) {
    static std::mutex mutex;
    static std::vector<std::pair<std::weak_ptr<const FunctionSpace>, std::shared_ptr<Projector>>> cache;
    std::lock_guard lock(mutex);
    std::erase_if(cache, [](const auto& e) { return e.first.expired(); });
    for (const auto& [key, proj] : cache)
        if (key.lock() == space) return *proj;
    cache.emplace_back(space, std::make_shared<Projector>(space));
    return *cache.back().second;
}

/// L2 projection of a scalar function into a CG/DG space.
inline Field project_l2(const std::shared_ptr<const FunctionSpace>& space, const ScalarFunction& f, double time = 0.0) {
    return projector_for(space).project(f, time);
}

/// L2 projection of a vector function into an RT space.
inline Field project_l2(const std::shared_ptr<const FunctionSpace>& space, const VectorFunction& f, double time = 0.0) {
    return projector_for(space).project(f, time);
}

}  // namespace meevc
