#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "meevc/elements.hpp"
#include "meevc/quadrature.hpp"

using namespace meevc;

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

std::vector<Point> random_reference_points(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> pts;
    while (static_cast<int>(pts.size()) < n) {
        const double x = u(rng), y = u(rng);
        if (x + y <= 1.0) pts.push_back({x, y});
    }
    return pts;
}

}  // namespace

TEST(Quadrature, DegreeOneIsBarycentre) {
    const auto r = triangle_quadrature(1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_DOUBLE_EQ(r.points[0].x, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.weights[0], 0.5);
}

// Oracle: integral of x^a y^b over the reference triangle is a! b! / (a+b+2)!.
TEST(Quadrature, MonomialExactnessAgainstFactorialFormula) {
    for (int d = 1; d <= max_quadrature_degree; ++d) {
        const auto r = triangle_quadrature(d);
        EXPECT_GE(r.exactness_degree, d);
        double wsum = 0.0;
        for (double w : r.weights) {
            EXPECT_GT(w, 0.0);
            wsum += w;
        }
        EXPECT_NEAR(wsum, 0.5, 1e-15);
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b) {
                double q = 0.0;
                for (std::size_t k = 0; k < r.size(); ++k) q += r.weights[k] * std::pow(r.points[k].x, a) * std::pow(r.points[k].y, b);
                const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                EXPECT_NEAR(q, exact, 1e-14 * exact) << "degree " << d << " monomial " << a << "," << b;
            }
    }
}

TEST(Quadrature, OutOfRangeIsCapabilityError) {
    EXPECT_THROW(triangle_quadrature(21), CapabilityError);
}

TEST(ReferenceElement, Dimensions) {
    for (int n = 1; n <= 4; ++n) {
        EXPECT_EQ(ReferenceElement(Family::CG, n).dim(), (n + 1) * (n + 2) / 2);
        EXPECT_EQ(ReferenceElement(Family::DG, n).dim(), n * (n + 1) / 2);
        EXPECT_EQ(ReferenceElement(Family::RT, n).dim(), n * (n + 2));
    }
    const ReferenceElement rt1(Family::RT, 1);
    EXPECT_EQ(rt1.dim(), 3);
    for (const auto& d : rt1.dofs()) EXPECT_EQ(d.kind, DofKind::edge);
    EXPECT_EQ(ReferenceElement(Family::DG, 2).polynomial_degree(), 1);
    EXPECT_THROW(ReferenceElement(Family::RT, 5), CapabilityError);
    EXPECT_THROW(ReferenceElement(Family::CG, 0), CapabilityError);
}

TEST(ReferenceElement, VandermondeIsWellConditioned) {
    for (auto fam : {Family::CG, Family::DG, Family::RT})
        for (int n = 1; n <= 4; ++n) {
            const ReferenceElement e(fam, n);
            EXPECT_TRUE(std::isfinite(e.vandermonde_condition()));
            EXPECT_LT(e.vandermonde_condition(), 1e6);
        }
}

TEST(ReferenceElement, LagrangePropertyAtNodes) {
    for (auto fam : {Family::CG, Family::DG})
        for (int n = 1; n <= 4; ++n) {
            const ReferenceElement e(fam, n);
            const auto tab = e.eval_scalar(e.nodes());
            EXPECT_TRUE(tab.value.isIdentity(1e-12)) << to_string(fam) << n;
        }
}

TEST(ReferenceElement, Cg1AtBarycentre) {
    const ReferenceElement e(Family::CG, 1);
    const std::vector<Point> c{{1.0 / 3.0, 1.0 / 3.0}};
    const auto tab = e.eval_scalar(c);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(tab.value(i, 0), 1.0 / 3.0, 1e-15);
}

TEST(ReferenceElement, CgPartitionOfUnity) {
    const auto pts = random_reference_points(25, 3);
    for (int n = 1; n <= 4; ++n) {
        const auto tab = ReferenceElement(Family::CG, n).eval_scalar(pts);
        for (int q = 0; q < static_cast<int>(pts.size()); ++q) {
            EXPECT_NEAR(tab.value.col(q).sum(), 1.0, 1e-13);
            EXPECT_NEAR(tab.dx.col(q).sum(), 0.0, 1e-11);
            EXPECT_NEAR(tab.dy.col(q).sum(), 0.0, 1e-11);
        }
    }
}

TEST(ReferenceElement, RtUnisolvency) {
    for (int n = 1; n <= 4; ++n) {
        const ReferenceElement e(Family::RT, n);
        Eigen::MatrixXd gram(e.dim(), e.dim());
        for (int j = 0; j < e.dim(); ++j) {
            gram.col(j) = e.rt_dofs_of([&](Point p) -> std::array<double, 2> {
                const std::vector<Point> pt{p};
                const auto t = e.eval_vector(pt);
                return {t.vx(j, 0), t.vy(j, 0)};
            });
        }
        EXPECT_LT((gram - Eigen::MatrixXd::Identity(e.dim(), e.dim())).cwiseAbs().maxCoeff(), 1e-12) << "RT" << n;
    }
}

// Oracle: centred finite differences of the basis values.
TEST(ReferenceElement, RtDivergenceMatchesFiniteDifferences) {
    const double h = 1e-6;
    std::vector<Point> pts;
    for (const auto& p : random_reference_points(10, 11)) pts.push_back({0.05 + 0.85 * p.x, 0.05 + 0.85 * p.y});
    for (int n = 1; n <= 4; ++n) {
        const ReferenceElement e(Family::RT, n);
        for (const auto& p : pts) {
            const std::vector<Point> px{{p.x + h, p.y}, {p.x - h, p.y}, {p.x, p.y + h}, {p.x, p.y - h}, p};
            const auto t = e.eval_vector(px);
            for (int i = 0; i < e.dim(); ++i) {
                const double fd = (t.vx(i, 0) - t.vx(i, 1)) / (2 * h) + (t.vy(i, 2) - t.vy(i, 3)) / (2 * h);
                EXPECT_NEAR(t.div(i, 4), fd, 1e-6);
            }
        }
    }
}

TEST(ReferenceElement, RtDivergenceDegreeAtMostNMinusOne) {
    // Divergence of RT_N lies in P_{N-1}: it is reproduced exactly by DG_{N-1} nodal interpolation.
    const auto pts = random_reference_points(12, 5);
    for (int n = 1; n <= 4; ++n) {
        const ReferenceElement rt(Family::RT, n), dg(Family::DG, n);
        const auto at_nodes = rt.eval_vector(dg.nodes());
        const auto at_pts = rt.eval_vector(pts);
        const auto dg_pts = dg.eval_scalar(pts);
        for (int i = 0; i < rt.dim(); ++i) {
            const Eigen::VectorXd interp = dg_pts.value.transpose() * at_nodes.div.row(i).transpose();
            EXPECT_LT((interp - at_pts.div.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-11);
        }
    }
}

// Reference-level subcomplex: curl CG_N lies in RT_N, div RT_N lies in DG_{N-1}.
TEST(ReferenceElement, SubcomplexExactness) {
    const auto pts = random_reference_points(40, 9);
    for (int n = 1; n <= 4; ++n) {
        const ReferenceElement cg(Family::CG, n), rt(Family::RT, n), dg(Family::DG, n);
        const auto c = cg.eval_scalar(pts);
        const auto r = rt.eval_vector(pts);
        const auto d = dg.eval_scalar(pts);
        const int np = static_cast<int>(pts.size());
        Eigen::MatrixXd rt_basis(2 * np, rt.dim());
        rt_basis << r.vx.transpose(), r.vy.transpose();
        for (int j = 0; j < cg.dim(); ++j) {
            Eigen::VectorXd curl(2 * np);
            curl << c.dy.row(j).transpose(), -c.dx.row(j).transpose();
            const Eigen::VectorXd coef = rt_basis.colPivHouseholderQr().solve(curl);
            EXPECT_LT((rt_basis * coef - curl).norm(), 1e-12) << "CG" << n << " basis " << j;
        }
        const Eigen::MatrixXd dg_basis = d.value.transpose();
        for (int i = 0; i < rt.dim(); ++i) {
            const Eigen::VectorXd div = r.div.row(i).transpose();
            const Eigen::VectorXd coef = dg_basis.colPivHouseholderQr().solve(div);
            EXPECT_LT((dg_basis * coef - div).norm(), 1e-12) << "RT" << n << " basis " << i;
        }
    }
}

TEST(ReferenceElement, PointOutsideIsRejected) {
    const ReferenceElement e(Family::CG, 2);
    const std::vector<Point> bad{{0.8, 0.8}};
    EXPECT_THROW(e.eval_scalar(bad), InvalidArgument);
    const std::vector<Point> edge{{0.5, 0.5 + 1e-13}};
    EXPECT_NO_THROW(e.eval_scalar(edge));
}

TEST(Piola, IdentityAndScaling) {
    AffineMap id;
    id.jacobian.setIdentity();
    id.det = 1.0;
    const Eigen::Vector2d v(0.3, -1.2);
    EXPECT_TRUE(piola_map_rt(v, id).isApprox(v));
    AffineMap two;
    two.jacobian = 2.0 * Eigen::Matrix2d::Identity();
    two.det = 4.0;
    EXPECT_TRUE(piola_map_rt(v, two).isApprox(v / 2.0));
    EXPECT_DOUBLE_EQ(piola_map_rt_divergence(2.0, two), 0.5);
}

// Two triangles sharing an edge: the mapped RT basis function attached to the
// shared edge has the same normal component from both sides (up to the dof sign).
TEST(Piola, NormalContinuityAcrossSharedEdge) {
    const Point a{0.0, 0.0}, b{1.3, 0.2}, c{0.4, 1.1}, d{1.5, 1.4};
    // T1 = (a, b, c): shared edge b->c is local edge 0. T2 = (d, c, b): shared edge c->b is local edge 0.
    auto make_map = [](Point p0, Point p1, Point p2) {
        AffineMap m;
        m.origin = p0;
        m.jacobian << p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y;
        m.det = m.jacobian.determinant();
        m.inverse_transpose = m.jacobian.inverse().transpose();
        return m;
    };
    const AffineMap m1 = make_map(a, b, c), m2 = make_map(d, c, b);
    ASSERT_GT(m1.det, 0.0);
    ASSERT_GT(m2.det, 0.0);
    const Eigen::Vector2d normal = Eigen::Vector2d(c.y - b.y, -(c.x - b.x)).normalized();
    for (int n = 1; n <= 4; ++n) {
        const ReferenceElement rt(Family::RT, n);
        for (double s : {0.1, 0.5, 0.85}) {
            // Same physical point: on T1 at parameter s from b, on T2 at 1 - s from c.
            const std::vector<Point> p1{{1.0 - s, s}}, p2{{s, 1.0 - s}};
            const auto t1 = rt.eval_vector(p1);
            const auto t2 = rt.eval_vector(p2);
            for (int m = 0; m < n; ++m) {
                const double sign = (m % 2 == 0) ? -1.0 : 1.0;  // reversed edge direction
                const Eigen::Vector2d v1 = piola_map_rt({t1.vx(m, 0), t1.vy(m, 0)}, m1);
                const Eigen::Vector2d v2 = sign * piola_map_rt({t2.vx(m, 0), t2.vy(m, 0)}, m2);
                EXPECT_NEAR(v1.dot(normal), v2.dot(normal), 1e-13) << "RT" << n << " moment " << m;
            }
        }
    }
}
