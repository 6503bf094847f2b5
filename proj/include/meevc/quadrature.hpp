#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "mesh.hpp"

namespace meevc {

/// Gauss-Legendre nodes and weights on [0, 1].
struct LineRule {
    std::vector<double> points;
    std::vector<double> weights;
};

inline LineRule gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("gauss_legendre: need at least one point");
    LineRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]; x is descending in i
        rule.points[i] = 0.5 * (1.0 - x);
        rule.points[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * w;
    }
    return rule;
}

/// Quadrature rule on the reference triangle; weights sum to 1/2.
struct QuadratureRule {
    std::vector<Point> points;
    std::vector<double> weights;
    int exactness_degree = 0;

    std::size_t size() const noexcept { return points.size(); }
};

inline constexpr int max_quadrature_degree = 20;

/// Rule exact for all bivariate polynomials of total degree <= `degree`.
/// Degree 0/1 is the barycentre rule; higher degrees use the collapsed
/// (Duffy) product of Gauss-Legendre rules, which has positive weights.
inline QuadratureRule triangle_quadrature(int degree) {
    if (degree < 0 || degree > max_quadrature_degree)
        throw CapabilityError("triangle_quadrature: degree " + std::to_string(degree) + " outside [0, " +
                              std::to_string(max_quadrature_degree) + "]");
    QuadratureRule rule;
    if (degree <= 1) {
        rule.points = {{1.0 / 3.0, 1.0 / 3.0}};
        rule.weights = {0.5};
        rule.exactness_degree = 1;
        return rule;
    }
    // x = s (1 - t), y = t, dx dy = (1 - t) ds dt; the t-integrand has degree degree+1.
    const int n = (degree + 3) / 2;
    const LineRule g = gauss_legendre(n);
    rule.points.reserve(static_cast<std::size_t>(n * n));
    rule.weights.reserve(static_cast<std::size_t>(n * n));
    for (int j = 0; j < n; ++j) {
        const double t = g.points[j];
        for (int i = 0; i < n; ++i) {
            const double s = g.points[i];
            rule.points.push_back({s * (1.0 - t), t});
            rule.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - t));
        }
    }
    rule.exactness_degree = 2 * n - 2;
    return rule;
}

}  // namespace meevc
