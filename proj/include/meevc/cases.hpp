#pragma once

// Benchmark problems: the decaying Taylor-Green vortex on [0,2]^2 and the
// inviscid double shear layer on [0,2pi]^2.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "spaces.hpp"

namespace meevc {

struct FlowSample {
    double ux = 0.0, uy = 0.0, p = 0.0, omega = 0.0;
};

/// Taylor-Green vortex. The pressure factor exp(+4 pi^2 nu t) reproduces the
/// published formula verbatim; pressure enters no error metric.
inline FlowSample taylor_green(double x, double y, double t, double nu) {
    constexpr double pi = std::numbers::pi;
    const double decay = std::exp(-2.0 * pi * pi * nu * t);
    FlowSample s;
    s.ux = -std::sin(pi * x) * std::cos(pi * y) * decay;
    s.uy = std::cos(pi * x) * std::sin(pi * y) * decay;
    s.p = 0.25 * (std::cos(2.0 * pi * x) + std::cos(2.0 * pi * y)) * std::exp(4.0 * pi * pi * nu * t);
    s.omega = -2.0 * pi * std::sin(pi * x) * std::sin(pi * y) * decay;
    return s;
}

struct ShearLayerParams {
    double delta = std::numbers::pi / 15.0;
    double epsilon = 0.05;
};

/// Double shear layer initial condition. The vorticity is the published one,
/// -du_x/dy only; the eps cos(x) contribution of u_y is not included.
inline FlowSample shear_layer_init(double x, double y, ShearLayerParams prm = {}) {
    constexpr double pi = std::numbers::pi;
    FlowSample s;
    const auto sech2 = [](double z) {
        const double c = std::cosh(z);
        return 1.0 / (c * c);
    };
    if (y <= pi) {
        s.ux = std::tanh((y - pi / 2.0) / prm.delta);
        s.omega = sech2((y - pi / 2.0) / prm.delta) / prm.delta;
    } else {
        s.ux = std::tanh((3.0 * pi / 2.0 - y) / prm.delta);
        s.omega = -sech2((3.0 * pi / 2.0 - y) / prm.delta) / prm.delta;
    }
    s.uy = prm.epsilon * std::sin(x);
    return s;
}

/// A benchmark: domain, default viscosity, initial data, and (optionally) the exact solution.
struct CaseDefinition {
    std::string name;
    double lx = 1.0, ly = 1.0;
    double nu = 0.0;
    std::function<FlowSample(double, double)> initial;
    std::function<FlowSample(double, double, double, double)> exact;  // (x, y, t, nu)

    bool has_exact() const { return static_cast<bool>(exact); }

    VectorFunction initial_velocity() const {
        return [f = initial](double x, double y) {
            const auto s = f(x, y);
            return Eigen::Vector2d(s.ux, s.uy);
        };
    }
    ScalarFunction initial_vorticity() const {
        return [f = initial](double x, double y) { return f(x, y).omega; };
    }
    VectorFunction exact_velocity(double t, double nu_value) const {
        if (!exact) throw CapabilityError("case '" + name + "' has no exact solution");
        return [f = exact, t, nu_value](double x, double y) {
            const auto s = f(x, y, t, nu_value);
            return Eigen::Vector2d(s.ux, s.uy);
        };
    }
    ScalarFunction exact_vorticity(double t, double nu_value) const {
        if (!exact) throw CapabilityError("case '" + name + "' has no exact solution");
        return [f = exact, t, nu_value](double x, double y) { return f(x, y, t, nu_value).omega; };
    }
};

inline CaseDefinition taylor_green_case(double nu = 0.01) {
    CaseDefinition c;
    c.name = "taylor-green";
    c.lx = c.ly = 2.0;
    c.nu = nu;
    c.initial = [nu](double x, double y) { return taylor_green(x, y, 0.0, nu); };
    c.exact = [](double x, double y, double t, double n) { return taylor_green(x, y, t, n); };
    return c;
}

inline CaseDefinition shear_layer_case(ShearLayerParams prm = {}) {
    CaseDefinition c;
    c.name = "shear-layer";
    c.lx = c.ly = 2.0 * std::numbers::pi;
    c.nu = 0.0;
    c.initial = [prm](double x, double y) { return shear_layer_init(x, y, prm); };
    return c;
}

inline CaseDefinition case_by_name(const std::string& name) {
    if (name == "taylor-green") return taylor_green_case();
    if (name == "shear-layer") return shear_layer_case();
    throw InvalidArgument("unknown case '" + name + "' (expected taylor-green or shear-layer)");
}

}  // namespace meevc
