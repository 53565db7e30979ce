#pragma once

// Built-in Fokker-Planck problems and the id registry used by run configs.

#include "wafp/problem.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace wafp {

/// 1D Ornstein-Uhlenbeck, b = -theta (x - mu), A = 2; stationary law N(2, 1).
inline FpeProblem make_ou_1d(double theta = 1.0, double mu = 2.0, double a = 2.0) {
    FpeProblem p;
    p.id = "ou1d";
    p.dim = 1;
    p.drift = [=](double, std::span<const double> x, std::span<double> b) { b[0] = -theta * (x[0] - mu); };
    p.drift_jacobian = [=](double, std::span<const double>, std::span<double> j) { j[0] = -theta; };
    p.diffusion = constant_isotropic(a);
    auto& ref = p.reference;
    ref.kind = ReferenceKind::BoltzmannUnnormalized;
    ref.sigma = std::sqrt(a);
    ref.potential = [=](std::span<const double> x) { return 0.5 * theta * (x[0] - mu) * (x[0] - mu); };
    ref.potential_gradient = [=](std::span<const double> x, std::span<double> g) { g[0] = theta * (x[0] - mu); };
    ref.potential_hessian = [=](std::span<const double>, std::span<double> h) { h[0] = theta; };
    p.quadrature_box = Box{{-3.0}, {7.0}};
    return p;
}

/// Double well V = (x^2 - 1)^2, b = -V', A = sigma^2.
inline FpeProblem make_double_well_1d(double sigma = 0.6) {
    FpeProblem p;
    p.id = "dwell1d";
    p.dim = 1;
    p.drift = [](double, std::span<const double> x, std::span<double> b) {
        b[0] = -4.0 * x[0] * x[0] * x[0] + 4.0 * x[0];
    };
    p.drift_jacobian = [](double, std::span<const double> x, std::span<double> j) { j[0] = -12.0 * x[0] * x[0] + 4.0; };
    p.diffusion = constant_isotropic(sigma * sigma);
    auto& ref = p.reference;
    ref.kind = ReferenceKind::BoltzmannUnnormalized;
    ref.sigma = sigma;
    ref.potential = [](std::span<const double> x) {
        const double s = x[0] * x[0] - 1.0;
        return s * s;
    };
    ref.potential_gradient = [](std::span<const double> x, std::span<double> g) {
        g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
    };
    ref.potential_hessian = [](std::span<const double> x, std::span<double> h) { h[0] = 12.0 * x[0] * x[0] - 4.0; };
    p.quadrature_box = Box{{-3.0}, {3.0}};
    return p;
}

/// Two wells at (1,1) and (-1,-1): V = P Q with P = |x - (1,1)|^2, Q = |x + (1,1)|^2.
inline FpeProblem make_double_peak_2d(double sigma = 0.4) {
    FpeProblem p;
    p.id = "dpeak2d";
    p.dim = 2;
    p.drift = [](double, std::span<const double> x, std::span<double> b) {
        const double P = (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
        const double Q = (x[0] + 1) * (x[0] + 1) + (x[1] + 1) * (x[1] + 1);
        b[0] = -2.0 * (x[0] - 1) * Q - 2.0 * (x[0] + 1) * P;
        b[1] = -2.0 * (x[1] - 1) * Q - 2.0 * (x[1] + 1) * P;
    };
    p.drift_jacobian = [](double, std::span<const double> x, std::span<double> j) {
        const double P = (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
        const double Q = (x[0] + 1) * (x[0] + 1) + (x[1] + 1) * (x[1] + 1);
        j[0] = -2.0 * Q - 2.0 * P - 8.0 * (x[0] - 1) * (x[0] + 1);
        j[1] = -4.0 * (x[0] - 1) * (x[1] + 1) - 4.0 * (x[0] + 1) * (x[1] - 1);
        j[2] = -4.0 * (x[1] - 1) * (x[0] + 1) - 4.0 * (x[1] + 1) * (x[0] - 1);
        j[3] = -2.0 * Q - 2.0 * P - 8.0 * (x[1] - 1) * (x[1] + 1);
    };
    p.diffusion = constant_isotropic(sigma * sigma);
    auto& ref = p.reference;
    ref.kind = ReferenceKind::BoltzmannUnnormalized;
    ref.sigma = sigma;
    ref.potential = [](std::span<const double> x) {
        const double P = (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
        const double Q = (x[0] + 1) * (x[0] + 1) + (x[1] + 1) * (x[1] + 1);
        return P * Q;
    };
    ref.potential_gradient = [](std::span<const double> x, std::span<double> g) {
        const double P = (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
        const double Q = (x[0] + 1) * (x[0] + 1) + (x[1] + 1) * (x[1] + 1);
        for (std::size_t i = 0; i < 2; ++i) g[i] = 2.0 * (x[i] - 1) * Q + 2.0 * (x[i] + 1) * P;
    };
    ref.potential_hessian = [](std::span<const double> x, std::span<double> h) {
        const double P = (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
        const double Q = (x[0] + 1) * (x[0] + 1) + (x[1] + 1) * (x[1] + 1);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < 2; ++k) {
                double v = 4.0 * (x[i] - 1) * (x[k] + 1) + 4.0 * (x[i] + 1) * (x[k] - 1);
                if (i == k) v += 2.0 * Q + 2.0 * P;
                h[i * 2 + k] = v;
            }
    };
    p.quadrature_box = Box{{-5.0, -5.0}, {5.0, 5.0}};
    return p;
}

/// Ring at radius r0 with rotational drift omega (-x2, x1). The radial drift
/// is -2 (r^2 - r0^2) x; A = 2 sigma^2 I keeps exp(-(r^2 - r0^2)^2 / (2 sigma^2))
/// stationary.
inline FpeProblem make_ring_2d(double r0 = 2.0, double omega = 2.0, double sigma = 1.0) {
    FpeProblem p;
    p.id = "ring2d";
    p.dim = 2;
    const double r0sq = r0 * r0;
    p.drift = [=](double, std::span<const double> x, std::span<double> b) {
        const double s = x[0] * x[0] + x[1] * x[1] - r0sq;
        b[0] = -2.0 * x[0] * s - omega * x[1];
        b[1] = -2.0 * x[1] * s + omega * x[0];
    };
    p.drift_jacobian = [=](double, std::span<const double> x, std::span<double> j) {
        const double s = x[0] * x[0] + x[1] * x[1] - r0sq;
        j[0] = -2.0 * s - 4.0 * x[0] * x[0];
        j[1] = -4.0 * x[0] * x[1] - omega;
        j[2] = -4.0 * x[0] * x[1] + omega;
        j[3] = -2.0 * s - 4.0 * x[1] * x[1];
    };
    p.diffusion = constant_isotropic(2.0 * sigma * sigma);
    auto& ref = p.reference;
    ref.kind = ReferenceKind::BoltzmannUnnormalized;
    ref.sigma = sigma;
    ref.potential = [=](std::span<const double> x) {
        const double s = x[0] * x[0] + x[1] * x[1] - r0sq;
        return 0.25 * s * s;
    };
    ref.potential_gradient = [=](std::span<const double> x, std::span<double> g) {
        const double s = x[0] * x[0] + x[1] * x[1] - r0sq;
        g[0] = s * x[0];
        g[1] = s * x[1];
    };
    ref.potential_hessian = [=](std::span<const double> x, std::span<double> h) {
        const double s = x[0] * x[0] + x[1] * x[1] - r0sq;
        h[0] = s + 2.0 * x[0] * x[0];
        h[1] = 2.0 * x[0] * x[1];
        h[2] = 2.0 * x[0] * x[1];
        h[3] = s + 2.0 * x[1] * x[1];
    };
    p.quadrature_box = Box{{-5.0, -5.0}, {5.0, 5.0}};
    return p;
}

/// Time-dependent OU on [0, T]: b = -theta x, A = sigma^2 I, rho_0 = N(mu0, sigma0^2 I).
inline FpeProblem make_ou_time(std::size_t n, const Vector& mu0, double theta = 1.0, double sigma = 1.0,
                               double sigma0 = 0.5, double horizon = 1.0) {
    if (static_cast<std::size_t>(mu0.size()) != n) throw ConfigError("make_ou_time: mu0 length differs from n");
    FpeProblem p;
    p.id = "outime";
    p.dim = n;
    p.time_dependent = true;
    p.horizon = horizon;
    p.drift = [=](double, std::span<const double> x, std::span<double> b) {
        for (std::size_t i = 0; i < n; ++i) b[i] = -theta * x[i];
    };
    p.drift_jacobian = [=](double, std::span<const double>, std::span<double> j) {
        for (std::size_t i = 0; i < n * n; ++i) j[i] = 0.0;
        for (std::size_t i = 0; i < n; ++i) j[i * n + i] = -theta;
    };
    p.diffusion = constant_isotropic(sigma * sigma);
    p.initial_sampler = [=](Engine& eng, std::size_t count) {
        std::normal_distribution<double> nd(0.0, 1.0);
        RowMatrix x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
        for (Eigen::Index m = 0; m < x.rows(); ++m)
            for (std::size_t i = 0; i < n; ++i) x(m, static_cast<Eigen::Index>(i)) = mu0[static_cast<Eigen::Index>(i)] + sigma0 * nd(eng);
        return x;
    };
    auto& ref = p.reference;
    ref.kind = ReferenceKind::GaussianMoments;
    ref.mu0 = mu0;
    ref.mu_eq = Vector::Zero(static_cast<Eigen::Index>(n));
    ref.theta = theta;
    ref.noise_sigma = sigma;
    ref.sigma0 = sigma0;
    return p;
}

inline Vector ou10d_initial_means() {
    Vector mu(10);
    mu << 3.0, -2.5, 2.0, -3.5, 1.5, -1.0, 2.5, -2.0, 3.5, -1.5;
    return mu;
}

/// 100D initial means ~ N(0, 4), drawn once from a fixed stream.
inline Vector ou100d_initial_means() {
    Engine eng = make_engine(20251016, "outime100d-mu0");
    std::normal_distribution<double> nd(0.0, 2.0);
    Vector mu(100);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] = nd(eng);
    return mu;
}

using ProblemFactory = std::function<FpeProblem()>;

inline std::map<std::string, ProblemFactory>& custom_problem_registry() {
    static std::map<std::string, ProblemFactory> registry;
    return registry;
}

/// Registers a user-defined problem, selectable by id (conventionally "custom").
inline void register_problem(const std::string& id, ProblemFactory factory) {
    custom_problem_registry()[id] = std::move(factory);
}

inline std::vector<std::string> builtin_problem_ids() {
    return {"ou1d", "dwell1d", "dpeak2d", "ring2d", "outime1d", "outime10d", "outime100d", "custom"};
}

inline FpeProblem make_problem(const std::string& id) {
    FpeProblem p;
    if (id == "ou1d") {
        p = make_ou_1d();
    } else if (id == "dwell1d") {
        p = make_double_well_1d();
    } else if (id == "dpeak2d") {
        p = make_double_peak_2d();
    } else if (id == "ring2d") {
        p = make_ring_2d();
    } else if (id == "outime1d") {
        p = make_ou_time(1, Vector::Constant(1, 3.0));
    } else if (id == "outime10d") {
        p = make_ou_time(10, ou10d_initial_means());
    } else if (id == "outime100d") {
        p = make_ou_time(100, ou100d_initial_means());
    } else if (auto it = custom_problem_registry().find(id); it != custom_problem_registry().end()) {
        p = it->second();
    } else {
        std::string valid;
        for (const auto& v : builtin_problem_ids()) valid += (valid.empty() ? "" : ", ") + v;
        if (id == "custom")
            throw ConfigError("problem id 'custom' has no registered factory; call register_problem(\"custom\", ...)");
        throw ConfigError("unknown problem id '" + id + "' (valid ids: " + valid + ")");
    }
    p.id = id;
    return p;
}

}  // namespace wafp
