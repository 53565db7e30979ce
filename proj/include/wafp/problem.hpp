#pragma once

// Fokker-Planck problem definitions.
//
// The adjoint operator acting on test functions is fixed as
//   Lf = -1/2 sum_ij a_ij d_ij f - sum_i b_i d_i f,
// and every built-in problem chooses A so that its analytical density is
// exactly stationary under the forward operator.

#include "wafp/common.hpp"
#include "wafp/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wafp {

enum class DiffusionStructure { Isotropic, Diagonal, Dense };

/// Number of coefficients stored for a diffusion tensor of the given structure.
inline std::size_t diffusion_coef_count(DiffusionStructure s, std::size_t n) {
    switch (s) {
        case DiffusionStructure::Isotropic: return 1;
        case DiffusionStructure::Diagonal: return n;
        case DiffusionStructure::Dense: return n * n;
    }
    return 0;
}

/// w^T A w for coefficients laid out per `s` (Dense is row-major).
inline double diffusion_quad(DiffusionStructure s, std::span<const double> coef, std::span<const double> w) {
    const std::size_t n = w.size();
    double acc = 0.0;
    switch (s) {
        case DiffusionStructure::Isotropic:
            for (double wi : w) acc += wi * wi;
            return coef[0] * acc;
        case DiffusionStructure::Diagonal:
            for (std::size_t i = 0; i < n; ++i) acc += coef[i] * w[i] * w[i];
            return acc;
        case DiffusionStructure::Dense:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) acc += coef[i * n + j] * w[i] * w[j];
            return acc;
    }
    return acc;
}

/// out = A w.
inline void diffusion_apply(DiffusionStructure s, std::span<const double> coef, std::span<const double> w,
                            std::span<double> out) {
    const std::size_t n = w.size();
    switch (s) {
        case DiffusionStructure::Isotropic:
            for (std::size_t i = 0; i < n; ++i) out[i] = coef[0] * w[i];
            return;
        case DiffusionStructure::Diagonal:
            for (std::size_t i = 0; i < n; ++i) out[i] = coef[i] * w[i];
            return;
        case DiffusionStructure::Dense:
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += coef[i * n + j] * w[j];
                out[i] = acc;
            }
            return;
    }
}

/// Entry a_ij of the full tensor.
inline double diffusion_entry(DiffusionStructure s, std::span<const double> coef, std::size_t n, std::size_t i,
                              std::size_t j) {
    switch (s) {
        case DiffusionStructure::Isotropic: return i == j ? coef[0] : 0.0;
        case DiffusionStructure::Diagonal: return i == j ? coef[i] : 0.0;
        case DiffusionStructure::Dense: return coef[i * n + j];
    }
    return 0.0;
}

using PointFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using PointDerivFn = std::function<void(double t, std::span<const double> x, std::size_t j, std::span<double> out)>;

struct Diffusion {
    DiffusionStructure structure = DiffusionStructure::Isotropic;
    /// True when A depends on neither t nor x; enables the per-wave fast path.
    bool constant = true;
    /// Fills diffusion_coef_count(structure, n) coefficients.
    PointFn value;
    /// d/dx_j of the coefficients, same layout. May be empty when `constant`.
    PointDerivFn spatial_derivative;
};

enum class ReferenceKind { None, BoltzmannUnnormalized, GaussianMoments };

using ScalarFieldFn = std::function<double(std::span<const double> x)>;
using VectorFieldFn = std::function<void(std::span<const double> x, std::span<double> out)>;

struct AnalyticalReference {
    ReferenceKind kind = ReferenceKind::None;

    // BoltzmannUnnormalized: rho ~ exp(-2 V(x) / sigma^2).
    double sigma = 1.0;
    ScalarFieldFn potential;
    VectorFieldFn potential_gradient;  // n values
    VectorFieldFn potential_hessian;   // n*n row-major

    // GaussianMoments: Ornstein-Uhlenbeck moments from N(mu0, sigma0^2 I).
    Vector mu0;
    Vector mu_eq;
    double theta = 1.0;
    double noise_sigma = 1.0;
    double sigma0 = 0.5;
};

struct ReferenceMoments {
    Vector mean;
    double variance = 0.0;  // per coordinate, identical across coordinates
};

inline double eval_reference_density(const AnalyticalReference& ref, std::span<const double> x) {
    if (ref.kind != ReferenceKind::BoltzmannUnnormalized)
        throw ContractError("reference density is only defined for Boltzmann references");
    return std::exp(-2.0 * ref.potential(x) / (ref.sigma * ref.sigma));
}

inline ReferenceMoments eval_reference_moments(const AnalyticalReference& ref, double t) {
    if (ref.kind != ReferenceKind::GaussianMoments)
        throw ContractError("reference moments are only defined for Gaussian-moment references");
    const double decay = std::exp(-ref.theta * t);
    ReferenceMoments m;
    m.mean = ref.mu0 * decay + ref.mu_eq * (1.0 - decay);
    const double s2 = ref.noise_sigma * ref.noise_sigma;
    m.variance = ref.sigma0 * ref.sigma0 * decay * decay + s2 / (2.0 * ref.theta) * (1.0 - decay * decay);
    return m;
}

/// Axis-aligned box used for quadrature references and plots.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;
};

using InitialSampler = std::function<RowMatrix(Engine& eng, std::size_t count)>;

struct FpeProblem {
    std::string id;
    std::size_t dim = 1;
    bool time_dependent = false;
    /// b(t, x): n values.
    PointFn drift;
    /// db_i/dx_j, row-major n*n.
    PointFn drift_jacobian;
    Diffusion diffusion;
    /// Horizon T, time-dependent problems only.
    double horizon = 0.0;
    InitialSampler initial_sampler;
    AnalyticalReference reference;
    std::optional<Box> quadrature_box;

    Vector drift_at(double t, const Vector& x) const {
        Vector b(static_cast<Eigen::Index>(dim));
        drift(t, {x.data(), dim}, {b.data(), dim});
        return b;
    }
    RowMatrix drift_jacobian_at(double t, const Vector& x) const {
        RowMatrix j(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        drift_jacobian(t, {x.data(), dim}, {j.data(), dim * dim});
        return j;
    }
    std::vector<double> diffusion_at(double t, const Vector& x) const {
        std::vector<double> c(diffusion_coef_count(diffusion.structure, dim));
        diffusion.value(t, {x.data(), dim}, c);
        return c;
    }
    /// Full dense n x n tensor A(t, x).
    RowMatrix diffusion_matrix(double t, const Vector& x) const {
        auto c = diffusion_at(t, x);
        RowMatrix a(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    diffusion_entry(diffusion.structure, c, dim, i, j);
        return a;
    }
};

/// Isotropic constant diffusion c * I.
inline Diffusion constant_isotropic(double c) {
    Diffusion d;
    d.structure = DiffusionStructure::Isotropic;
    d.constant = true;
    d.value = [c](double, std::span<const double>, std::span<double> out) { out[0] = c; };
    d.spatial_derivative = [](double, std::span<const double>, std::size_t, std::span<double> out) { out[0] = 0.0; };
    return d;
}

}  // namespace wafp
