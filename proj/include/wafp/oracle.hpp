#pragma once

// Ground-truth engines independent of the learned sampler: Euler-Maruyama
// particle simulation and tensor-product Simpson quadrature.

#include "wafp/common.hpp"
#include "wafp/functions.hpp"
#include "wafp/problem.hpp"
#include "wafp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace wafp {

struct EmConfig {
    double dt = 1e-3;
    std::size_t steps = 1000;
    std::size_t particles = 1000;
    std::uint64_t seed = 0;

    double horizon() const { return dt * static_cast<double>(steps); }
};

struct EmResult {
    RowMatrix endpoints;
    /// Snapshots at the requested step indices, in request order.
    std::vector<RowMatrix> snapshots;
};

/// X_{k+1} = X_k + b(t_k, X_k) dt + sqrt(dt) S xi_k with S S^T = A.
/// Each particle owns the RNG stream derived from (seed, particle index).
inline EmResult euler_maruyama(const FpeProblem& problem, const RowMatrix& x0, const EmConfig& cfg,
                               const std::vector<std::size_t>& snapshot_steps = {}, double t0 = 0.0) {
    if (!(cfg.dt > 0.0)) throw ConfigError("EM dt must be positive");
    if (x0.cols() != static_cast<Eigen::Index>(problem.dim)) throw ShapeError("EM initial points have the wrong width");
    if (problem.diffusion.structure == DiffusionStructure::Dense)
        throw ContractError("EM supports isotropic and diagonal diffusion only");
    const std::size_t n = problem.dim;
    const double sqdt = std::sqrt(cfg.dt);
    EmResult out;
    out.endpoints = x0;
    out.snapshots.assign(snapshot_steps.size(), RowMatrix(x0.rows(), x0.cols()));
    std::vector<double> b(n), coef(diffusion_coef_count(problem.diffusion.structure, n)), x(n);
    std::normal_distribution<double> nd(0.0, 1.0);
    if (problem.diffusion.constant) problem.diffusion.value(t0, std::span<const double>(x0.data(), n), coef);

    for (Eigen::Index p = 0; p < x0.rows(); ++p) {
        Engine eng = make_engine(cfg.seed, "em-particle", static_cast<std::uint64_t>(p));
        for (std::size_t i = 0; i < n; ++i) x[i] = x0(p, static_cast<Eigen::Index>(i));
        for (std::size_t k = 0; k < cfg.steps; ++k) {
            for (std::size_t s = 0; s < snapshot_steps.size(); ++s)
                if (snapshot_steps[s] == k)
                    for (std::size_t i = 0; i < n; ++i) out.snapshots[s](p, static_cast<Eigen::Index>(i)) = x[i];
            const double t = t0 + cfg.dt * static_cast<double>(k);
            problem.drift(t, x, b);
            if (!problem.diffusion.constant) problem.diffusion.value(t, x, coef);
            for (std::size_t i = 0; i < n; ++i) {
                const double a = problem.diffusion.structure == DiffusionStructure::Isotropic ? coef[0] : coef[i];
                const double noise = a == 0.0 ? 0.0 : std::sqrt(a) * sqdt * nd(eng);
                x[i] += b[i] * cfg.dt + noise;
            }
            for (double v : x)
                if (!std::isfinite(v))
                    throw NumericError("EM state non-finite for particle " + std::to_string(p) + " at step " +
                                       std::to_string(k + 1));
        }
        for (std::size_t s = 0; s < snapshot_steps.size(); ++s)
            if (snapshot_steps[s] == cfg.steps)
                for (std::size_t i = 0; i < n; ++i) out.snapshots[s](p, static_cast<Eigen::Index>(i)) = x[i];
        for (std::size_t i = 0; i < n; ++i) out.endpoints(p, static_cast<Eigen::Index>(i)) = x[i];
    }
    return out;
}

struct QuadGrid {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::size_t> points;

    static QuadGrid cube(const Box& box, std::size_t points_per_axis) {
        QuadGrid g{box.lower, box.upper, std::vector<std::size_t>(box.lower.size(), points_per_axis)};
        g.validate();
        return g;
    }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size() || lower.size() != points.size())
            throw ConfigError("quadrature grid axes are inconsistent");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i] < 3 || points[i] % 2 == 0)
                throw ConfigError("Simpson grid needs an odd point count >= 3 per axis (axis " + std::to_string(i) +
                                  " has " + std::to_string(points[i]) + ")");
            if (!(upper[i] > lower[i])) throw ConfigError("quadrature axis has upper <= lower");
        }
    }
};

/// Composite Simpson weights h/3 [1 4 2 4 ... 4 1] on `points` nodes.
inline std::vector<double> simpson_weights(std::size_t points, double lower, double upper) {
    const double h = (upper - lower) / static_cast<double>(points - 1);
    std::vector<double> w(points);
    for (std::size_t i = 0; i < points; ++i) w[i] = (i == 0 || i + 1 == points) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    for (auto& v : w) v *= h / 3.0;
    return w;
}

/// Tensor-product Simpson rule of `f` over the grid.
inline double simpson_integrate(const std::function<double(std::span<const double>)>& f, const QuadGrid& grid) {
    grid.validate();
    const std::size_t n = grid.points.size();
    std::vector<std::vector<double>> weights(n);
    for (std::size_t a = 0; a < n; ++a) weights[a] = simpson_weights(grid.points[a], grid.lower[a], grid.upper[a]);
    std::vector<std::size_t> idx(n, 0);
    std::vector<double> x(n);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        for (std::size_t a = 0; a < n; ++a) {
            const double h = (grid.upper[a] - grid.lower[a]) / static_cast<double>(grid.points[a] - 1);
            x[a] = grid.lower[a] + h * static_cast<double>(idx[a]);
            w *= weights[a][idx[a]];
        }
        total += w * f(x);
        std::size_t a = n;
        while (a > 0) {
            --a;
            if (++idx[a] < grid.points[a]) break;
            idx[a] = 0;
            if (a == 0) return total;
        }
    }
}

/// int f rho / int rho for an unnormalized density rho.
inline double simpson_expectation(const std::function<double(std::span<const double>)>& f,
                                  const std::function<double(std::span<const double>)>& rho, const QuadGrid& grid) {
    const double z = simpson_integrate(rho, grid);
    if (!(z > 0.0)) throw NumericError("reference density integrates to zero on the grid");
    return simpson_integrate([&](std::span<const double> x) { return f(x) * rho(x); }, grid) / z;
}

/// Simpson expectations of the named integrands under a Boltzmann reference.
inline std::map<std::string, double> reference_table(const FpeProblem& problem, const QuadGrid& grid,
                                                     const std::vector<std::string>& function_ids) {
    if (problem.reference.kind != ReferenceKind::BoltzmannUnnormalized)
        throw ContractError("reference_table needs a Boltzmann reference");
    if (grid.points.size() != problem.dim) throw ShapeError("grid dimension differs from problem dimension");
    grid.validate();
    const auto& ref = problem.reference;
    auto rho = [&](std::span<const double> x) { return eval_reference_density(ref, x); };
    const double z = simpson_integrate(rho, grid);
    std::map<std::string, double> out;
    for (const auto& id : function_ids) {
        auto f = make_integrand(id, problem.dim);
        out[id] = simpson_integrate([&](std::span<const double> x) { return f(x) * rho(x); }, grid) / z;
    }
    return out;
}

struct StationaryResidual {
    double residual = 0.0;
    /// Sum of magnitudes of the individual operator terms, for relative checks.
    double scale = 0.0;
    /// |residual| / scale, computed before multiplying by the density so that
    /// it stays meaningful where the density underflows.
    double relative_error = 0.0;
    double relative() const { return relative_error; }
};

/// Forward operator -1/2 sum a_ij d_ij rho + div(b rho) applied to the
/// normalized Boltzmann reference, using the problem's drift and diffusion.
inline StationaryResidual stationary_residual(const FpeProblem& problem, std::span<const double> x, double norm = 1.0) {
    const auto& ref = problem.reference;
    if (ref.kind != ReferenceKind::BoltzmannUnnormalized)
        throw ContractError("stationary residual needs a Boltzmann reference");
    if (!problem.diffusion.constant) throw ContractError("stationary residual supports constant diffusion only");
    const std::size_t n = problem.dim;
    const double k = 2.0 / (ref.sigma * ref.sigma);
    const double rho = std::exp(-k * ref.potential(x)) / norm;
    std::vector<double> gv(n), hv(n * n), b(n), jac(n * n), coef(diffusion_coef_count(problem.diffusion.structure, n));
    ref.potential_gradient(x, gv);
    ref.potential_hessian(x, hv);
    problem.drift(0.0, x, b);
    problem.drift_jacobian(0.0, x, jac);
    problem.diffusion.value(0.0, x, coef);

    // rho = exp(-phi), phi = k V: grad rho = -rho grad phi, hess rho = rho (grad phi grad phi^T - hess phi).
    // Terms below are divided by rho.
    double diffusion_term = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double h = k * gv[i] * k * gv[j] - k * hv[i * n + j];
            diffusion_term += -0.5 * diffusion_entry(problem.diffusion.structure, coef, n, i, j) * h;
        }
    double div_b = 0.0, b_grad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        div_b += jac[i * n + i];
        b_grad -= b[i] * k * gv[i];
    }
    const double sum = diffusion_term + div_b + b_grad;
    const double mag = std::abs(diffusion_term) + std::abs(div_b) + std::abs(b_grad);
    StationaryResidual r;
    r.residual = rho * sum;
    r.scale = rho * mag;
    r.relative_error = mag > 0.0 ? std::abs(sum) / mag : std::abs(sum);
    return r;
}

/// 1-Wasserstein distance between 1D samples and an unnormalized density,
/// int |F_emp - F_ref| dx over [lo, hi] with the reference CDF from the
/// trapezoid rule on `points` nodes.
inline double wasserstein1_vs_density(std::vector<double> samples,
                                      const std::function<double(double)>& density, double lo, double hi,
                                      std::size_t points = 20001) {
    if (samples.empty()) throw InputError("Wasserstein distance of an empty sample set");
    if (points < 2 || !(hi > lo)) throw ConfigError("Wasserstein grid is empty");
    std::sort(samples.begin(), samples.end());
    const double h = (hi - lo) / static_cast<double>(points - 1);
    std::vector<double> cdf(points, 0.0);
    double prev = density(lo);
    for (std::size_t i = 1; i < points; ++i) {
        const double cur = density(lo + h * static_cast<double>(i));
        cdf[i] = cdf[i - 1] + 0.5 * h * (prev + cur);
        prev = cur;
    }
    const double z = cdf.back();
    if (!(z > 0.0)) throw NumericError("reference density integrates to zero");
    const double N = static_cast<double>(samples.size());
    double w = 0.0;
    std::size_t below = 0;
    double prev_gap = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double x = lo + h * static_cast<double>(i);
        while (below < samples.size() && samples[below] <= x) ++below;
        const double gap = std::abs(static_cast<double>(below) / N - cdf[i] / z);
        if (i > 0) w += 0.5 * h * (gap + prev_gap);
        prev_gap = gap;
    }
    return w;
}

}  // namespace wafp
