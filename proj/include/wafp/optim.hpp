#pragma once

#include "wafp/common.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace wafp {

/// Descent minimizes (generator), Ascent maximizes (adversary).
enum class Direction { Descent, Ascent };

struct AdamState {
    Vector m;
    Vector v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-3;

    static AdamState fresh(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        if (!(lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
            throw ConfigError("Adam betas must lie in [0, 1)");
        if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
        AdamState s;
        s.m = Vector::Zero(static_cast<Eigen::Index>(size));
        s.v = Vector::Zero(static_cast<Eigen::Index>(size));
        s.lr = lr;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        return s;
    }
};

struct SgdState {
    double lr = 1e-2;
};

/// Rescales `grad` in place so that its Euclidean norm is at most `max_norm`.
inline void clip_by_norm(Vector& grad, std::optional<double> max_norm) {
    if (!max_norm) return;
    const double norm = grad.norm();
    if (norm > *max_norm && norm > 0.0) grad *= *max_norm / norm;
}

inline void adam_step(Vector& params, const Vector& grad, AdamState& state, Direction dir) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw ContractError("adam_step: parameter, gradient and state lengths differ");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const double sign = dir == Direction::Descent ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] += sign * state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

inline void sgd_step(Vector& params, const Vector& grad, const SgdState& state, Direction dir) {
    if (params.size() != grad.size()) throw ContractError("sgd_step: parameter and gradient lengths differ");
    if (dir == Direction::Descent)
        params -= state.lr * grad;
    else
        params += state.lr * grad;
}

}  // namespace wafp
