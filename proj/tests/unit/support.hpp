#pragma once

#include "wafp/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace wafp::testing {

/// Relative error of `a` against `b` in the Euclidean norm, with an absolute
/// floor so that near-zero references compare absolutely.
inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-8) {
    return (a - b).norm() / std::max(b.norm(), floor);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// Central differences of a scalar function of a vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector p = x, m = x;
        p[i] += h;
        m[i] -= h;
        g[i] = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

}  // namespace wafp::testing
