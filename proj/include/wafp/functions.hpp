#pragma once

// Named integrands used for Monte Carlo integration and reference tables.

#include "wafp/common.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wafp {

using Integrand2 = std::function<double(std::span<const double>)>;

inline std::vector<std::string> integrand_ids(std::size_t n) {
    if (n == 2) return {"one", "f1", "f2", "f3", "f4", "f5", "f6"};
    if (n == 1) return {"one", "x", "x2"};
    return {"one"};
}

/// f1 = x^2 + y^2, f2 = x, f3 = xy, f4 = exp(-(x-1)^2 - (y-1)^2),
/// f5 = cos x sin y, f6 = r^2 exp(-r^2); "x"/"x2" are 1D moments.
inline Integrand2 make_integrand(const std::string& id, std::size_t n) {
    if (id == "one") return [](std::span<const double>) { return 1.0; };
    if (n == 1) {
        if (id == "x") return [](std::span<const double> p) { return p[0]; };
        if (id == "x2") return [](std::span<const double> p) { return p[0] * p[0]; };
    }
    if (n == 2) {
        if (id == "f1") return [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
        if (id == "f2") return [](std::span<const double> p) { return p[0]; };
        if (id == "f3") return [](std::span<const double> p) { return p[0] * p[1]; };
        if (id == "f4")
            return [](std::span<const double> p) { return std::exp(-(p[0] - 1) * (p[0] - 1) - (p[1] - 1) * (p[1] - 1)); };
        if (id == "f5") return [](std::span<const double> p) { return std::cos(p[0]) * std::sin(p[1]); };
        if (id == "f6")
            return [](std::span<const double> p) {
                const double r2 = p[0] * p[0] + p[1] * p[1];
                return r2 * std::exp(-r2);
            };
    }
    std::string valid;
    for (const auto& v : integrand_ids(n)) valid += (valid.empty() ? "" : ", ") + v;
    throw ConfigError("unknown integrand '" + id + "' for dimension " + std::to_string(n) + " (valid: " + valid + ")");
}

}  // namespace wafp
