#pragma once

// Pushforward samplers: a network transports base-distribution draws to the
// target law.
//
//   Steady                x = F(r)
//   SqrtTime              x = x0 + sqrt(t) F~(t, [x0,] r)
//   GaussianIcLinearTime  x = mu0 + sigma0 z(r) + t G(t, r),  z(r) = r[0:n]

#include "wafp/common.hpp"
#include "wafp/nn.hpp"
#include "wafp/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>
#include <random>
#include <string>

namespace wafp {

enum class BaseKind { UniformUnit, StandardNormal };

inline BaseKind parse_base_kind(const std::string& s) {
    if (s == "uniform") return BaseKind::UniformUnit;
    if (s == "normal") return BaseKind::StandardNormal;
    throw ConfigError("unknown base distribution '" + s + "' (expected uniform, normal)");
}

inline std::string to_string(BaseKind k) { return k == BaseKind::UniformUnit ? "uniform" : "normal"; }

struct BaseDistribution {
    BaseKind kind = BaseKind::StandardNormal;
    std::size_t dim = 1;
};

inline RowMatrix sample_base(const BaseDistribution& base, std::size_t count, Engine& eng) {
    if (base.dim < 1) throw ConfigError("base distribution dimension must be >= 1");
    RowMatrix r(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(base.dim));
    if (base.kind == BaseKind::UniformUnit) {
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = ud(eng);
    } else {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = nd(eng);
    }
    return r;
}

/// Latin hypercube draw: every column places one point in each of the
/// `count` equal-probability strata, in a random order.
inline RowMatrix sample_base_stratified(const BaseDistribution& base, std::size_t count, Engine& eng) {
    if (base.dim < 1) throw ConfigError("base distribution dimension must be >= 1");
    RowMatrix r(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(base.dim));
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<std::size_t> perm(count);
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), eng);
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            const double u = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + ud(eng)) / static_cast<double>(count);
            r(i, j) = base.kind == BaseKind::UniformUnit ? u : std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
        }
    }
    return r;
}

inline RowMatrix sample_base(const BaseDistribution& base, std::size_t count, std::uint64_t seed) {
    Engine eng(seed);
    return sample_base(base, count, eng);
}

enum class MapVariant { Steady, SqrtTime, GaussianIcLinearTime };

inline MapVariant parse_map_variant(const std::string& s) {
    if (s == "steady") return MapVariant::Steady;
    if (s == "sqrt_time") return MapVariant::SqrtTime;
    if (s == "gaussian_ic_linear_time") return MapVariant::GaussianIcLinearTime;
    throw ConfigError("unknown map variant '" + s + "' (expected steady, sqrt_time, gaussian_ic_linear_time)");
}

inline std::string to_string(MapVariant v) {
    switch (v) {
        case MapVariant::Steady: return "steady";
        case MapVariant::SqrtTime: return "sqrt_time";
        case MapVariant::GaussianIcLinearTime: return "gaussian_ic_linear_time";
    }
    return "?";
}

struct PushforwardMap {
    MapVariant variant = MapVariant::Steady;
    FeedforwardNet net;
    BaseDistribution base;
    std::size_t n = 1;
    /// SqrtTime only: feed x0 to the network alongside (t, r).
    bool include_x0 = false;
    /// GaussianIcLinearTime only.
    Vector mu0;
    double sigma0 = 0.0;

    bool time_dependent() const { return variant != MapVariant::Steady; }

    std::size_t expected_net_input() const {
        switch (variant) {
            case MapVariant::Steady: return base.dim;
            case MapVariant::SqrtTime: return 1 + base.dim + (include_x0 ? n : 0);
            case MapVariant::GaussianIcLinearTime: return 1 + base.dim;
        }
        return 0;
    }

    void validate() const {
        if (net.depth() == 0) throw ConfigError("pushforward map has no network");
        if (net.in_dim() != expected_net_input())
            throw ConfigError("pushforward network input dim " + std::to_string(net.in_dim()) + " but variant " +
                              to_string(variant) + " needs " + std::to_string(expected_net_input()));
        if (net.out_dim() != n)
            throw ConfigError("pushforward network output dim " + std::to_string(net.out_dim()) +
                              " differs from problem dimension " + std::to_string(n));
        if (variant == MapVariant::GaussianIcLinearTime) {
            if (base.kind != BaseKind::StandardNormal)
                throw ConfigError("gaussian_ic_linear_time needs a standard normal base");
            if (base.dim < n) throw ConfigError("gaussian_ic_linear_time needs base dim >= problem dim");
            if (static_cast<std::size_t>(mu0.size()) != n) throw ConfigError("mu0 length differs from problem dim");
        }
    }
};

/// Pushed samples plus what the reverse pass needs. `scale` holds sqrt(t) or
/// t per row for the time variants and is empty for Steady.
struct PushResult {
    RowMatrix x;
    ForwardTape tape;
    Vector scale;
};

inline PushResult push_steady(const PushforwardMap& map, const RowMatrix& r) {
    if (map.variant != MapVariant::Steady) throw ContractError("push_steady on a time-dependent map");
    PushResult out;
    out.x = forward(map.net, r, &out.tape);
    return out;
}

/// `x0` is required for SqrtTime and ignored by GaussianIcLinearTime.
inline PushResult push_time(const PushforwardMap& map, const Vector& t, const RowMatrix& x0, const RowMatrix& r) {
    if (map.variant == MapVariant::Steady) throw ContractError("push_time on a steady map");
    const auto M = t.size();
    if (r.rows() != M) throw ContractError("time and base batches differ in length");
    if ((t.array() < 0.0).any()) throw DomainError("push_time: negative time");
    const auto n = static_cast<Eigen::Index>(map.n);
    const auto d = r.cols();

    PushResult out;
    if (map.variant == MapVariant::SqrtTime) {
        if (x0.rows() != M || x0.cols() != n) throw ContractError("initial-point batch has the wrong shape");
        const Eigen::Index extra = map.include_x0 ? n : 0;
        RowMatrix in(M, 1 + extra + d);
        in.col(0) = t;
        if (map.include_x0) in.middleCols(1, n) = x0;
        in.rightCols(d) = r;
        RowMatrix disp = forward(map.net, in, &out.tape);
        out.scale = t.array().sqrt();
        out.x = x0 + (disp.array().colwise() * out.scale.array()).matrix();
    } else {
        RowMatrix in(M, 1 + d);
        in.col(0) = t;
        in.rightCols(d) = r;
        RowMatrix g = forward(map.net, in, &out.tape);
        out.scale = t;
        out.x = (g.array().colwise() * t.array()).matrix();
        out.x.array() += map.sigma0 * r.leftCols(n).array();
        out.x.rowwise() += map.mu0.transpose();
    }
    return out;
}

/// Parameter gradient of sum_m x_cot_m . x_m. The x0 and z(r) paths carry no
/// parameters, so only the scaled network branch contributes.
inline FlatGrad backprop_through_push(const PushforwardMap& map, const PushResult& push, const RowMatrix& x_cot) {
    if (x_cot.rows() != push.x.rows() || x_cot.cols() != push.x.cols())
        throw ContractError("x cotangent shape does not match the pushed batch");
    if (map.variant == MapVariant::Steady) return vjp(map.net, push.tape, x_cot).param_grad;
    RowMatrix scaled = x_cot.array().colwise() * push.scale.array();
    return vjp(map.net, push.tape, scaled).param_grad;
}

}  // namespace wafp
