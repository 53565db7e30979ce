#pragma once

#include "wafp/problem.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/rng.hpp"

namespace wafp {

/// Draws `count` points from a trained map. Steady maps ignore `t`; time maps
/// push every point at the same time `t` (x0 drawn from the problem's rho_0).
inline RowMatrix generate_samples(const PushforwardMap& map, const FpeProblem& problem, std::size_t count,
                                  std::uint64_t seed, double t = 0.0) {
    Engine eb = make_engine(seed, "sample-base");
    RowMatrix r = sample_base(map.base, count, eb);
    if (!map.time_dependent()) return push_steady(map, r).x;
    RowMatrix x0;
    if (map.variant == MapVariant::SqrtTime) {
        Engine ex = make_engine(seed, "sample-x0");
        x0 = problem.initial_sampler(ex, count);
    }
    return push_time(map, Vector::Constant(static_cast<Eigen::Index>(count), t), x0, r).x;
}

}  // namespace wafp
