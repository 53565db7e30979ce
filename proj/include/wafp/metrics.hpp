#pragma once

// Statistics over sample sets: moments, Monte Carlo integration, radial and
// angular histograms, kernel density estimates and error tables.
// Variances use the population (1/N) convention throughout.

#include "wafp/common.hpp"
#include "wafp/functions.hpp"
#include "wafp/problem.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/sampler.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace wafp {

struct MomentSummary {
    Vector mean;
    Vector variance;
    /// Only for 2D samples.
    std::optional<double> mean_radius;
    std::size_t count = 0;
};

inline MomentSummary moments(const RowMatrix& x) {
    if (x.rows() == 0) throw InputError("moments of an empty sample set");
    MomentSummary s;
    s.count = static_cast<std::size_t>(x.rows());
    const double N = static_cast<double>(x.rows());
    s.mean = x.colwise().sum().transpose() / N;
    s.variance = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / N).transpose();
    if (x.cols() == 2) s.mean_radius = x.rowwise().norm().sum() / N;
    return s;
}

/// Moments of the concatenation of two sample sets, from their summaries.
inline MomentSummary pooled(const MomentSummary& a, const MomentSummary& b) {
    if (a.mean.size() != b.mean.size()) throw ShapeError("pooled moments of different dimensions");
    const double na = static_cast<double>(a.count), nb = static_cast<double>(b.count), n = na + nb;
    MomentSummary s;
    s.count = a.count + b.count;
    s.mean = (na * a.mean + nb * b.mean) / n;
    const Vector da = a.mean - s.mean, db = b.mean - s.mean;
    s.variance = (na * (a.variance.array() + da.array().square()) + nb * (b.variance.array() + db.array().square())) / n;
    if (a.mean_radius && b.mean_radius) s.mean_radius = (na * *a.mean_radius + nb * *b.mean_radius) / n;
    return s;
}

struct McEstimate {
    std::string function_id;
    std::vector<std::size_t> sizes;
    std::vector<double> estimates;
    std::vector<double> standard_errors;
};

/// Nested estimates: the estimate at N uses the first N samples.
inline McEstimate mc_integrate_samples(const RowMatrix& x, const std::string& function_id,
                                       std::vector<std::size_t> sizes) {
    if (sizes.empty()) throw ConfigError("mc_integrate needs at least one sample size");
    std::sort(sizes.begin(), sizes.end());
    if (sizes.front() == 0) throw ConfigError("mc_integrate sample sizes must be positive");
    if (sizes.back() > static_cast<std::size_t>(x.rows())) throw ConfigError("mc_integrate size exceeds sample count");
    auto f = make_integrand(function_id, static_cast<std::size_t>(x.cols()));
    McEstimate out{function_id, sizes, {}, {}};
    double sum = 0.0, sum2 = 0.0;
    std::size_t done = 0;
    for (std::size_t N : sizes) {
        for (; done < N; ++done) {
            const double v = f(row_span(x, static_cast<Eigen::Index>(done)));
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / static_cast<double>(N);
        const double var = std::max(0.0, sum2 / static_cast<double>(N) - mean * mean);
        out.estimates.push_back(mean);
        out.standard_errors.push_back(std::sqrt(var) / std::sqrt(static_cast<double>(N)));
    }
    return out;
}

inline McEstimate mc_integrate(const PushforwardMap& map, const FpeProblem& problem, const std::string& function_id,
                               const std::vector<std::size_t>& sizes, std::uint64_t seed, double t = 0.0) {
    if (sizes.empty()) throw ConfigError("mc_integrate needs at least one sample size");
    const std::size_t nmax = *std::max_element(sizes.begin(), sizes.end());
    return mc_integrate_samples(generate_samples(map, problem, nmax, seed, t), function_id, sizes);
}

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> mass;

    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double density(std::size_t i) const { return mass[i] / width(i); }
};

inline Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (!(hi > lo)) throw ConfigError("histogram range is empty");
    if (values.empty()) throw InputError("histogram of an empty sample set");
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double v : values) {
        auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
        b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    h.mass.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) h.mass[i] = static_cast<double>(h.counts[i]) / static_cast<double>(values.size());
    return h;
}

struct RadialAngular {
    Histogram radial;
    Histogram angular;
};

/// Radial bins span [0, r_max] (default: the largest radius); angular bins
/// span [-pi, pi).
inline RadialAngular radial_angular(const RowMatrix& x, std::size_t radial_bins, std::size_t angular_bins,
                                    std::optional<double> r_max = std::nullopt) {
    if (x.cols() != 2) throw ShapeError("radial_angular needs 2D samples");
    std::vector<double> r(static_cast<std::size_t>(x.rows())), th(r.size());
    double rm = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        r[static_cast<std::size_t>(i)] = std::hypot(x(i, 0), x(i, 1));
        th[static_cast<std::size_t>(i)] = std::atan2(x(i, 1), x(i, 0));
        rm = std::max(rm, r[static_cast<std::size_t>(i)]);
    }
    const double hi = r_max.value_or(rm > 0.0 ? rm : 1.0);
    return {histogram(r, radial_bins, 0.0, hi), histogram(th, angular_bins, -std::numbers::pi, std::numbers::pi)};
}

/// Pearson chi-square p-value for the hypothesis that all bins are equally likely.
inline double chi2_uniformity_pvalue(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) throw ConfigError("uniformity test needs at least two bins");
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total <= 0.0) throw InputError("uniformity test on empty counts");
    const double expected = total / static_cast<double>(counts.size());
    double stat = 0.0;
    for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Silverman's rule: 0.9 min(std, IQR/1.34) N^(-1/5).
inline double silverman_bandwidth(std::vector<double> v) {
    if (v.size() < 2) throw InputError("bandwidth rule needs at least two samples");
    const double N = static_cast<double>(v.size());
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= N;
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / N);
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
        const double pos = p * (N - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    const double iqr = q(0.75) - q(0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) spread = 1.0;
    return 0.9 * spread * std::pow(N, -0.2);
}

/// Gaussian-kernel density on `grid`. Kernels are truncated at 9 bandwidths,
/// below double precision relative to the peak.
inline std::vector<double> kde_1d(std::vector<double> samples, const std::vector<double>& grid,
                                  std::optional<double> bandwidth = std::nullopt) {
    if (samples.empty()) throw InputError("kde of an empty sample set");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    if (!(h > 0.0)) throw ConfigError("kde bandwidth must be positive");
    std::sort(samples.begin(), samples.end());
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        auto lo = std::lower_bound(samples.begin(), samples.end(), grid[g] - 9.0 * h);
        auto hi = std::upper_bound(samples.begin(), samples.end(), grid[g] + 9.0 * h);
        double acc = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double z = (grid[g] - *it) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out[g] = acc * norm;
    }
    return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t points) {
    if (points < 2) throw ConfigError("linspace needs at least two points");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

/// Indices of interior local maxima whose height exceeds `min_fraction` of
/// the global maximum. A plateau reports its first index.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& curve, double min_fraction = 0.05) {
    std::vector<std::size_t> out;
    if (curve.size() < 3) return out;
    const double top = *std::max_element(curve.begin(), curve.end());
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        if (curve[i] < min_fraction * top) continue;
        // Plateaus count once: strictly above the left neighbour, at least the right one,
        // and the plateau must eventually descend.
        if (curve[i] > curve[i - 1] && curve[i] >= curve[i + 1]) {
            std::size_t j = i;
            while (j + 1 < curve.size() && curve[j + 1] == curve[i]) ++j;
            if (j + 1 < curve.size() && curve[j + 1] < curve[i]) out.push_back(i);
        }
    }
    return out;
}

inline std::size_t count_local_maxima(const std::vector<double>& curve, double min_fraction = 0.05) {
    return local_maxima(curve, min_fraction).size();
}

struct ErrorTable {
    std::vector<double> times;
    /// Row per dimension, column per time.
    RowMatrix mean_abs_error;
    RowMatrix variance_abs_error;

    double average_mean_error() const { return mean_abs_error.mean(); }
    double average_variance_error() const { return variance_abs_error.mean(); }
};

/// Per-dimension errors of sample moments against the Gaussian reference
/// moments; `samples[j]` holds the draws at `times[j]`.
inline ErrorTable error_table(const std::vector<RowMatrix>& samples, const std::vector<double>& times,
                              const AnalyticalReference& ref) {
    if (ref.kind != ReferenceKind::GaussianMoments) throw ContractError("error_table needs Gaussian reference moments");
    if (samples.size() != times.size()) throw ShapeError("one sample set per time is required");
    if (samples.empty()) throw InputError("error_table with no times");
    const auto n = samples.front().cols();
    ErrorTable e;
    e.times = times;
    e.mean_abs_error.resize(n, static_cast<Eigen::Index>(times.size()));
    e.variance_abs_error.resize(n, static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (samples[j].cols() != n || n != ref.mu0.size()) throw ShapeError("sample width differs from reference dimension");
        const auto m = moments(samples[j]);
        const auto r = eval_reference_moments(ref, times[j]);
        const auto col = static_cast<Eigen::Index>(j);
        e.mean_abs_error.col(col) = (m.mean - r.mean).cwiseAbs();
        e.variance_abs_error.col(col) = (m.variance.array() - r.variance).abs().matrix();
    }
    return e;
}

}  // namespace wafp
