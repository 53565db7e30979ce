#include "wafp/metrics.hpp"
#include "wafp/oracle.hpp"
#include "wafp/problems.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace wafp {
namespace {

RowMatrix normal_samples(std::size_t n, std::size_t d, double mean, double sd, std::uint64_t seed) {
    Engine e(seed);
    std::normal_distribution<double> nd(mean, sd);
    RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(e);
    return x;
}

RowMatrix circle(std::size_t n, double r, std::uint64_t seed) {
    Engine e(seed);
    std::uniform_real_distribution<double> ud(-std::numbers::pi, std::numbers::pi);
    RowMatrix x(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double th = ud(e);
        x(i, 0) = r * std::cos(th);
        x(i, 1) = r * std::sin(th);
    }
    return x;
}

PushforwardMap constant_map(double c) {
    PushforwardMap m;
    m.net = FeedforwardNet({{1, 1, Activation::Identity}});
    m.net.bias(0)[0] = c;
    m.base = {BaseKind::UniformUnit, 1};
    return m;
}

TEST(Moments, PopulationVarianceConvention) {
    RowMatrix x(3, 1);
    x << 1, 2, 3;
    auto m = moments(x);
    EXPECT_DOUBLE_EQ(m.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(m.variance[0], 2.0 / 3.0);
    EXPECT_EQ(m.count, 3u);
    EXPECT_FALSE(m.mean_radius);
}

TEST(Moments, MeanRadiusOnCircle) {
    auto m = moments(circle(1000, 2.0, 1));
    ASSERT_TRUE(m.mean_radius);
    EXPECT_NEAR(*m.mean_radius, 2.0, 1e-14);
}

TEST(Moments, LargeSampleWithinCltBands) {
    auto m = moments(normal_samples(1000000, 1, 2.0, 1.0, 3));
    EXPECT_NEAR(m.mean[0], 2.0, 0.004);
    EXPECT_NEAR(m.variance[0], 1.0, 0.006);
}

TEST(Moments, PooledEqualsConcatenated) {
    auto a = normal_samples(300, 2, 1.0, 2.0, 4), b = normal_samples(700, 2, -3.0, 0.5, 5);
    RowMatrix ab(1000, 2);
    ab << a, b;
    auto direct = moments(ab);
    auto pool = pooled(moments(a), moments(b));
    EXPECT_LT((direct.mean - pool.mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((direct.variance - pool.variance).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(*direct.mean_radius, *pool.mean_radius, 1e-12);
    EXPECT_THROW(moments(RowMatrix(0, 2)), InputError);
}

TEST(McIntegrate, ConstantFunctionIsExactlyOne) {
    auto prob = make_ou_1d();
    auto est = mc_integrate(constant_map(0.3), prob, "one", {10, 100, 1000}, 1);
    for (double v : est.estimates) EXPECT_EQ(v, 1.0);
    for (double s : est.standard_errors) EXPECT_EQ(s, 0.0);
}

TEST(McIntegrate, ConstantMapGivesConstantEstimate) {
    auto prob = make_ou_1d();
    auto est = mc_integrate(constant_map(1.75), prob, "x", {1, 64, 4096}, 2);
    for (double v : est.estimates) EXPECT_EQ(v, 1.75);
}

TEST(McIntegrate, NestedPrefixesAndReproducible) {
    RowMatrix x = normal_samples(4000, 2, 0.0, 1.0, 6);
    auto est = mc_integrate_samples(x, "f1", {4000, 1000});
    EXPECT_EQ(est.sizes, (std::vector<std::size_t>{1000, 4000}));
    auto prefix = mc_integrate_samples(x.topRows(1000), "f1", {1000});
    EXPECT_EQ(est.estimates[0], prefix.estimates[0]);
    const double ratio = est.standard_errors[1] / est.standard_errors[0];
    EXPECT_GT(ratio, 0.4);
    EXPECT_LT(ratio, 0.6);
    auto again = mc_integrate_samples(x, "f1", {1000, 4000});
    EXPECT_EQ(again.estimates, est.estimates);
    EXPECT_THROW(mc_integrate_samples(x, "f1", {5000}), ConfigError);
    EXPECT_THROW(mc_integrate_samples(x, "nope", {10}), ConfigError);
}

TEST(McIntegrate, StandardErrorIsStdOverRootN) {
    RowMatrix x(4, 1);
    x << 1, 3, 1, 3;
    auto est = mc_integrate_samples(x, "x", {4});
    EXPECT_DOUBLE_EQ(est.estimates[0], 2.0);
    EXPECT_DOUBLE_EQ(est.standard_errors[0], 0.5);
}

TEST(RadialAngular, CircleConcentratesInOneRadialBinAndIsUniformInAngle) {
    const std::size_t N = 36000, bins = 36;
    auto ra = radial_angular(circle(N, 2.0, 7), 21, bins, 4.0);
    // Radius 2 on [0, 4] with 21 bins lands in bin 10, away from its edges.
    EXPECT_DOUBLE_EQ(ra.radial.mass[10], 1.0);
    const double p = 1.0 / double(bins);
    const double sd = std::sqrt(p * (1 - p) / double(N));
    for (double m : ra.angular.mass) EXPECT_LT(std::abs(m - p), 4.0 * sd);
}

TEST(RadialAngular, OriginFillsFirstBin) {
    auto ra = radial_angular(RowMatrix::Zero(10, 2), 5, 8, 1.0);
    EXPECT_DOUBLE_EQ(ra.radial.mass[0], 1.0);
}

TEST(RadialAngular, HistogramMassSumsToOne) {
    auto x = normal_samples(5000, 2, 0.3, 1.7, 8);
    for (std::size_t bins : {1, 7, 36, 100}) {
        auto ra = radial_angular(x, bins, bins);
        double r = 0, a = 0;
        for (double m : ra.radial.mass) r += m;
        for (double m : ra.angular.mass) a += m;
        EXPECT_NEAR(r, 1.0, 1e-12);
        EXPECT_NEAR(a, 1.0, 1e-12);
    }
    EXPECT_THROW(radial_angular(RowMatrix::Zero(3, 3), 5, 5), ShapeError);
}

TEST(RadialAngular, EmRingSamplesPassUniformityTest) {
    auto p = make_ring_2d();
    Engine e(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    RowMatrix x0(3600, 2);
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0.data()[i] = nd(e);
    auto out = euler_maruyama(p, x0, {1e-3, 3000, 3600, 4});
    auto ra = radial_angular(out.endpoints, 30, 36);
    EXPECT_GT(chi2_uniformity_pvalue(ra.angular.counts), 0.001);
}

TEST(ChiSquare, PerfectlyUniformAndSkewedCounts) {
    EXPECT_NEAR(chi2_uniformity_pvalue(std::vector<std::size_t>(36, 100)), 1.0, 1e-12);
    std::vector<std::size_t> skew(36, 100);
    skew[0] = 400;
    EXPECT_LT(chi2_uniformity_pvalue(skew), 1e-10);
}

TEST(Kde, SingleSampleUnitBandwidthIsStandardNormal) {
    auto grid = linspace(-4, 4, 81);
    auto k = kde_1d({0.0}, grid, 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        EXPECT_NEAR(k[i], std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2 * std::numbers::pi), 1e-15);
}

TEST(Kde, LargeSampleSupNormError) {
    auto x = normal_samples(1000000, 1, 2.0, 1.0, 9);
    std::vector<double> v(x.data(), x.data() + x.size());
    auto grid = linspace(-3, 7, 201);
    auto k = kde_1d(v, grid);
    double sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        sup = std::max(sup, std::abs(k[i] - std::exp(-0.5 * (grid[i] - 2) * (grid[i] - 2)) / std::sqrt(2 * std::numbers::pi)));
    EXPECT_LT(sup, 0.02);
}

TEST(Kde, CurveIntegratesToOne) {
    auto x = normal_samples(5000, 1, 0.0, 1.0, 10);
    std::vector<double> v(x.data(), x.data() + x.size());
    auto grid = linspace(-8, 8, 801);
    auto k = kde_1d(v, grid);
    auto w = simpson_weights(grid.size(), grid.front(), grid.back());
    double total = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) total += w[i] * k[i];
    EXPECT_NEAR(total, 1.0, 1e-3);
}

TEST(Kde, BimodalSampleHasTwoMaxima) {
    RowMatrix a = normal_samples(5000, 1, -1.0, 0.25, 11), b = normal_samples(5000, 1, 1.0, 0.25, 12);
    std::vector<double> v(a.data(), a.data() + a.size());
    v.insert(v.end(), b.data(), b.data() + b.size());
    auto k = kde_1d(v, linspace(-3, 3, 601));
    EXPECT_EQ(count_local_maxima(k), 2u);
    EXPECT_EQ(count_local_maxima({0.0, 1.0, 1.0, 0.5}), 1u);
    EXPECT_EQ(count_local_maxima({0.0, 1.0, 2.0}), 0u);
}

TEST(ErrorTable, ExactReferenceSamplesWithinSamplingBands) {
    auto p = make_problem("outime10d");
    std::vector<RowMatrix> samples;
    std::vector<double> times{0.0, 0.5, 1.0};
    const std::size_t N = 20000;
    for (double t : times) {
        auto r = eval_reference_moments(p.reference, t);
        RowMatrix x = normal_samples(N, 10, 0.0, std::sqrt(r.variance), 13 + std::uint64_t(t * 10));
        x.rowwise() += r.mean.transpose();
        samples.push_back(x);
    }
    auto e = error_table(samples, times, p.reference);
    EXPECT_EQ(e.mean_abs_error.rows(), 10);
    EXPECT_EQ(e.mean_abs_error.cols(), 3);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double v = eval_reference_moments(p.reference, times[j]).variance;
        EXPECT_LT(e.mean_abs_error.col(Eigen::Index(j)).maxCoeff(), 4.0 * std::sqrt(v / double(N)));
        EXPECT_LT(e.variance_abs_error.col(Eigen::Index(j)).maxCoeff(), 4.0 * v * std::sqrt(2.0 / double(N)));
    }
}

TEST(ErrorTable, ConstantSamplesGiveExactMeanError) {
    auto p = make_problem("outime1d");
    const double c = 0.75;
    auto e = error_table({RowMatrix::Constant(50, 1, c)}, {1.0}, p.reference);
    EXPECT_NEAR(e.mean_abs_error(0, 0), std::abs(c - 3.0 * std::exp(-1.0)), 1e-15);
    EXPECT_THROW(error_table({RowMatrix::Zero(3, 1)}, {0.0, 1.0}, p.reference), ShapeError);
    EXPECT_THROW(error_table({RowMatrix::Zero(3, 1)}, {0.0}, make_ring_2d().reference), ContractError);
}

}  // namespace
}  // namespace wafp
