#include "support.hpp"
#include "wafp/problems.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/testfn.hpp"
#include "wafp/trainer.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <numbers>
#include <random>
#include <sstream>

namespace wafp {
namespace {

using testing::rel_err;

PlaneWave wave(std::vector<double> w, double kappa, double b0) {
    return {Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), kappa, b0};
}

Vector vec(const std::vector<double>& x) { return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())); }

std::vector<double> random_point(std::size_t n, Engine& e, double spread) {
    std::normal_distribution<double> nd(0.0, spread);
    std::vector<double> x(n);
    for (auto& v : x) v = nd(e);
    return x;
}

PlaneWave random_wave(std::size_t n, Engine& e, bool with_kappa) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);
    PlaneWave p;
    p.w = Vector::NullaryExpr(static_cast<Eigen::Index>(n), [&] { return nd(e); });
    p.kappa = with_kappa ? nd(e) : 0.0;
    p.b0 = ud(e);
    return p;
}

// -1/2 sum a_ij d_ij f - sum b_i d_i f with all derivatives of f by central differences.
double fd_lf(const PlaneWave& p, double t, std::vector<double> x, const FpeProblem& prob, double h) {
    const std::size_t n = prob.dim;
    auto f = [&](const std::vector<double>& y) { return eval_f(p, t, y); };
    const RowMatrix A = prob.diffusion_matrix(t, vec(x));
    std::vector<double> b(n);
    prob.drift(t, x, b);
    double acc = 0.0;
    const double f0 = f(x);
    for (std::size_t i = 0; i < n; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        acc -= b[i] * (f(xp) - f(xm)) / (2 * h);
        acc -= 0.5 * A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * (f(xp) - 2 * f0 + f(xm)) / (h * h);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double a = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (a == 0.0) continue;
            auto pp = x, pm = x, mp = x, mm = x;
            pp[i] += h, pp[j] += h;
            pm[i] += h, pm[j] -= h;
            mp[i] -= h, mp[j] += h;
            mm[i] -= h, mm[j] -= h;
            acc -= 0.5 * a * (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
        }
    }
    return acc;
}

TEST(EvalF, ConstantWaveIsOne) {
    auto p = wave({0.0, 0.0}, 0.0, std::numbers::pi / 2);
    EXPECT_DOUBLE_EQ(eval_f(p, 0.3, std::vector<double>{4.0, -9.0}), 1.0);
    EXPECT_DOUBLE_EQ(eval_f(p, 7.0, std::vector<double>{0.0, 1.0}), 1.0);
}

TEST(EvalF, HandValues) {
    EXPECT_DOUBLE_EQ(eval_f(wave({1.0}, 0.0, 0.0), 0.0, std::vector<double>{std::numbers::pi / 2}), 1.0);
    EXPECT_NEAR(eval_f(wave({1.0, 2.0}, 0.7, 0.3), 1.0, std::vector<double>{0.1, -0.2}), std::sin(0.7), 1e-15);
}

TEST(EvalF, DimensionMismatchIsShapeError) {
    EXPECT_THROW(eval_f(wave({1.0, 2.0}, 0.0, 0.0), 0.0, std::vector<double>{1.0}), ShapeError);
}

TEST(EvalLf, ZeroFrequencyGivesZero) {
    for (const auto& id : {"ou1d", "dwell1d", "ring2d", "dpeak2d"}) {
        auto prob = make_problem(id);
        std::vector<double> x(prob.dim, 0.37);
        PlaneWave p;
        p.w = Vector::Zero(static_cast<Eigen::Index>(prob.dim));
        p.b0 = 1.1;
        EXPECT_EQ(eval_lf(p, 0.0, x, prob), 0.0) << id;
    }
}

TEST(EvalLf, OuHandValue) {
    auto prob = make_ou_1d();
    EXPECT_NEAR(eval_lf(wave({1.0}, 0.0, 0.0), 0.0, std::vector<double>{2.0}, prob), std::sin(2.0), 1e-15);
    EXPECT_NEAR(std::sin(2.0), 0.90930, 1e-5);
}

TEST(EvalLf, MatchesFiniteDifferenceContractionOnAllProblems) {
    Engine e(77);
    for (const auto& id : {"ou1d", "dwell1d", "dpeak2d", "ring2d", "outime1d", "outime10d"}) {
        auto prob = make_problem(id);
        for (int k = 0; k < 200; ++k) {
            auto x = random_point(prob.dim, e, 1.2);
            auto p = random_wave(prob.dim, e, false);
            const double lf = eval_lf(p, 0.5, x, prob);
            // Step fixed in the phase variable u = w.x so truncation and roundoff stay balanced.
            const double fd = fd_lf(p, 0.5, x, prob, 3e-4 / p.w.cwiseAbs().maxCoeff());
            // Relative to the magnitude bound |b.w| + |w^T A w| / 2.
            std::vector<double> b(prob.dim);
            prob.drift(0.5, x, b);
            const double bw = std::abs(Eigen::Map<const Vector>(b.data(), p.w.size()).dot(p.w));
            const double scale = bw + 0.5 * p.w.dot(prob.diffusion_matrix(0.5, vec(x)) * p.w);
            EXPECT_LT(std::abs(lf - fd) / scale, 1e-6) << id << " probe " << k;
        }
    }
}

TEST(EvalLf, BoundedByDriftAndDiffusionTerms) {
    Engine e(5);
    for (const auto& id : {"dwell1d", "ring2d", "dpeak2d"}) {
        auto prob = make_problem(id);
        for (int k = 0; k < 100; ++k) {
            auto x = random_point(prob.dim, e, 2.0);
            auto p = random_wave(prob.dim, e, false);
            std::vector<double> b(prob.dim);
            prob.drift(0.0, x, b);
            const double bw = std::abs(Eigen::Map<const Vector>(b.data(), p.w.size()).dot(p.w));
            const double bound = bw + 0.5 * std::abs(p.w.dot(prob.diffusion_matrix(0.0, vec(x)) * p.w));
            EXPECT_LE(std::abs(eval_lf(p, 0.0, x, prob)), bound * (1 + 1e-12));
            EXPECT_LE(std::abs(eval_f(p, 0.0, x)), 1.0);
        }
    }
}

TEST(EvalLf, TimeIntegrandIsKappaCosMinusLf) {
    auto prob = make_problem("outime1d");
    auto p = wave({0.8}, 1.3, 0.2);
    std::vector<double> x{0.4};
    const double u = 0.8 * 0.4 + 1.3 * 0.6 + 0.2;
    EXPECT_NEAR(eval_time_integrand(p, 0.6, x, prob) + eval_lf(p, 0.6, x, prob), 1.3 * std::cos(u), 1e-15);
}

// Quadrature oracle: under the exact OU law N(m(t), v(t)) the time weak form
// E f(T) - E f(0) - int_0^T E[integrand] dt vanishes for every wave.
TEST(EvalLf, TimeWeakFormVanishesOnExactOuLaw) {
    auto prob = make_problem("outime1d");
    auto simpson = [](const std::function<double(double)>& g, double lo, double hi, int panels) {
        const double h = (hi - lo) / panels;
        double acc = g(lo) + g(hi);
        for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(lo + i * h);
        return acc * h / 3.0;
    };
    auto expect = [&](double t, const std::function<double(double)>& g) {
        const auto m = eval_reference_moments(prob.reference, t);
        const double mu = m.mean[0], sd = std::sqrt(m.variance);
        return simpson(
            [&](double x) {
                const double z = (x - mu) / sd;
                return g(x) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
            },
            mu - 12.0 * sd, mu + 12.0 * sd, 800);
    };
    Engine e(31);
    for (int k = 0; k < 5; ++k) {
        auto p = random_wave(1, e, true);
        const double eT = expect(1.0, [&](double x) { return eval_f(p, 1.0, std::vector<double>{x}); });
        const double e0 = expect(0.0, [&](double x) { return eval_f(p, 0.0, std::vector<double>{x}); });
        const double interior = simpson(
            [&](double t) {
                return expect(t, [&](double x) { return eval_time_integrand(p, t, std::vector<double>{x}, prob); });
            },
            0.0, 1.0, 400);
        EXPECT_NEAR(eT - e0 - interior, 0.0, 1e-8) << "wave " << k;
    }
}

TEST(EvalLf, NonFiniteDriftIsNumericErrorNamingCoordinates) {
    auto prob = make_ou_1d();
    prob.drift = [](double, std::span<const double>, std::span<double> out) {
        out[0] = std::numeric_limits<double>::infinity();
    };
    try {
        eval_lf(wave({1.0}, 0.0, 0.0), 0.0, std::vector<double>{1.25}, prob);
        FAIL() << "expected NumericError";
    } catch (const NumericError& err) {
        EXPECT_NE(std::string(err.what()).find("1.25"), std::string::npos);
    }
}

TEST(GradXLf, ZeroFrequencyGivesZeroVector) {
    auto prob = make_ring_2d();
    PlaneWave p;
    p.w = Vector::Zero(2);
    p.b0 = 0.4;
    EXPECT_EQ(grad_x_lf(p, 0.0, std::vector<double>{0.3, -1.0}, prob).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradXLf, MatchesFiniteDifferencesOfEvalLf) {
    Engine e(12);
    for (const auto& id : {"ou1d", "dwell1d", "dpeak2d", "ring2d", "outime1d", "outime10d"}) {
        auto prob = make_problem(id);
        const bool timed = prob.time_dependent;
        for (int k = 0; k < 50; ++k) {
            auto x = random_point(prob.dim, e, 1.2);
            auto p = random_wave(prob.dim, e, timed);
            Vector xv = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
            auto g = grad_x_lf(p, 0.4, x, prob, timed);
            auto fn = [&](const Vector& y) {
                std::vector<double> yy(y.data(), y.data() + y.size());
                return timed ? eval_time_integrand(p, 0.4, yy, prob) : eval_lf(p, 0.4, yy, prob);
            };
            Vector fd = testing::fd_gradient(fn, xv, 1e-5);
            const double tol = std::string(id) == "dpeak2d" ? 1e-5 : 1e-6;
            EXPECT_LT(rel_err(g, fd, 1e-3), tol) << id << " probe " << k;
        }
    }
}

TEST(GradXLf, VariableDiffusionUsesSpatialDerivative) {
    // A(x) = 1 + x^2 in 1D exercises the dA/dx term.
    auto prob = make_ou_1d();
    prob.diffusion.constant = false;
    prob.diffusion.value = [](double, std::span<const double> x, std::span<double> out) { out[0] = 1.0 + x[0] * x[0]; };
    prob.diffusion.spatial_derivative = [](double, std::span<const double> x, std::size_t, std::span<double> out) {
        out[0] = 2.0 * x[0];
    };
    auto p = wave({1.3}, 0.0, 0.6);
    for (double x0 : {-1.5, -0.2, 0.7, 2.4}) {
        auto g = grad_x_lf(p, 0.0, std::vector<double>{x0}, prob);
        auto fn = [&](const Vector& y) { return eval_lf(p, 0.0, std::vector<double>{y[0]}, prob); };
        Vector fd = testing::fd_gradient(fn, Vector::Constant(1, x0), 1e-5);
        EXPECT_LT(rel_err(g, fd, 1e-3), 1e-6);
    }
}

TEST(InitBank, PhasesInRangeAndDeterministic) {
    auto bank = init_bank(100, 1, 42);
    EXPECT_GE(bank.b0().minCoeff(), 0.0);
    EXPECT_LT(bank.b0().maxCoeff(), 2.0 * std::numbers::pi);
    EXPECT_EQ(bank.kappa().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(init_bank(100, 1, 42) == bank);
}

TEST(InitBank, FrequencyMeanWithinCltBound) {
    auto bank = init_bank(10000, 1, 3);
    EXPECT_LT(std::abs(bank.w().mean()), 4.0 / std::sqrt(10000.0));
}

TEST(InitBank, TimeDependentBankDrawsKappa) {
    auto bank = init_bank(50, 2, 3, 1.0, true);
    EXPECT_GT(bank.kappa().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(init_bank(0, 1, 0), ConfigError);
}

TEST(Bank, FlatRoundTripAndCsvRoundTripAreExact) {
    auto bank = init_bank(7, 3, 9, 0.7, true);
    PlaneWaveBank copy = init_bank(7, 3, 10, 1.0, true);
    copy.set_flat(bank.flat());
    EXPECT_TRUE(copy == bank);
    std::stringstream ss;
    write_bank_csv(ss, bank);
    EXPECT_TRUE(read_bank_csv(ss) == bank);
    EXPECT_THROW(copy.set_flat(Vector::Zero(3)), ShapeError);
}

TEST(Bank, CsvReaderRejectsMalformedInput) {
    std::stringstream noheader("1,2,3\n");
    EXPECT_THROW(read_bank_csv(noheader), IoError);
    std::stringstream bad("k,b0,kappa,w_1\n0,1,zero,3\n");
    EXPECT_THROW(read_bank_csv(bad), IoError);
    std::stringstream narrow("k,b0,kappa,w_1\n0,1,2\n");
    EXPECT_THROW(read_bank_csv(narrow), IoError);
}

// Steady-loss gradient with respect to the bank, through the batched evaluator.
Vector adversary_grad(const PushforwardMap& map, const PlaneWaveBank& bank, const FpeProblem& prob, const RowMatrix& r) {
    auto ev = steady_loss(map, bank, prob, r);
    return loss_gradients(map, bank, ev, false, true).adversary;
}

PushforwardMap steady_map(std::size_t n, std::size_t d, std::vector<std::size_t> hidden, std::uint64_t seed) {
    std::vector<std::size_t> sizes{d};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(n);
    PushforwardMap m;
    m.variant = MapVariant::Steady;
    m.net = init_net(mlp_specs(sizes, Activation::Tanh), seed, InitScheme::XavierUniform, 2.0);
    m.base = {BaseKind::StandardNormal, d};
    m.n = n;
    return m;
}

TEST(AdversaryGrads, ZeroResidualsGiveZeroGradients) {
    auto prob = make_ou_1d();
    auto map = steady_map(1, 1, {4}, 1);
    RowMatrix w = RowMatrix::Zero(3, 1);
    PlaneWaveBank bank(w, Vector::Zero(3), Vector::Constant(3, 0.9));
    Engine e(1);
    auto g = adversary_grad(map, bank, prob, sample_base(map.base, 20, e));
    EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(AdversaryGrads, SingleWaveSingleSampleMatchesFiniteDifferences) {
    auto prob = make_ou_1d();
    auto map = steady_map(1, 1, {4}, 2);
    PlaneWaveBank bank(RowMatrix::Constant(1, 1, 0.8), Vector::Zero(1), Vector::Constant(1, 0.4));
    RowMatrix r = RowMatrix::Constant(1, 1, 0.3);
    Vector g = adversary_grad(map, bank, prob, r);
    auto loss = [&](const Vector& p) {
        PlaneWaveBank b = bank;
        b.set_flat(p);
        return steady_loss(map, b, prob, r).loss;
    };
    Vector fd = testing::fd_gradient(loss, bank.flat(), 1e-6);
    // Layout (w, kappa, b0); kappa does not enter a steady loss.
    EXPECT_LT(rel_err(g[0], fd[0]), 1e-5);
    EXPECT_LT(rel_err(g[2], fd[2]), 1e-5);
    EXPECT_EQ(g[1], 0.0);
}

TEST(AdversaryGrads, MatchFiniteDifferencesOnAllSteadyProblems) {
    for (const auto& id : {"ou1d", "dwell1d", "dpeak2d", "ring2d"}) {
        auto prob = make_problem(id);
        auto map = steady_map(prob.dim, 3, {6}, 5);
        auto bank = init_bank(4, prob.dim, 6);
        Engine e(7);
        RowMatrix r = sample_base(map.base, 40, e);
        Vector g = adversary_grad(map, bank, prob, r);
        auto loss = [&](const Vector& p) {
            PlaneWaveBank b = bank;
            b.set_flat(p);
            return steady_loss(map, b, prob, r).loss;
        };
        Vector fd = testing::fd_gradient(loss, bank.flat(), 1e-6);
        EXPECT_LT(rel_err(g, fd), 1e-5) << id;
    }
}

TEST(AdversaryGrads, ConstantWaveTimeResidualCancels) {
    auto prob = make_problem("outime1d");
    PushforwardMap map;
    map.variant = MapVariant::GaussianIcLinearTime;
    map.net = init_net(mlp_specs({3, 5, 1}, Activation::Tanh), 3);
    map.base = {BaseKind::StandardNormal, 2};
    map.n = 1;
    map.mu0 = Vector::Constant(1, 3.0);
    map.sigma0 = 0.5;
    PlaneWaveBank bank(RowMatrix::Zero(1, 1), Vector::Zero(1), Vector::Constant(1, 0.77));
    TrainConfig cfg;
    auto batch = draw_time_batch(map, prob, cfg, 1, 1, 30, 20, 25);
    auto ev = time_loss(map, bank, prob, batch);
    EXPECT_EQ(ev.residuals[0], 0.0);
    auto g = loss_gradients(map, bank, ev, false, true).adversary;
    EXPECT_EQ(g[2], 0.0);
}

}  // namespace
}  // namespace wafp
