#pragma once

// Plane-wave test functions f(t, x) = sin(w.x + kappa t + b0) and their
// closed-form derivatives under the adjoint Fokker-Planck operator.

#include "wafp/common.hpp"
#include "wafp/problem.hpp"
#include "wafp/rng.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace wafp {

struct PlaneWave {
    Vector w;
    double kappa = 0.0;
    double b0 = 0.0;

    double phase(double t, std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(w.size()))
            throw ShapeError("plane wave of dimension " + std::to_string(w.size()) + " evaluated at a point of dimension " +
                             std::to_string(x.size()));
        double u = kappa * t + b0;
        for (std::size_t i = 0; i < x.size(); ++i) u += w[static_cast<Eigen::Index>(i)] * x[i];
        return u;
    }
};

/// K waves sharing dimension n. Flat parameter layout: w (K x n, row-major),
/// then kappa (K), then b0 (K).
class PlaneWaveBank {
public:
    PlaneWaveBank() = default;
    PlaneWaveBank(RowMatrix w, Vector kappa, Vector b0) : w_(std::move(w)), kappa_(std::move(kappa)), b0_(std::move(b0)) {
        if (w_.rows() < 1) throw ConfigError("test-function bank needs K >= 1");
        if (kappa_.size() != w_.rows() || b0_.size() != w_.rows())
            throw ShapeError("bank kappa/b0 lengths must equal K");
    }

    std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(w_.cols()); }
    const RowMatrix& w() const { return w_; }
    const Vector& kappa() const { return kappa_; }
    const Vector& b0() const { return b0_; }

    PlaneWave wave(std::size_t k) const {
        const auto kk = static_cast<Eigen::Index>(k);
        return {w_.row(kk).transpose(), kappa_[kk], b0_[kk]};
    }

    std::size_t parameter_count() const { return size() * (dim() + 2); }

    Vector flat() const {
        Vector p(static_cast<Eigen::Index>(parameter_count()));
        const auto kn = w_.size();
        p.head(kn) = Eigen::Map<const Vector>(w_.data(), kn);
        p.segment(kn, w_.rows()) = kappa_;
        p.tail(w_.rows()) = b0_;
        return p;
    }

    void set_flat(const Vector& p) {
        if (static_cast<std::size_t>(p.size()) != parameter_count())
            throw ShapeError("bank parameter vector has the wrong length");
        if (!p.allFinite()) throw NumericError("non-finite test-function parameter");
        const auto kn = w_.size();
        Eigen::Map<Vector>(w_.data(), kn) = p.head(kn);
        kappa_ = p.segment(kn, w_.rows());
        b0_ = p.tail(w_.rows());
    }

    friend bool operator==(const PlaneWaveBank& a, const PlaneWaveBank& b) {
        return a.w_.rows() == b.w_.rows() && a.w_.cols() == b.w_.cols() && (a.w_.array() == b.w_.array()).all() &&
               (a.kappa_.array() == b.kappa_.array()).all() && (a.b0_.array() == b.b0_.array()).all();
    }

private:
    RowMatrix w_;
    Vector kappa_;
    Vector b0_;
};

/// w ~ N(0, w_scale^2 I), b0 ~ U(0, 2 pi), kappa ~ N(0, w_scale^2) for
/// time-dependent banks and 0 otherwise.
inline PlaneWaveBank init_bank(std::size_t K, std::size_t n, std::uint64_t seed, double w_scale = 1.0,
                               bool time_dependent = false) {
    if (K < 1) throw ConfigError("test-function bank needs K >= 1");
    Engine eng = make_engine(seed, "init_bank");
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);
    RowMatrix w(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
    Vector kappa = Vector::Zero(static_cast<Eigen::Index>(K));
    Vector b0(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
        for (Eigen::Index i = 0; i < w.cols(); ++i) w(k, i) = w_scale * nd(eng);
        b0[k] = ud(eng);
        if (time_dependent) kappa[k] = w_scale * nd(eng);
    }
    return {std::move(w), std::move(kappa), std::move(b0)};
}

namespace detail {

inline void check_numeric(double v, const char* what, std::span<const double> x) {
    if (std::isfinite(v)) return;
    std::ostringstream os;
    os << what << " is non-finite at x = (";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    throw NumericError(os.str());
}

struct PointTerms {
    double u, s, c, bw, q;
};

inline PointTerms point_terms(const PlaneWave& wave, double t, std::span<const double> x, const FpeProblem& problem) {
    if (x.size() != problem.dim) throw ShapeError("point dimension does not match problem dimension");
    const std::size_t n = problem.dim;
    PointTerms r{};
    r.u = wave.phase(t, x);
    r.s = std::sin(r.u);
    r.c = std::cos(r.u);
    std::vector<double> b(n);
    problem.drift(t, x, b);
    std::vector<double> coef(diffusion_coef_count(problem.diffusion.structure, n));
    problem.diffusion.value(t, x, coef);
    std::span<const double> w{wave.w.data(), n};
    r.bw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        check_numeric(b[i], "drift", x);
        r.bw += b[i] * w[i];
    }
    r.q = diffusion_quad(problem.diffusion.structure, coef, w);
    check_numeric(r.q, "diffusion", x);
    return r;
}

}  // namespace detail

inline double eval_f(const PlaneWave& wave, double t, std::span<const double> x) { return std::sin(wave.phase(t, x)); }

/// Lf = -(b.w) cos u + 1/2 (w^T A w) sin u.
inline double eval_lf(const PlaneWave& wave, double t, std::span<const double> x, const FpeProblem& problem) {
    const auto p = detail::point_terms(wave, t, x, problem);
    return -p.bw * p.c + 0.5 * p.q * p.s;
}

/// df/dt - Lf, the interior integrand of the time-dependent weak form.
/// Lf is minus the generator, so this is df/dt plus the generator of the SDE.
inline double eval_time_integrand(const PlaneWave& wave, double t, std::span<const double> x, const FpeProblem& problem) {
    const auto p = detail::point_terms(wave, t, x, problem);
    return wave.kappa * p.c + p.bw * p.c - 0.5 * p.q * p.s;
}

/// Spatial gradient of Lf, or of eval_time_integrand when `with_time_derivative`.
inline Vector grad_x_lf(const PlaneWave& wave, double t, std::span<const double> x, const FpeProblem& problem,
                        bool with_time_derivative = false) {
    const auto p = detail::point_terms(wave, t, x, problem);
    const std::size_t n = problem.dim;
    std::vector<double> jac(n * n);
    problem.drift_jacobian(t, x, jac);
    const std::size_t nc = diffusion_coef_count(problem.diffusion.structure, n);
    std::vector<double> dcoef(nc);
    std::span<const double> w{wave.w.data(), n};
    const double gu = p.bw * p.s + 0.5 * p.q * p.c + (with_time_derivative ? wave.kappa * p.s : 0.0);
    Vector g(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        double jtw = 0.0;
        for (std::size_t i = 0; i < n; ++i) jtw += jac[i * n + j] * w[i];
        double dq = 0.0;
        if (!problem.diffusion.constant) {
            problem.diffusion.spatial_derivative(t, x, j, dcoef);
            dq = diffusion_quad(problem.diffusion.structure, dcoef, w);
        }
        const double v = (with_time_derivative ? -1.0 : 1.0) * (gu * w[j] - jtw * p.c + 0.5 * dq * p.s);
        detail::check_numeric(v, "grad_x Lf", x);
        g[static_cast<Eigen::Index>(j)] = v;
    }
    return g;
}

// Bank CSV: header "k,b0,kappa,w_1,...,w_n", values at 17 significant digits.
inline void write_bank_csv(std::ostream& os, const PlaneWaveBank& bank) {
    os << "k,b0,kappa";
    for (std::size_t i = 0; i < bank.dim(); ++i) os << ",w_" << (i + 1);
    os << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < bank.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        os << k << ',' << bank.b0()[kk] << ',' << bank.kappa()[kk];
        for (Eigen::Index i = 0; i < bank.w().cols(); ++i) os << ',' << bank.w()(kk, i);
        os << '\n';
    }
}

inline PlaneWaveBank read_bank_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("k,b0,kappa", 0) != 0) throw IoError("bank CSV header missing");
    std::size_t n = 0;
    for (char ch : line)
        if (ch == ',') ++n;
    n -= 2;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("bank CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (vals.size() != n + 3) throw IoError("bank CSV line " + std::to_string(lineno) + " has the wrong width");
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw IoError("bank CSV has no rows");
    RowMatrix w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    Vector kappa(static_cast<Eigen::Index>(rows.size())), b0(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        b0[kk] = rows[k][1];
        kappa[kk] = rows[k][2];
        for (std::size_t i = 0; i < n; ++i) w(kk, static_cast<Eigen::Index>(i)) = rows[k][3 + i];
    }
    return {std::move(w), std::move(kappa), std::move(b0)};
}

}  // namespace wafp
