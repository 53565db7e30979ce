#pragma once

// Batched evaluation of a whole plane-wave bank over a sample batch, plus the
// reverse pass that feeds both the generator (x cotangents) and the
// adversary (gradients w.r.t. w, kappa, b0).
//
// For a wave with phase u = w.x + kappa t + b0, s = sin u, c = cos u,
// beta = b(t,x).w and q = w^T A(t,x) w, the generator integrand is
//   g = tau kappa c - beta c + q s / 2
// with tau = 0 for Lf and tau = -1 for Lf - df/dt, the negated time-interior
// integrand. With g_u = -tau kappa s + beta s + q c / 2:
//   dg/dx_j   = g_u w_j - (J^T w)_j c + (w^T dA/dx_j w) s / 2
//   dg/dw_i   = g_u x_i - b_i c + (A w)_i s
//   dg/dkappa = tau c + g_u t
//   dg/db0    = g_u
// The value integrand is f = s with all derivatives carried by c.

#include "wafp/common.hpp"
#include "wafp/problem.hpp"
#include "wafp/testfn.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wafp {

enum class Integrand { Value, Generator };

class BankEvaluator {
public:
    static constexpr std::size_t kBlockRows = 1024;

    /// `t` holds one time per sample row. `with_time_derivative` evaluates
    /// Lf - df/dt. The evaluator copies its inputs.
    BankEvaluator(const PlaneWaveBank& bank, const FpeProblem& problem, RowMatrix x, Vector t, Integrand kind,
                  bool with_time_derivative, std::size_t cache_budget_bytes = std::size_t{1} << 28)
        : bank_(bank),
          problem_(&problem),
          x_(std::move(x)),
          t_(std::move(t)),
          kind_(kind),
          tau_(with_time_derivative ? -1.0 : 0.0),
          budget_(cache_budget_bytes) {
        if (x_.rows() < 1) throw ContractError("bank evaluation needs at least one sample");
        if (static_cast<std::size_t>(x_.cols()) != bank_.dim() || bank_.dim() != problem.dim)
            throw ShapeError("sample, bank and problem dimensions differ");
        if (t_.size() != x_.rows()) throw ContractError("one time per sample row is required");
        const std::size_t n = problem.dim;
        const auto K = static_cast<Eigen::Index>(bank_.size());
        if (kind_ == Integrand::Generator && problem.diffusion.constant) {
            // A is the same at every sample: precompute q_k and A w_k.
            Vector x0 = x_.row(0).transpose();
            auto coef = problem.diffusion_at(t_[0], x0);
            q_const_.resize(K);
            aw_const_.resize(K, static_cast<Eigen::Index>(n));
            for (Eigen::Index k = 0; k < K; ++k) {
                std::span<const double> w{bank_.w().data() + k * bank_.w().cols(), n};
                q_const_[k] = diffusion_quad(problem.diffusion.structure, coef, w);
                diffusion_apply(problem.diffusion.structure, coef, w, row_span(aw_const_, k));
            }
        }
        sums_ = Vector::Zero(K);
        const std::size_t nblocks = (static_cast<std::size_t>(x_.rows()) + kBlockRows - 1) / kBlockRows;
        cache_.resize(nblocks);
        std::size_t used = 0;
        for (std::size_t bi = 0; bi < nblocks; ++bi) {
            Block blk = compute_block(bi);
            check_block(blk);
            sums_ += blk.g.colwise().sum().transpose();
            blk.g.resize(0, 0);
            const std::size_t bytes = blk.bytes();
            if (used + bytes <= budget_) {
                used += bytes;
                cache_[bi] = std::move(blk);
            }
        }
    }

    std::size_t samples() const { return static_cast<std::size_t>(x_.rows()); }
    const RowMatrix& points() const { return x_; }
    const Vector& times() const { return t_; }

    /// Per-wave sample mean of the integrand.
    Vector means() const { return sums_ / static_cast<double>(x_.rows()); }

    /// Accumulates the gradients of sum_k coef_k sum_m g_k(x_m) into
    /// `x_cot` (samples x n) and `bank_grad` (bank flat layout). Either may be null.
    void backward(const Vector& coef, RowMatrix* x_cot, Vector* bank_grad) const {
        const auto K = static_cast<Eigen::Index>(bank_.size());
        const auto n = static_cast<Eigen::Index>(problem_->dim);
        if (coef.size() != K) throw ContractError("coefficient vector must have one entry per wave");
        if (x_cot && (x_cot->rows() != x_.rows() || x_cot->cols() != n))
            throw ContractError("x cotangent buffer has the wrong shape");
        if (bank_grad && static_cast<std::size_t>(bank_grad->size()) != bank_.parameter_count())
            throw ContractError("bank gradient buffer has the wrong length");

        RowMatrix gw = RowMatrix::Zero(K, n);
        Vector gkappa = Vector::Zero(K);
        Vector gb0 = Vector::Zero(K);
        const auto& W = bank_.w();

        for (std::size_t bi = 0; bi < cache_.size(); ++bi) {
            std::optional<Block> fresh;
            if (!cache_[bi]) fresh = compute_block(bi);
            const Block& blk = cache_[bi] ? *cache_[bi] : *fresh;
            const auto rows = blk.rows;
            const auto xb = x_.middleRows(blk.begin, rows);
            const auto tb = t_.segment(blk.begin, rows);

            RowMatrix gu;
            if (kind_ == Integrand::Value) {
                gu = blk.c;
            } else {
                gu = blk.bw.cwiseProduct(blk.s);
                gu.array() -= tau_ * (blk.s.array().rowwise() * bank_.kappa().transpose().array());
                if (blk.q.size())
                    gu.array() += 0.5 * blk.q.array() * blk.c.array();
                else
                    gu.array() += 0.5 * (blk.c.array().rowwise() * q_const_.transpose().array());
            }
            RowMatrix p = gu.array().rowwise() * coef.transpose().array();

            if (x_cot) {
                auto xc = x_cot->middleRows(blk.begin, rows);
                xc.noalias() += p * W;
                if (kind_ == Integrand::Generator) add_generator_x_terms(blk, coef, xb, tb, xc);
            }
            if (bank_grad) {
                gw.noalias() += p.transpose() * xb;
                gkappa.noalias() += p.transpose() * tb;
                gb0 += p.colwise().sum().transpose();
                if (kind_ == Integrand::Generator) {
                    RowMatrix cc = blk.c.array().rowwise() * coef.transpose().array();
                    gw.noalias() -= cc.transpose() * blk.drift;
                    gkappa += tau_ * cc.colwise().sum().transpose();
                    if (blk.q.size()) {
                        add_variable_diffusion_w_terms(blk, coef, xb, tb, gw);
                    } else {
                        Vector ssum = (blk.s.array().rowwise() * coef.transpose().array()).colwise().sum().transpose();
                        gw.array() += aw_const_.array().colwise() * ssum.array();
                    }
                }
            }
        }
        if (bank_grad) {
            const auto kn = gw.size();
            bank_grad->head(kn) += Eigen::Map<const Vector>(gw.data(), kn);
            bank_grad->segment(kn, K) += gkappa;
            bank_grad->tail(K) += gb0;
        }
    }

private:
    struct Block {
        Eigen::Index begin = 0;
        Eigen::Index rows = 0;
        RowMatrix s, c;     // rows x K
        RowMatrix bw;       // rows x K, generator only
        RowMatrix q;        // rows x K, variable diffusion only
        RowMatrix drift;    // rows x n, generator only
        RowMatrix g;        // integrand values; dropped after pass 1

        std::size_t bytes() const {
            return sizeof(double) * static_cast<std::size_t>(s.size() + c.size() + bw.size() + q.size() + drift.size());
        }
    };

    Block compute_block(std::size_t bi) const {
        Block blk;
        blk.begin = static_cast<Eigen::Index>(bi * kBlockRows);
        blk.rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(kBlockRows), x_.rows() - blk.begin);
        const auto xb = x_.middleRows(blk.begin, blk.rows);
        const auto tb = t_.segment(blk.begin, blk.rows);
        const auto& W = bank_.w();
        const std::size_t n = problem_->dim;

        RowMatrix u = xb * W.transpose();
        u.rowwise() += bank_.b0().transpose();
        u.noalias() += tb * bank_.kappa().transpose();
        blk.s.resize(u.rows(), u.cols());
        blk.c.resize(u.rows(), u.cols());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
#if defined(__GLIBC__)
            ::sincos(u.data()[i], blk.s.data() + i, blk.c.data() + i);
#else
            blk.s.data()[i] = std::sin(u.data()[i]);
            blk.c.data()[i] = std::cos(u.data()[i]);
#endif
        }

        if (kind_ == Integrand::Value) {
            blk.g = blk.s;
            return blk;
        }
        blk.drift.resize(blk.rows, static_cast<Eigen::Index>(n));
        for (Eigen::Index m = 0; m < blk.rows; ++m)
            problem_->drift(tb[m], {xb.data() + m * xb.cols(), n}, row_span(blk.drift, m));
        blk.bw.noalias() = blk.drift * W.transpose();
        blk.g = tau_ * (blk.c.array().rowwise() * bank_.kappa().transpose().array());
        blk.g -= blk.bw.cwiseProduct(blk.c);
        if (problem_->diffusion.constant) {
            blk.g.array() += 0.5 * (blk.s.array().rowwise() * q_const_.transpose().array());
        } else {
            const auto K = static_cast<Eigen::Index>(bank_.size());
            blk.q.resize(blk.rows, K);
            std::vector<double> coef(diffusion_coef_count(problem_->diffusion.structure, n));
            for (Eigen::Index m = 0; m < blk.rows; ++m) {
                problem_->diffusion.value(tb[m], {xb.data() + m * xb.cols(), n}, coef);
                for (Eigen::Index k = 0; k < K; ++k)
                    blk.q(m, k) = diffusion_quad(problem_->diffusion.structure, coef, {W.data() + k * W.cols(), n});
            }
            blk.g.array() += 0.5 * blk.q.array() * blk.s.array();
        }
        return blk;
    }

    void check_block(const Block& blk) const {
        if (blk.g.allFinite()) return;
        for (Eigen::Index m = 0; m < blk.rows; ++m) {
            if (!blk.g.row(m).allFinite()) {
                const auto idx = blk.begin + m;
                std::ostringstream os;
                os << (kind_ == Integrand::Value ? "test function" : "Lf") << " is non-finite at sample " << idx
                   << ", x = (";
                for (Eigen::Index i = 0; i < x_.cols(); ++i) os << (i ? ", " : "") << x_(idx, i);
                os << ')';
                throw NumericError(os.str());
            }
        }
    }

    template <class XBlock, class TBlock, class Out>
    void add_generator_x_terms(const Block& blk, const Vector& coef, const XBlock& xb, const TBlock& tb,
                               Out& xc) const {
        const std::size_t n = problem_->dim;
        const auto& W = bank_.w();
        RowMatrix cc = blk.c.array().rowwise() * coef.transpose().array();
        RowMatrix tw = cc * W;  // rows x n: sum_k coef_k c_mk w_k
        std::vector<double> jac(n * n);
        for (Eigen::Index m = 0; m < blk.rows; ++m) {
            problem_->drift_jacobian(tb[m], {xb.data() + m * xb.cols(), n}, jac);
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += jac[i * n + j] * tw(m, static_cast<Eigen::Index>(i));
                xc(m, static_cast<Eigen::Index>(j)) -= acc;
            }
        }
        if (problem_->diffusion.constant) return;
        const auto K = static_cast<Eigen::Index>(bank_.size());
        std::vector<double> dcoef(diffusion_coef_count(problem_->diffusion.structure, n));
        for (Eigen::Index m = 0; m < blk.rows; ++m) {
            std::span<const double> xm{xb.data() + m * xb.cols(), n};
            for (std::size_t j = 0; j < n; ++j) {
                problem_->diffusion.spatial_derivative(tb[m], xm, j, dcoef);
                double acc = 0.0;
                for (Eigen::Index k = 0; k < K; ++k)
                    acc += coef[k] * blk.s(m, k) *
                           diffusion_quad(problem_->diffusion.structure, dcoef, {W.data() + k * W.cols(), n});
                xc(m, static_cast<Eigen::Index>(j)) += 0.5 * acc;
            }
        }
    }

    template <class XBlock, class TBlock>
    void add_variable_diffusion_w_terms(const Block& blk, const Vector& coef, const XBlock& xb, const TBlock& tb,
                                        RowMatrix& gw) const {
        const std::size_t n = problem_->dim;
        const auto& W = bank_.w();
        const auto K = static_cast<Eigen::Index>(bank_.size());
        std::vector<double> dcoef(diffusion_coef_count(problem_->diffusion.structure, n));
        std::vector<double> aw(n);
        for (Eigen::Index m = 0; m < blk.rows; ++m) {
            problem_->diffusion.value(tb[m], {xb.data() + m * xb.cols(), n}, dcoef);
            for (Eigen::Index k = 0; k < K; ++k) {
                diffusion_apply(problem_->diffusion.structure, dcoef, {W.data() + k * W.cols(), n}, aw);
                const double f = coef[k] * blk.s(m, k);
                for (std::size_t i = 0; i < n; ++i) gw(k, static_cast<Eigen::Index>(i)) += f * aw[i];
            }
        }
    }

    PlaneWaveBank bank_;
    const FpeProblem* problem_;
    RowMatrix x_;
    Vector t_;
    Integrand kind_;
    double tau_;
    std::size_t budget_;
    Vector q_const_;
    RowMatrix aw_const_;
    Vector sums_;
    std::vector<std::optional<Block>> cache_;
};

}  // namespace wafp
