#pragma once

// Weak-form losses and the adversarial min-max loop.
//
// Steady:  R_k = mean_m Lf_k(x_m)
// Time:    R_k = mean f_k(T, x_T) - mean f_k(0, x_0) - (T - eps) mean (df_k/dt - Lf_k)(t_m, x_m)
// Loss:    (1/K) sum_k R_k^2, minimized by the generator, maximized by the bank.

#include "wafp/bank_eval.hpp"
#include "wafp/common.hpp"
#include "wafp/optim.hpp"
#include "wafp/problem.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/rng.hpp"
#include "wafp/testfn.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace wafp {

struct TrainConfig {
    std::size_t K = 100;
    std::size_t M = 1000;
    std::size_t M0 = 500;
    std::size_t MT = 1000;
    std::size_t epochs = 1000;
    double gen_lr = 1e-3;
    double adv_lr = 1e-2;
    /// Every `adv_every`-th epoch the bank takes `adv_steps` ascent steps,
    /// otherwise one. adv_steps = 0 freezes the bank.
    std::size_t adv_every = 10;
    std::size_t adv_steps = 5;
    /// Interior times are drawn from U(eps, T); <= 0 means 1e-3 T.
    double eps_time = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> clip;
    double w_scale = 1.0;
    /// Draw training batches by Latin hypercube instead of i.i.d.
    bool stratified = false;

    void validate() const {
        if (K < 1 || M < 1 || M0 < 1 || MT < 1 || epochs < 1 || adv_every < 1)
            throw ConfigError("train counts (K, M, M0, MT, epochs, adv_every) must be >= 1");
        if (!(gen_lr >= 0.0) || !(adv_lr >= 0.0)) throw ConfigError("learning rates must be non-negative");
        if (clip && !(*clip > 0.0)) throw ConfigError("clip must be positive");
    }

    double eps_for(double horizon) const {
        const double eps = eps_time > 0.0 ? eps_time : 1e-3 * horizon;
        if (!(eps > 0.0 && eps < horizon)) throw ConfigError("eps_time must lie in (0, T)");
        return eps;
    }
};

struct TimeBatch {
    Vector t_interior;
    RowMatrix x0_interior;
    RowMatrix r_interior;
    RowMatrix x0_terminal;
    RowMatrix r_terminal;
    RowMatrix x_initial;
    double eps = 0.0;
};

/// Residuals and everything needed to backpropagate them.
struct LossEvaluation {
    double loss = 0.0;
    Vector residuals;
    bool time_dependent = false;
    double interior_scale = 1.0;  // T - eps for time problems
    PushResult interior_push;
    std::optional<BankEvaluator> interior;
    PushResult terminal_push;
    std::optional<BankEvaluator> terminal;
    std::optional<BankEvaluator> initial;
};

inline double loss_from_residuals(const Vector& r) { return r.squaredNorm() / static_cast<double>(r.size()); }

inline LossEvaluation steady_loss(const PushforwardMap& map, const PlaneWaveBank& bank, const FpeProblem& problem,
                                  const RowMatrix& r) {
    LossEvaluation ev;
    ev.interior_push = push_steady(map, r);
    ev.interior.emplace(bank, problem, ev.interior_push.x, Vector::Zero(r.rows()), Integrand::Generator, false);
    ev.residuals = ev.interior->means();
    ev.loss = loss_from_residuals(ev.residuals);
    return ev;
}

inline LossEvaluation time_loss(const PushforwardMap& map, const PlaneWaveBank& bank, const FpeProblem& problem,
                                const TimeBatch& batch) {
    if (!problem.time_dependent) throw ContractError("time_loss on a steady problem");
    const double T = problem.horizon;
    LossEvaluation ev;
    ev.time_dependent = true;
    ev.interior_scale = T - batch.eps;

    ev.interior_push = push_time(map, batch.t_interior, batch.x0_interior, batch.r_interior);
    ev.interior.emplace(bank, problem, ev.interior_push.x, batch.t_interior, Integrand::Generator, true);

    const Vector tT = Vector::Constant(batch.r_terminal.rows(), T);
    ev.terminal_push = push_time(map, tT, batch.x0_terminal, batch.r_terminal);
    ev.terminal.emplace(bank, problem, ev.terminal_push.x, tT, Integrand::Value, false);

    ev.initial.emplace(bank, problem, batch.x_initial, Vector::Zero(batch.x_initial.rows()), Integrand::Value, false);

    // The interior evaluator holds Lf - df/dt, minus the weak-form integrand.
    ev.residuals = ev.terminal->means() - ev.initial->means() + ev.interior_scale * ev.interior->means();
    ev.loss = loss_from_residuals(ev.residuals);
    return ev;
}

struct LossGradients {
    FlatGrad generator;
    Vector adversary;
};

/// d loss / d (network params) and d loss / d (bank params) from one evaluation.
inline LossGradients loss_gradients(const PushforwardMap& map, const PlaneWaveBank& bank, const LossEvaluation& ev,
                                    bool want_generator = true, bool want_adversary = true) {
    const auto K = static_cast<double>(bank.size());
    LossGradients g;
    if (want_adversary) g.adversary = Vector::Zero(static_cast<Eigen::Index>(bank.parameter_count()));
    Vector* adv = want_adversary ? &g.adversary : nullptr;
    const auto n = static_cast<Eigen::Index>(map.n);

    const Vector base = (2.0 / K) * ev.residuals;
    RowMatrix x_int;
    if (want_generator) x_int = RowMatrix::Zero(ev.interior_push.x.rows(), n);
    const double int_sign = ev.time_dependent ? ev.interior_scale : 1.0;
    ev.interior->backward(base * (int_sign / static_cast<double>(ev.interior->samples())),
                          want_generator ? &x_int : nullptr, adv);

    if (want_generator) g.generator = backprop_through_push(map, ev.interior_push, x_int);

    if (ev.time_dependent) {
        RowMatrix x_term;
        if (want_generator) x_term = RowMatrix::Zero(ev.terminal_push.x.rows(), n);
        ev.terminal->backward(base / static_cast<double>(ev.terminal->samples()), want_generator ? &x_term : nullptr,
                              adv);
        if (want_generator) g.generator.values += backprop_through_push(map, ev.terminal_push, x_term).values;
        if (adv) ev.initial->backward(-base / static_cast<double>(ev.initial->samples()), nullptr, adv);
    }
    if (!want_generator) g.generator.layout = map.net.layout();
    return g;
}

inline TimeBatch draw_time_batch(const PushforwardMap& map, const FpeProblem& problem, const TrainConfig& cfg,
                                 std::uint64_t seed, std::uint64_t index, std::size_t M, std::size_t M0,
                                 std::size_t MT) {
    TimeBatch b;
    const double T = problem.horizon;
    b.eps = cfg.eps_for(T);
    Engine te = make_engine(seed, "interior-time", index);
    std::uniform_real_distribution<double> ud(b.eps, T);
    b.t_interior.resize(static_cast<Eigen::Index>(M));
    for (Eigen::Index m = 0; m < b.t_interior.size(); ++m) b.t_interior[m] = ud(te);

    Engine e1 = make_engine(seed, "interior-base", index);
    b.r_interior = cfg.stratified ? sample_base_stratified(map.base, M, e1) : sample_base(map.base, M, e1);
    Engine e2 = make_engine(seed, "terminal-base", index);
    b.r_terminal = cfg.stratified ? sample_base_stratified(map.base, MT, e2) : sample_base(map.base, MT, e2);
    Engine e3 = make_engine(seed, "initial-x0", index);
    b.x_initial = problem.initial_sampler(e3, M0);
    if (map.variant == MapVariant::SqrtTime) {
        Engine e4 = make_engine(seed, "interior-x0", index);
        b.x0_interior = problem.initial_sampler(e4, M);
        Engine e5 = make_engine(seed, "terminal-x0", index);
        b.x0_terminal = problem.initial_sampler(e5, MT);
    }
    return b;
}

inline RowMatrix draw_steady_batch(const PushforwardMap& map, std::uint64_t seed, std::uint64_t index, std::size_t M,
                                   bool stratified = false) {
    Engine e = make_engine(seed, "steady-base", index);
    return stratified ? sample_base_stratified(map.base, M, e) : sample_base(map.base, M, e);
}

struct LossReport {
    std::size_t epoch = 0;
    double loss = 0.0;
    Vector residuals;
    double wall_seconds = 0.0;
};

/// Raised when the loss or a sampled point becomes non-finite. Carries the
/// offending batch for a diagnostic dump.
struct TrainingAborted : NumericError {
    TrainingAborted(const std::string& what, std::size_t epoch_, RowMatrix batch_)
        : NumericError(what), epoch(epoch_), batch(std::move(batch_)) {}
    std::size_t epoch;
    RowMatrix batch;
};

struct TrainSinks {
    std::function<void(const LossReport&)> on_epoch;
    std::size_t checkpoint_every = 0;
    std::function<void(std::size_t epoch, const PushforwardMap&, const PlaneWaveBank&)> on_checkpoint;
};

struct TrainResult {
    PushforwardMap map;
    PlaneWaveBank bank;
    std::vector<double> losses;
    Vector final_residuals;
    double wall_seconds = 0.0;
};

namespace detail {

struct EpochBatch {
    RowMatrix steady;
    TimeBatch time;
};

inline LossEvaluation evaluate(const PushforwardMap& map, const PlaneWaveBank& bank, const FpeProblem& problem,
                               const EpochBatch& b) {
    return problem.time_dependent ? time_loss(map, bank, problem, b.time) : steady_loss(map, bank, problem, b.steady);
}

}  // namespace detail

/// Runs the alternating descent (network, Adam) / ascent (bank, SGD) loop.
/// Boosted epochs take `adv_steps` bank steps before the network step; other
/// epochs update both from the same loss evaluation.
inline TrainResult train(const FpeProblem& problem, PushforwardMap map, PlaneWaveBank bank, const TrainConfig& cfg,
                         const TrainSinks& sinks = {}) {
    cfg.validate();
    map.validate();
    if (map.time_dependent() != problem.time_dependent)
        throw ConfigError("map variant " + to_string(map.variant) + " does not fit problem " + problem.id);
    if (bank.dim() != problem.dim || map.n != problem.dim) throw ConfigError("map, bank and problem dimensions differ");

    const auto start = std::chrono::steady_clock::now();
    AdamState adam = AdamState::fresh(map.net.parameter_count(), cfg.gen_lr > 0.0 ? cfg.gen_lr : 1.0);
    const bool zero_gen = cfg.gen_lr == 0.0;
    const SgdState sgd{cfg.adv_lr};
    const bool adversary = cfg.adv_steps > 0;

    TrainResult result;
    result.losses.reserve(cfg.epochs);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        detail::EpochBatch batch;
        if (problem.time_dependent)
            batch.time = draw_time_batch(map, problem, cfg, cfg.seed, epoch, cfg.M, cfg.M0, cfg.MT);
        else
            batch.steady = draw_steady_batch(map, cfg.seed, epoch, cfg.M, cfg.stratified);

        auto dump_batch = [&]() -> RowMatrix {
            return problem.time_dependent ? batch.time.r_interior : batch.steady;
        };

        try {
            LossEvaluation ev = detail::evaluate(map, bank, problem, batch);
            if (!std::isfinite(ev.loss))
                throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch), epoch, dump_batch());
            const double reported = ev.loss;
            Vector reported_residuals = ev.residuals;

            const bool boosted = adversary && epoch % cfg.adv_every == 0;
            if (boosted) {
                for (std::size_t s = 0; s < cfg.adv_steps; ++s) {
                    if (s > 0) ev = detail::evaluate(map, bank, problem, batch);
                    auto g = loss_gradients(map, bank, ev, false, true);
                    Vector p = bank.flat();
                    sgd_step(p, g.adversary, sgd, Direction::Ascent);
                    bank.set_flat(p);
                }
                ev = detail::evaluate(map, bank, problem, batch);
                auto g = loss_gradients(map, bank, ev, true, false);
                clip_by_norm(g.generator.values, cfg.clip);
                if (!zero_gen) adam_step(map.net.mutable_parameters(), g.generator.values, adam, Direction::Descent);
            } else {
                auto g = loss_gradients(map, bank, ev, true, adversary);
                clip_by_norm(g.generator.values, cfg.clip);
                if (!zero_gen) adam_step(map.net.mutable_parameters(), g.generator.values, adam, Direction::Descent);
                if (adversary) {
                    Vector p = bank.flat();
                    sgd_step(p, g.adversary, sgd, Direction::Ascent);
                    bank.set_flat(p);
                }
            }
            if (!map.net.parameters().allFinite())
                throw TrainingAborted("non-finite network parameter after epoch " + std::to_string(epoch), epoch,
                                      dump_batch());

            result.losses.push_back(reported);
            result.final_residuals = reported_residuals;
            if (sinks.on_epoch) {
                LossReport rep;
                rep.epoch = epoch;
                rep.loss = reported;
                rep.residuals = std::move(reported_residuals);
                rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                sinks.on_epoch(rep);
            }
            if (sinks.checkpoint_every > 0 && sinks.on_checkpoint && epoch % sinks.checkpoint_every == 0)
                sinks.on_checkpoint(epoch, map, bank);
        } catch (const TrainingAborted&) {
            throw;
        } catch (const NumericError& e) {
            throw TrainingAborted(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", epoch,
                                  dump_batch());
        }
    }
    result.map = std::move(map);
    result.bank = std::move(bank);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Loss at fixed parameters on a large fresh batch; approximates the
/// population loss without the minibatch noise floor.
inline double evaluate_loss(const PushforwardMap& map, const PlaneWaveBank& bank, const FpeProblem& problem,
                            const TrainConfig& cfg, std::size_t samples, std::uint64_t seed) {
    if (problem.time_dependent) {
        TrainConfig iid = cfg;
        iid.stratified = false;
        auto b = draw_time_batch(map, problem, iid, seed, 0, samples, samples, samples);
        return time_loss(map, bank, problem, b).loss;
    }
    return steady_loss(map, bank, problem, draw_steady_batch(map, seed, 0, samples)).loss;
}

}  // namespace wafp
