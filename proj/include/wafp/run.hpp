#pragma once

// Run directories: training with artifact output, reload, and metrics.
//
//   config.ini        complete config echo
//   manifest.json     seeds, versions, file list
//   loss_history.csv  epoch,loss
//   net.txt bank.csv  trained parameters
//   samples.csv       pushed samples (t column for time-dependent runs)
//   metrics.json      moments, error tables, MC tables, reference data
//   checkpoints/      epoch_NNNNNN_net.txt, epoch_NNNNNN_bank.csv

#include "wafp/config.hpp"
#include "wafp/functions.hpp"
#include "wafp/io.hpp"
#include "wafp/metrics.hpp"
#include "wafp/oracle.hpp"
#include "wafp/sampler.hpp"
#include "wafp/trainer.hpp"

#include <json.hpp>

#include <cstdlib>
#include <iomanip>
#include <ostream>

#ifndef WAFP_VERSION
#define WAFP_VERSION "0.1.0"
#endif

namespace wafp {

using json = nlohmann::ordered_json;

inline constexpr std::size_t population_loss_samples = 100000;

/// Relative run directories are placed under $WAFP_OUTPUT_ROOT when set.
inline fs::path resolve_run_dir(const std::string& dir) {
    fs::path p(dir);
    if (p.is_relative())
        if (const char* root = std::getenv("WAFP_OUTPUT_ROOT"); root && *root) return fs::path(root) / p;
    return p;
}

inline std::vector<std::string> run_files(const RunConfig&) {
    return {"config.ini", "manifest.json", "loss_history.csv", "net.txt", "bank.csv", "samples.csv", "metrics.json"};
}

inline json make_manifest(const RunConfig& c) {
    json m;
    m["format"] = "wafp-run 1";
    m["version"] = WAFP_VERSION;
    m["compiler"] = __VERSION__;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    m["preset"] = c.preset;
    m["problem"] = c.problem;
    m["config"] = "config.ini";
    m["seed"] = c.train.seed;
    m["streams"] = {{"net-init", derive_seed(c.train.seed, "net-init")},
                    {"bank-init", derive_seed(c.train.seed, "bank-init")},
                    {"output-samples", derive_seed(c.train.seed, "output-samples")}};
    m["files"] = run_files(c);
    return m;
}

/// The config a manifest points at, resolved relative to the manifest.
inline RunConfig config_from_manifest(const fs::path& manifest_path) {
    json m;
    try {
        m = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!m.contains("config") || !m["config"].is_string())
        throw IoError("manifest " + manifest_path.string() + " names no config file");
    return parse_config(read_text(manifest_path.parent_path() / m["config"].get<std::string>()));
}

struct LoadedRun {
    RunConfig config;
    FpeProblem problem;
    PushforwardMap map;
    PlaneWaveBank bank;
};

inline LoadedRun load_run(const fs::path& dir) {
    LoadedRun r;
    r.config = parse_config(read_text(dir / "config.ini"));
    r.problem = make_problem(r.config.problem);
    r.map = build_map(r.config, r.problem);
    std::istringstream net(read_text(dir / "net.txt"));
    r.map.net = read_net(net);
    r.map.validate();
    std::istringstream bank(read_text(dir / "bank.csv"));
    r.bank = read_bank_csv(bank);
    return r;
}

namespace detail {

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json moments_json(const MomentSummary& m) {
    json j;
    j["count"] = m.count;
    j["mean"] = to_json(m.mean);
    j["variance"] = to_json(m.variance);
    j["std"] = to_json(m.variance.cwiseSqrt());
    if (m.mean_radius) j["mean_radius"] = *m.mean_radius;
    return j;
}

inline std::string histogram_csv(const Histogram& h) {
    std::string s = "lower,upper,count,density\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        s += fmt17(h.edges[i]) + "," + fmt17(h.edges[i + 1]) + "," + std::to_string(h.counts[i]) + "," +
             fmt17(h.density(i)) + "\n";
    return s;
}

inline QuadGrid reference_grid(const FpeProblem& p, std::size_t pts) {
    if (!p.quadrature_box) throw ContractError("problem " + p.id + " has no quadrature box");
    return QuadGrid::cube(*p.quadrature_box, pts);
}

}  // namespace detail

inline std::string mc_table_csv(const std::vector<McEstimate>& rows, const std::map<std::string, double>& ref) {
    std::string s = "function,N,estimate,se,reference\n";
    for (const auto& e : rows)
        for (std::size_t i = 0; i < e.sizes.size(); ++i) {
            s += e.function_id + "," + std::to_string(e.sizes[i]) + "," + fmt17(e.estimates[i]) + "," +
                 fmt17(e.standard_errors[i]) + ",";
            auto it = ref.find(e.function_id);
            s += (it == ref.end() ? std::string() : fmt17(it->second)) + "\n";
        }
    return s;
}

/// Computes metrics.json for a trained run and writes the side CSVs
/// (histograms, error heatmaps, MC table) into `dir`.
inline json compute_metrics(const RunConfig& c, const FpeProblem& problem, const PushforwardMap& map,
                            const PlaneWaveBank& bank, const fs::path& dir) {
    using namespace detail;
    json j;
    j["problem"] = problem.id;
    j["dim"] = problem.dim;
    j["final_loss"] = evaluate_loss(map, bank, problem, c.train, population_loss_samples,
                                    derive_seed(c.train.seed, "final-loss"));
    j["final_loss_samples"] = population_loss_samples;
    const std::uint64_t sample_seed = derive_seed(c.train.seed, "output-samples");

    if (!problem.time_dependent) {
        RowMatrix x = generate_samples(map, problem, c.samples, sample_seed);
        j["moments"] = moments_json(moments(x));
        if (problem.dim == 1) {
            std::vector<double> v(x.data(), x.data() + x.size());
            const double lo = problem.quadrature_box ? problem.quadrature_box->lower[0] : -5.0;
            const double hi = problem.quadrature_box ? problem.quadrature_box->upper[0] : 5.0;
            const auto grid = linspace(lo, hi, 601);
            const double h = silverman_bandwidth(v);
            const auto k = kde_1d(v, grid, h);
            std::vector<double> peaks;
            for (auto i : local_maxima(k)) peaks.push_back(grid[i]);
            std::size_t pos = 0;
            for (double s : v) pos += s > 0.0 ? 1 : 0;
            j["kde"] = {{"bandwidth", h}, {"grid", grid}, {"density", k}, {"maxima", peaks}};
            j["mass_positive"] = static_cast<double>(pos) / static_cast<double>(v.size());
            write_text(dir / "histogram.csv", histogram_csv(histogram(v, 60, lo, hi)));
            if (problem.reference.kind == ReferenceKind::BoltzmannUnnormalized) {
                auto rho = [&](std::span<const double> p) { return eval_reference_density(problem.reference, p); };
                const double z = simpson_integrate(rho, reference_grid(problem, 2001));
                std::vector<double> dens;
                for (double g : grid) dens.push_back(rho(std::span<const double>(&g, 1)) / z);
                j["reference"] = {{"grid", grid}, {"density", dens}};
            }
        }
        if (problem.dim == 2) {
            // Angular uniformity uses the first 1000 samples: at larger N the
            // test resolves deviations far below the plotting scale.
            const Eigen::Index nchi = std::min<Eigen::Index>(x.rows(), 1000);
            auto ra = radial_angular(x, 40, 36);
            j["angular_chi2_pvalue"] = chi2_uniformity_pvalue(radial_angular(x.topRows(nchi), 40, 36).angular.counts);
            j["angular_chi2_samples"] = nchi;
            write_text(dir / "radial.csv", histogram_csv(ra.radial));
            write_text(dir / "angular.csv", histogram_csv(ra.angular));
            if (problem.reference.kind == ReferenceKind::BoltzmannUnnormalized) {
                const auto ids = integrand_ids(2);
                auto ref = reference_table(problem, reference_grid(problem, 501), ids);
                std::vector<std::size_t> sizes;
                for (std::size_t n = 100; n <= c.samples; n *= 10) sizes.push_back(n);
                if (sizes.empty()) sizes.push_back(c.samples);
                std::vector<McEstimate> rows;
                json mc = json::array();
                for (const auto& id : ids) {
                    rows.push_back(mc_integrate_samples(x, id, sizes));
                    mc.push_back({{"function", id},
                                  {"reference", ref[id]},
                                  {"sizes", rows.back().sizes},
                                  {"estimates", rows.back().estimates},
                                  {"standard_errors", rows.back().standard_errors}});
                }
                j["mc"] = mc;
                write_text(dir / "mc_convergence.csv", mc_table_csv(rows, ref));
            }
        }
    } else {
        std::vector<RowMatrix> per_time;
        json by_time = json::array();
        for (double t : c.sample_times) {
            per_time.push_back(generate_samples(map, problem, c.samples, sample_seed, t));
            json e = moments_json(moments(per_time.back()));
            e["t"] = t;
            if (problem.reference.kind == ReferenceKind::GaussianMoments) {
                auto r = eval_reference_moments(problem.reference, t);
                e["reference_mean"] = to_json(r.mean);
                e["reference_variance"] = r.variance;
            }
            by_time.push_back(e);
        }
        j["times"] = c.sample_times;
        j["moments_by_time"] = by_time;
        if (problem.reference.kind == ReferenceKind::GaussianMoments) {
            auto e = error_table(per_time, c.sample_times, problem.reference);
            std::vector<std::string> cols;
            for (double t : c.sample_times) cols.push_back("t=" + fmt17(t));
            write_text(dir / "mean_error_heatmap.csv", labelled_matrix_csv("dim", cols, e.mean_abs_error));
            write_text(dir / "variance_error_heatmap.csv", labelled_matrix_csv("dim", cols, e.variance_abs_error));
            json rows_m = json::array(), rows_v = json::array();
            for (Eigen::Index i = 0; i < e.mean_abs_error.rows(); ++i) {
                rows_m.push_back(to_json(e.mean_abs_error.row(i).transpose()));
                rows_v.push_back(to_json(e.variance_abs_error.row(i).transpose()));
            }
            j["error_table"] = {{"mean_abs_error", rows_m},
                                {"variance_abs_error", rows_v},
                                {"max_mean_abs_error", e.mean_abs_error.maxCoeff()},
                                {"max_variance_abs_error", e.variance_abs_error.maxCoeff()},
                                {"average_mean_abs_error", e.average_mean_error()},
                                {"average_variance_abs_error", e.average_variance_error()}};
        }
    }
    return j;
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

struct TrainedRun {
    RunConfig config;
    FpeProblem problem;
    TrainResult result;
    fs::path dir;
};

/// Trains `c` and fills `dir`. On a numeric abort the partial loss history
/// and the offending batch (abort_batch.csv) are written before rethrowing.
inline TrainedRun train_run(const RunConfig& c, const fs::path& dir, std::ostream* log = nullptr,
                            std::size_t log_every = 1000) {
    c.validate();
    TrainedRun out;
    out.config = c;
    out.dir = dir;
    out.problem = make_problem(c.problem);
    auto map = build_map(c, out.problem);
    auto bank = build_bank(c, out.problem);

    ensure_dir(dir);
    write_text(dir / "config.ini", emit_config(c));
    write_text(dir / "manifest.json", dump_json(make_manifest(c)));

    std::vector<double> losses;
    TrainSinks sinks;
    sinks.on_epoch = [&](const LossReport& r) {
        losses.push_back(r.loss);
        if (log && log_every > 0 && (r.epoch % log_every == 0 || r.epoch == c.train.epochs))
            *log << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.loss << " (" << std::fixed
                 << std::setprecision(1) << r.wall_seconds << "s)" << std::defaultfloat << std::endl;
    };
    sinks.checkpoint_every = c.checkpoint_every;
    sinks.on_checkpoint = [&](std::size_t epoch, const PushforwardMap& m, const PlaneWaveBank& b) {
        std::ostringstream tag;
        tag << "epoch_" << std::setw(6) << std::setfill('0') << epoch;
        std::ostringstream net, bk;
        write_net(net, m.net);
        write_bank_csv(bk, b);
        write_text(dir / "checkpoints" / (tag.str() + "_net.txt"), net.str());
        write_text(dir / "checkpoints" / (tag.str() + "_bank.csv"), bk.str());
    };

    try {
        out.result = train(out.problem, std::move(map), std::move(bank), c.train, sinks);
    } catch (const TrainingAborted& e) {
        write_text(dir / "loss_history.csv", loss_history_csv(losses));
        write_text(dir / "abort_batch.csv", samples_csv(e.batch));
        throw;
    }

    write_text(dir / "loss_history.csv", loss_history_csv(out.result.losses));
    std::ostringstream net, bk;
    write_net(net, out.result.map.net);
    write_bank_csv(bk, out.result.bank);
    write_text(dir / "net.txt", net.str());
    write_text(dir / "bank.csv", bk.str());

    const std::uint64_t sample_seed = derive_seed(c.train.seed, "output-samples");
    if (!out.problem.time_dependent) {
        write_text(dir / "samples.csv", samples_csv(generate_samples(out.result.map, out.problem, c.samples, sample_seed)));
    } else {
        std::string s;
        for (std::size_t i = 0; i < c.sample_times.size(); ++i)
            append_samples_csv(s, generate_samples(out.result.map, out.problem, c.samples, sample_seed, c.sample_times[i]),
                               c.sample_times[i], i == 0);
        write_text(dir / "samples.csv", s);
    }
    json metrics = compute_metrics(c, out.problem, out.result.map, out.result.bank, dir);
    metrics["epochs"] = out.result.losses.size();
    metrics["last_minibatch_loss"] = out.result.losses.empty() ? 0.0 : out.result.losses.back();
    metrics["wall_seconds"] = out.result.wall_seconds;
    write_text(dir / "metrics.json", dump_json(metrics));
    return out;
}

}  // namespace wafp
