// wafp: train, sample, integrate, validate and oracle subcommands.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric abort, 4 I/O error.

#include "wafp/wafp.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace wafp;

namespace {

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : detail::split_list(s)) out.push_back(detail::parse_double("list", tok));
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& tok : detail::split_list(s)) out.push_back(detail::parse_uint("list", tok));
    return out;
}

struct TrainArgs {
    std::string preset, config, manifest, out;
    std::optional<std::size_t> epochs;
    std::optional<std::uint64_t> seed;
    std::size_t log_every = 1000;
};

int cmd_train(const TrainArgs& a) {
    const int sources = !a.preset.empty() + !a.config.empty() + !a.manifest.empty();
    if (sources != 1) throw ConfigError("train needs exactly one of --preset, --config, --manifest");
    RunConfig c;
    if (!a.preset.empty()) c = preset(a.preset);
    if (!a.config.empty()) c = parse_config(read_text(a.config));
    if (!a.manifest.empty()) c = config_from_manifest(a.manifest);
    if (a.epochs) c.train.epochs = *a.epochs;
    if (a.seed) c.train.seed = *a.seed;
    if (!a.out.empty()) c.output_dir = a.out;
    if (c.output_dir.empty()) throw ConfigError("no output directory: set [output] dir or pass --out");
    c.validate();
    const fs::path dir = resolve_run_dir(c.output_dir);
    std::cerr << "training " << c.problem << " -> " << dir.string() << "\n";
    auto run = train_run(c, dir, &std::cerr, a.log_every);
    const json m = json::parse(read_text(dir / "metrics.json"));
    std::cout << dir.string() << "\nfinal_loss " << fmt17(m["final_loss"].get<double>()) << "\n";
    return 0;
}

int cmd_sample(const std::string& run_dir, std::size_t n, const std::string& times, std::uint64_t seed,
               const std::string& out) {
    auto run = load_run(run_dir);
    std::string csv;
    if (!run.problem.time_dependent) {
        if (!times.empty()) throw ConfigError("--t applies to time-dependent runs only");
        csv = samples_csv(generate_samples(run.map, run.problem, n, seed));
    } else {
        const auto ts = times.empty() ? run.config.sample_times : parse_doubles(times);
        for (std::size_t i = 0; i < ts.size(); ++i)
            append_samples_csv(csv, generate_samples(run.map, run.problem, n, seed, ts[i]), ts[i], i == 0);
    }
    if (out.empty())
        std::cout << csv;
    else
        write_text(out, csv);
    return 0;
}

int cmd_integrate(const std::string& run_dir, const std::string& ids, const std::string& sizes, std::uint64_t seed,
                  std::size_t grid_points, const std::string& out) {
    auto run = load_run(run_dir);
    if (run.problem.time_dependent) throw ConfigError("integrate needs a steady run");
    const auto fids = ids.empty() ? integrand_ids(run.problem.dim) : detail::split_list(ids);
    const auto ns = parse_sizes(sizes);
    std::map<std::string, double> ref;
    if (run.problem.reference.kind == ReferenceKind::BoltzmannUnnormalized)
        ref = reference_table(run.problem, detail::reference_grid(run.problem, grid_points), fids);
    std::vector<McEstimate> rows;
    for (const auto& id : fids) rows.push_back(mc_integrate(run.map, run.problem, id, ns, seed));
    const fs::path base = out.empty() ? fs::path(run_dir) : fs::path(out);
    write_text(base / "integrate.csv", mc_table_csv(rows, ref));
    json r;
    r["grid_points"] = grid_points;
    r["reference"] = json::object();
    for (const auto& [k, v] : ref) r["reference"][k] = v;
    json cmp = json::array();
    for (const auto& e : rows) {
        json row{{"function", e.function_id}, {"N", e.sizes.back()}, {"estimate", e.estimates.back()},
                 {"se", e.standard_errors.back()}};
        if (auto it = ref.find(e.function_id); it != ref.end()) {
            row["reference"] = it->second;
            row["error"] = e.estimates.back() - it->second;
        }
        cmp.push_back(row);
    }
    r["comparison"] = cmp;
    write_text(base / "integrate.json", dump_json(r));
    std::cout << (base / "integrate.csv").string() << "\n";
    return 0;
}

int cmd_validate(const std::string& run_dir) {
    auto run = load_run(run_dir);
    json m = compute_metrics(run.config, run.problem, run.map, run.bank, run_dir);
    const fs::path path = fs::path(run_dir) / "metrics.json";
    if (fs::exists(path)) {
        // Training-time fields survive revalidation.
        const json old = json::parse(read_text(path));
        for (const char* key : {"epochs", "last_minibatch_loss", "wall_seconds"})
            if (old.contains(key)) m[key] = old[key];
    }
    write_text(path, dump_json(m));
    std::cout << path.string() << "\n";
    return 0;
}

struct OracleArgs {
    std::string problem, out;
    double dt = 1e-3;
    std::size_t steps = 1000, particles = 10000, grid_points = 501;
    std::uint64_t seed = 0;
};

int cmd_oracle(const OracleArgs& a) {
    auto p = make_problem(a.problem);
    const fs::path dir = resolve_run_dir(a.out);
    std::optional<QuadGrid> grid;
    if (p.reference.kind == ReferenceKind::BoltzmannUnnormalized) grid = detail::reference_grid(p, a.grid_points);
    json r;
    r["problem"] = p.id;
    RowMatrix x0;
    Engine e = make_engine(a.seed, "oracle-x0");
    if (p.time_dependent) {
        x0 = p.initial_sampler(e, a.particles);
    } else {
        std::normal_distribution<double> nd(0.0, 1.0);
        x0.resize(static_cast<Eigen::Index>(a.particles), static_cast<Eigen::Index>(p.dim));
        for (Eigen::Index i = 0; i < x0.size(); ++i) x0.data()[i] = nd(e);
    }
    EmConfig em{a.dt, a.steps, a.particles, a.seed};
    auto res = euler_maruyama(p, x0, em);
    write_text(dir / "em_samples.csv", samples_csv(res.endpoints, p.time_dependent ? std::optional<double>(em.horizon())
                                                                                   : std::nullopt));
    r["em"] = {{"dt", a.dt}, {"steps", a.steps}, {"particles", a.particles}, {"seed", a.seed},
               {"moments", detail::moments_json(moments(res.endpoints))}};
    if (grid) {
        auto tab = reference_table(p, *grid, integrand_ids(p.dim));
        r["grid_points"] = a.grid_points;
        r["reference"] = json::object();
        for (const auto& [k, v] : tab) r["reference"][k] = v;
        if (p.dim == 1) {
            std::vector<double> v(res.endpoints.data(), res.endpoints.data() + res.endpoints.size());
            auto rho = [&](double x) { return eval_reference_density(p.reference, std::span<const double>(&x, 1)); };
            r["em"]["wasserstein1"] = wasserstein1_vs_density(v, rho, grid->lower[0], grid->upper[0]);
        }
    } else if (p.reference.kind == ReferenceKind::GaussianMoments) {
        auto m = eval_reference_moments(p.reference, em.horizon());
        r["reference"] = {{"t", em.horizon()}, {"mean", detail::to_json(m.mean)}, {"variance", m.variance}};
    }
    write_text(dir / "reference.json", dump_json(r));
    std::cout << (dir / "reference.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak-adversarial Fokker-Planck solver with neural pushforward samplers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", WAFP_VERSION);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a run and write its directory");
    train_cmd->add_option("--preset", ta.preset, "built-in preset name");
    train_cmd->add_option("--config", ta.config, "INI config file");
    train_cmd->add_option("--manifest", ta.manifest, "rerun from a run's manifest.json");
    train_cmd->add_option("--out", ta.out, "run directory (overrides [output] dir)");
    train_cmd->add_option("--epochs", ta.epochs, "override epoch count");
    train_cmd->add_option("--seed", ta.seed, "override master seed");
    train_cmd->add_option("--log-every", ta.log_every, "progress line interval in epochs (0 disables)");

    std::string run_dir, times, out, ids, sizes = "100,1000,10000";
    std::size_t n = 10000, grid_points = 501;
    std::uint64_t seed = 1;
    auto* sample_cmd = app.add_subcommand("sample", "draw samples from a trained run");
    sample_cmd->add_option("--run", run_dir, "run directory")->required();
    sample_cmd->add_option("-n,--count", n, "number of samples");
    sample_cmd->add_option("--t", times, "comma-separated times (time-dependent runs)");
    sample_cmd->add_option("--seed", seed, "sampling seed");
    sample_cmd->add_option("--out", out, "output CSV (default stdout)");

    auto* integrate_cmd = app.add_subcommand("integrate", "Monte Carlo integration with a trained sampler");
    integrate_cmd->add_option("--run", run_dir, "run directory")->required();
    integrate_cmd->add_option("--functions", ids, "comma-separated integrand ids (default: all)");
    integrate_cmd->add_option("--sizes", sizes, "comma-separated sample sizes");
    integrate_cmd->add_option("--seed", seed, "sampling seed");
    integrate_cmd->add_option("--grid-points", grid_points, "Simpson points per axis (odd)");
    integrate_cmd->add_option("--out", out, "output directory (default: the run directory)");

    auto* validate_cmd = app.add_subcommand("validate", "recompute metrics.json for a run");
    validate_cmd->add_option("--run", run_dir, "run directory")->required();

    OracleArgs oa;
    auto* oracle_cmd = app.add_subcommand("oracle", "Euler-Maruyama and quadrature references");
    oracle_cmd->add_option("--problem", oa.problem, "problem id")->required();
    oracle_cmd->add_option("--out", oa.out, "output directory")->required();
    oracle_cmd->add_option("--dt", oa.dt, "time step");
    oracle_cmd->add_option("--steps", oa.steps, "number of steps");
    oracle_cmd->add_option("--particles", oa.particles, "number of particles");
    oracle_cmd->add_option("--seed", oa.seed, "seed");
    oracle_cmd->add_option("--grid-points", oa.grid_points, "Simpson points per axis (odd)");

    auto* presets_cmd = app.add_subcommand("presets", "list presets, or print one as INI");
    std::string show;
    presets_cmd->add_option("name", show, "preset to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) return cmd_train(ta);
        if (*sample_cmd) return cmd_sample(run_dir, n, times, seed, out);
        if (*integrate_cmd) return cmd_integrate(run_dir, ids, sizes, seed, grid_points, out);
        if (*validate_cmd) return cmd_validate(run_dir);
        if (*oracle_cmd) return cmd_oracle(oa);
        if (*presets_cmd) {
            if (show.empty())
                for (const auto& p : preset_names()) std::cout << p << "\n";
            else
                std::cout << emit_config(preset(show));
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "wafp: I/O error: " << e.what() << "\n";
        return 4;
    } catch (const TrainingAborted& e) {
        std::cerr << "wafp: training aborted at epoch " << e.epoch << ": " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "wafp: numeric error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "wafp: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "wafp: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
