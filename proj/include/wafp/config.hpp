#pragma once

// Run configuration: INI text with sections [problem], [net], [train],
// [output], plus the built-in presets.

#include "wafp/common.hpp"
#include "wafp/nn.hpp"
#include "wafp/problems.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/trainer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wafp {

struct RunConfig {
    std::string preset;
    std::string problem = "ou1d";

    MapVariant variant = MapVariant::Steady;
    std::vector<std::size_t> hidden{10, 10};
    Activation activation = Activation::Tanh;
    InitScheme init = InitScheme::XavierUniform;
    BaseDistribution base{BaseKind::UniformUnit, 1};
    bool include_x0 = false;

    TrainConfig train;
    std::size_t checkpoint_every = 0;

    std::string output_dir;
    std::size_t samples = 10000;
    /// Times at which time-dependent runs dump samples.
    std::vector<double> sample_times{0.01, 0.2, 0.5, 1.0};

    void validate() const {
        if (problem.empty()) throw ConfigError("[problem] id is empty");
        if (hidden.empty()) throw ConfigError("[net] hidden needs at least one layer");
        for (auto h : hidden)
            if (h < 1) throw ConfigError("[net] hidden layer widths must be >= 1");
        if (base.dim < 1) throw ConfigError("[net] base_dim must be >= 1");
        if (samples < 1) throw ConfigError("[output] samples must be >= 1");
        for (double t : sample_times)
            if (!(t >= 0.0)) throw ConfigError("[output] sample_times must be >= 0");
        train.validate();
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto a = tok.find_first_not_of(" \t");
        const auto b = tok.find_last_not_of(" \t");
        if (a == std::string::npos) throw ConfigError("empty entry in list '" + s + "'");
        out.push_back(tok.substr(a, b - a + 1));
    }
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
    return s;
}

inline const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema{
        {"problem", {"id", "preset"}},
        {"net", {"variant", "hidden", "activation", "init", "base", "base_dim", "include_x0"}},
        {"train",
         {"K", "M", "M0", "MT", "epochs", "gen_lr", "adv_lr", "adv_every", "adv_steps", "eps_time", "seed", "clip",
          "w_scale", "stratified", "checkpoint_every"}},
        {"output", {"dir", "samples", "sample_times"}},
    };
    return schema;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
    return {"ou1d", "dwell1d", "dpeak2d", "ring2d", "outime1d", "outime10d", "outime10d_full", "outime100d"};
}

/// Built-in experiment settings. outime10d is a reduced surrogate sized for a
/// single core; outime10d_full and outime100d use the full batch sizes.
inline RunConfig preset(const std::string& name) {
    RunConfig c;
    c.preset = name;
    c.output_dir = "runs/" + name;
    auto& t = c.train;
    if (name == "ou1d") {
        c.problem = "ou1d";
        c.hidden = {10, 10};
        c.base = {BaseKind::UniformUnit, 1};
        t.K = 100;
        t.M = 1000;
        t.epochs = 20000;
        t.gen_lr = 3e-3;
        t.adv_steps = 0;
        t.stratified = true;
    } else if (name == "dwell1d") {
        c.problem = "dwell1d";
        c.hidden = {100};
        c.base = {BaseKind::StandardNormal, 8};
        t.K = 100;
        t.M = 1000;
        t.epochs = 16000;
        t.gen_lr = 2e-3;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else if (name == "dpeak2d") {
        c.problem = "dpeak2d";
        c.hidden = {32, 32};
        c.base = {BaseKind::StandardNormal, 16};
        t.K = 200;
        t.M = 1000;
        t.epochs = 100000;
        t.gen_lr = 1e-2;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else if (name == "ring2d") {
        c.problem = "ring2d";
        c.hidden = {64};
        c.base = {BaseKind::StandardNormal, 4};
        t.K = 200;
        t.M = 1000;
        t.epochs = 20000;
        t.gen_lr = 3e-3;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else if (name == "outime1d") {
        c.problem = "outime1d";
        c.variant = MapVariant::GaussianIcLinearTime;
        c.hidden = {32, 32};
        c.base = {BaseKind::StandardNormal, 2};
        t.K = 100;
        t.M = 1000;
        t.M0 = 500;
        t.MT = 1000;
        t.epochs = 20000;
        t.gen_lr = 1e-3;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else if (name == "outime10d" || name == "outime10d_full") {
        const bool full = name == "outime10d_full";
        c.problem = "outime10d";
        c.variant = MapVariant::SqrtTime;
        // The surrogate drops x0 from the network input: x0 + sqrt(t) net(t, r)
        // still reaches every Gaussian marginal here and trains much faster.
        c.include_x0 = full;
        c.hidden = {64, 64};
        c.base = {BaseKind::StandardNormal, 20};
        t.K = 200;
        t.M = full ? 16000 : 4000;
        t.M0 = full ? 2000 : 1000;
        t.MT = full ? 2000 : 1000;
        t.epochs = full ? 20000 : 8000;
        t.w_scale = full ? 1.0 : 0.5;
        t.gen_lr = 1e-3;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else if (name == "outime100d") {
        c.problem = "outime100d";
        c.variant = MapVariant::SqrtTime;
        c.include_x0 = true;
        c.hidden = {128, 128, 128};
        c.base = {BaseKind::StandardNormal, 50};
        t.K = 5000;
        t.M = 16000;
        t.M0 = 2000;
        t.MT = 2000;
        t.epochs = 10000;
        t.gen_lr = 5e-4;
        t.adv_lr = 1e-2;
        t.adv_every = 10;
        t.adv_steps = 5;
    } else {
        std::string valid;
        for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
        throw ConfigError("unknown preset '" + name + "' (valid presets: " + valid + ")");
    }
    return c;
}

/// Parses INI text. Missing keys keep their defaults, or the preset's values
/// when [problem] preset is given; unknown sections and keys are errors.
inline RunConfig parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    const auto& schema = detail::config_schema();
    for (const auto& [section, body] : tree) {
        auto it = schema.find(section);
        if (it == schema.end()) throw ConfigError("unknown config section [" + section + "]");
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + section + "' appears outside any section");
        for (const auto& [key, _] : body)
            if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    }
    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '/'))) return *v;
        return std::nullopt;
    };

    RunConfig c;
    if (auto p = get("problem/preset"); p && !p->empty()) c = preset(*p);
    if (auto v = get("problem/id")) c.problem = *v;

    using namespace detail;
    if (auto v = get("net/variant")) c.variant = parse_map_variant(*v);
    if (auto v = get("net/hidden")) {
        c.hidden.clear();
        for (const auto& s : split_list(*v)) c.hidden.push_back(parse_uint("hidden", s));
    }
    if (auto v = get("net/activation")) c.activation = parse_activation(*v);
    if (auto v = get("net/init")) c.init = parse_init_scheme(*v);
    if (auto v = get("net/base")) c.base.kind = parse_base_kind(*v);
    if (auto v = get("net/base_dim")) c.base.dim = parse_uint("base_dim", *v);
    if (auto v = get("net/include_x0")) c.include_x0 = parse_bool("include_x0", *v);

    auto& t = c.train;
    if (auto v = get("train/K")) t.K = parse_uint("K", *v);
    if (auto v = get("train/M")) t.M = parse_uint("M", *v);
    if (auto v = get("train/M0")) t.M0 = parse_uint("M0", *v);
    if (auto v = get("train/MT")) t.MT = parse_uint("MT", *v);
    if (auto v = get("train/epochs")) t.epochs = parse_uint("epochs", *v);
    if (auto v = get("train/gen_lr")) t.gen_lr = parse_double("gen_lr", *v);
    if (auto v = get("train/adv_lr")) t.adv_lr = parse_double("adv_lr", *v);
    if (auto v = get("train/adv_every")) t.adv_every = parse_uint("adv_every", *v);
    if (auto v = get("train/adv_steps")) t.adv_steps = parse_uint("adv_steps", *v);
    if (auto v = get("train/eps_time")) t.eps_time = parse_double("eps_time", *v);
    if (auto v = get("train/seed")) t.seed = parse_uint("seed", *v);
    if (auto v = get("train/clip")) {
        if (*v == "none" || v->empty())
            t.clip.reset();
        else
            t.clip = parse_double("clip", *v);
    }
    if (auto v = get("train/w_scale")) t.w_scale = parse_double("w_scale", *v);
    if (auto v = get("train/stratified")) t.stratified = parse_bool("stratified", *v);
    if (auto v = get("train/checkpoint_every")) c.checkpoint_every = parse_uint("checkpoint_every", *v);

    if (auto v = get("output/dir")) c.output_dir = *v;
    if (auto v = get("output/samples")) c.samples = parse_uint("samples", *v);
    if (auto v = get("output/sample_times")) {
        c.sample_times.clear();
        for (const auto& s : split_list(*v)) c.sample_times.push_back(parse_double("sample_times", s));
    }
    c.validate();
    return c;
}

inline RunConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

/// Complete INI echo; parse_config(emit_config(c)) reproduces c.
inline std::string emit_config(const RunConfig& c) {
    using namespace detail;
    const auto& t = c.train;
    auto u = [](std::size_t v) { return std::to_string(v); };
    std::ostringstream os;
    os << "[problem]\n"
       << "id = " << c.problem << "\n"
       << "preset = " << c.preset << "\n\n"
       << "[net]\n"
       << "variant = " << to_string(c.variant) << "\n"
       << "hidden = " << join(c.hidden, u) << "\n"
       << "activation = " << to_string(c.activation) << "\n"
       << "init = " << to_string(c.init) << "\n"
       << "base = " << to_string(c.base.kind) << "\n"
       << "base_dim = " << c.base.dim << "\n"
       << "include_x0 = " << (c.include_x0 ? "true" : "false") << "\n\n"
       << "[train]\n"
       << "K = " << t.K << "\n"
       << "M = " << t.M << "\n"
       << "M0 = " << t.M0 << "\n"
       << "MT = " << t.MT << "\n"
       << "epochs = " << t.epochs << "\n"
       << "gen_lr = " << fmt_double(t.gen_lr) << "\n"
       << "adv_lr = " << fmt_double(t.adv_lr) << "\n"
       << "adv_every = " << t.adv_every << "\n"
       << "adv_steps = " << t.adv_steps << "\n"
       << "eps_time = " << fmt_double(t.eps_time) << "\n"
       << "seed = " << t.seed << "\n"
       << "clip = " << (t.clip ? fmt_double(*t.clip) : std::string("none")) << "\n"
       << "w_scale = " << fmt_double(t.w_scale) << "\n"
       << "stratified = " << (t.stratified ? "true" : "false") << "\n"
       << "checkpoint_every = " << c.checkpoint_every << "\n\n"
       << "[output]\n"
       << "dir = " << c.output_dir << "\n"
       << "samples = " << c.samples << "\n"
       << "sample_times = " << join(c.sample_times, [](double v) { return fmt_double(v); }) << "\n";
    return os.str();
}

/// Builds the untrained map for a config. Network weights come from the
/// "net-init" stream of the master seed.
inline PushforwardMap build_map(const RunConfig& c, const FpeProblem& problem) {
    PushforwardMap m;
    m.variant = c.variant;
    m.base = c.base;
    m.n = problem.dim;
    m.include_x0 = c.include_x0;
    if (c.variant == MapVariant::GaussianIcLinearTime) {
        if (problem.reference.kind != ReferenceKind::GaussianMoments)
            throw ConfigError("gaussian_ic_linear_time needs a problem with a Gaussian initial law");
        m.mu0 = problem.reference.mu0;
        m.sigma0 = problem.reference.sigma0;
    }
    std::vector<std::size_t> sizes{m.expected_net_input()};
    sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
    sizes.push_back(problem.dim);
    m.net = init_net(mlp_specs(sizes, c.activation), derive_seed(c.train.seed, "net-init"), c.init);
    m.validate();
    return m;
}

inline PlaneWaveBank build_bank(const RunConfig& c, const FpeProblem& problem) {
    return init_bank(c.train.K, problem.dim, derive_seed(c.train.seed, "bank-init"), c.train.w_scale,
                     problem.time_dependent);
}

}  // namespace wafp
