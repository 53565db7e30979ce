#pragma once

// Dense feedforward networks with a hand-written reverse pass.
//
// Parameters live in one flat vector, laid out layer by layer as the
// row-major weight matrix (out_dim x in_dim) followed by the bias vector.
// Optimizers act on that vector directly.

#include "wafp/common.hpp"
#include "wafp/rng.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace wafp {

enum class Activation { Tanh, SiLU, Sine, Identity };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::SiLU: return "silu";
        case Activation::Sine: return "sine";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "silu") return Activation::SiLU;
    if (s == "sine") return Activation::Sine;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "' (expected tanh, silu, sine, identity)");
}

struct LayerSpec {
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;
    Activation activation = Activation::Tanh;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Hidden layers use `hidden`, the output layer is affine.
inline std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& sizes, Activation hidden) {
    if (sizes.size() < 2) throw ConfigError("network needs at least an input and an output size");
    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const bool last = i + 2 == sizes.size();
        specs.push_back({sizes[i], sizes[i + 1], last ? Activation::Identity : hidden});
    }
    return specs;
}

struct ParamLayout {
    std::vector<std::size_t> weight_offset;
    std::vector<std::size_t> bias_offset;
    std::size_t total = 0;

    friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

inline void check_chain(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw ConfigError("network has no layers");
    for (std::size_t l = 0; l < specs.size(); ++l) {
        if (specs[l].in_dim == 0 || specs[l].out_dim == 0)
            throw ConfigError("layer " + std::to_string(l) + " has a zero dimension");
        if (l > 0 && specs[l - 1].out_dim != specs[l].in_dim)
            throw ConfigError("layer " + std::to_string(l - 1) + " out_dim " + std::to_string(specs[l - 1].out_dim) +
                              " does not match layer " + std::to_string(l) + " in_dim " +
                              std::to_string(specs[l].in_dim));
    }
}

inline ParamLayout make_layout(const std::vector<LayerSpec>& specs) {
    ParamLayout layout;
    std::size_t off = 0;
    for (const auto& s : specs) {
        layout.weight_offset.push_back(off);
        off += s.in_dim * s.out_dim;
        layout.bias_offset.push_back(off);
        off += s.out_dim;
    }
    layout.total = off;
    return layout;
}

/// Gradient congruent with a network's flat parameter vector.
struct FlatGrad {
    Vector values;
    ParamLayout layout;
};

class FeedforwardNet {
public:
    using WeightMap = Eigen::Map<RowMatrix>;
    using ConstWeightMap = Eigen::Map<const RowMatrix>;

    FeedforwardNet() = default;

    explicit FeedforwardNet(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
        check_chain(specs_);
        layout_ = make_layout(specs_);
        params_ = Vector::Zero(static_cast<Eigen::Index>(layout_.total));
    }

    const std::vector<LayerSpec>& layers() const { return specs_; }
    std::size_t depth() const { return specs_.size(); }
    std::size_t in_dim() const { return specs_.front().in_dim; }
    std::size_t out_dim() const { return specs_.back().out_dim; }
    std::size_t parameter_count() const { return layout_.total; }
    const ParamLayout& layout() const { return layout_; }

    const Vector& parameters() const { return params_; }

    void set_parameters(const Vector& p) {
        if (static_cast<std::size_t>(p.size()) != layout_.total)
            throw ShapeError("parameter vector has length " + std::to_string(p.size()) + ", net expects " +
                             std::to_string(layout_.total));
        if (!p.allFinite()) throw NumericError("non-finite network parameter");
        params_ = p;
    }

    /// Direct access for in-place optimizer updates; length must not change.
    Vector& mutable_parameters() { return params_; }

    ConstWeightMap weight(std::size_t l) const {
        return {params_.data() + layout_.weight_offset[l], static_cast<Eigen::Index>(specs_[l].out_dim),
                static_cast<Eigen::Index>(specs_[l].in_dim)};
    }
    WeightMap weight(std::size_t l) {
        return {params_.data() + layout_.weight_offset[l], static_cast<Eigen::Index>(specs_[l].out_dim),
                static_cast<Eigen::Index>(specs_[l].in_dim)};
    }
    Eigen::Map<const Vector> bias(std::size_t l) const {
        return {params_.data() + layout_.bias_offset[l], static_cast<Eigen::Index>(specs_[l].out_dim)};
    }
    Eigen::Map<Vector> bias(std::size_t l) {
        return {params_.data() + layout_.bias_offset[l], static_cast<Eigen::Index>(specs_[l].out_dim)};
    }

    friend bool operator==(const FeedforwardNet& a, const FeedforwardNet& b) {
        return a.specs_ == b.specs_ && a.params_.size() == b.params_.size() &&
               (a.params_.array() == b.params_.array()).all();
    }

private:
    std::vector<LayerSpec> specs_;
    ParamLayout layout_;
    Vector params_;
};

inline Vector flatten(const FeedforwardNet& net) { return net.parameters(); }

inline FeedforwardNet unflatten(const std::vector<LayerSpec>& specs, const Vector& flat) {
    FeedforwardNet net(specs);
    net.set_parameters(flat);
    return net;
}

enum class InitScheme { XavierUniform, ScaledNormal };

inline InitScheme parse_init_scheme(const std::string& s) {
    if (s == "xavier_uniform") return InitScheme::XavierUniform;
    if (s == "scaled_normal") return InitScheme::ScaledNormal;
    throw ConfigError("unknown init scheme '" + s + "' (expected xavier_uniform, scaled_normal)");
}

inline std::string to_string(InitScheme s) {
    return s == InitScheme::XavierUniform ? "xavier_uniform" : "scaled_normal";
}

/// Weights ~ U(-g*sqrt(6/(in+out)), +) for XavierUniform, N(0, g^2/in) for
/// ScaledNormal, with g = `gain`. Biases are zero.
inline FeedforwardNet init_net(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                               InitScheme scheme = InitScheme::XavierUniform, double gain = 1.0) {
    FeedforwardNet net(specs);
    Engine eng = make_engine(seed, "init_net");
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const double fan_in = static_cast<double>(specs[l].in_dim);
        const double fan_out = static_cast<double>(specs[l].out_dim);
        auto w = net.weight(l);
        if (scheme == InitScheme::XavierUniform) {
            const double bound = gain * std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound == 0.0 ? 0.0 : dist(eng);
        } else {
            std::normal_distribution<double> dist(0.0, 1.0);
            const double sd = gain / std::sqrt(fan_in);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = sd * dist(eng);
        }
    }
    return net;
}

/// Activations recorded by `forward`: values[0] is the input batch,
/// values[l+1] the post-activation of layer l, pre[l] its pre-activation.
struct ForwardTape {
    std::vector<RowMatrix> pre;
    std::vector<RowMatrix> values;
    std::size_t batch_size = 0;
};

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void activate(Activation a, const RowMatrix& pre, RowMatrix& post) {
    switch (a) {
        case Activation::Tanh: post = pre.array().tanh(); break;
        case Activation::SiLU: post = pre.unaryExpr([](double z) { return z * logistic(z); }); break;
        case Activation::Sine: post = pre.unaryExpr([](double z) { return std::sin(z); }); break;
        case Activation::Identity: post = pre; break;
    }
}

// Multiplies `grad` in place by the activation derivative.
inline void activation_backward(Activation a, const RowMatrix& pre, const RowMatrix& post, RowMatrix& grad) {
    switch (a) {
        case Activation::Tanh: grad.array() *= 1.0 - post.array().square(); break;
        case Activation::SiLU:
            grad.array() *= pre.unaryExpr([](double z) {
                                   const double s = logistic(z);
                                   return s * (1.0 + z * (1.0 - s));
                               }).array();
            break;
        case Activation::Sine: grad.array() *= pre.unaryExpr([](double z) { return std::cos(z); }).array(); break;
        case Activation::Identity: break;
    }
}

}  // namespace detail

inline RowMatrix forward(const FeedforwardNet& net, const RowMatrix& batch, ForwardTape* tape) {
    if (static_cast<std::size_t>(batch.cols()) != net.in_dim())
        throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match net input dim " +
                         std::to_string(net.in_dim()));
    if (!batch.allFinite()) throw InputError("non-finite entry in network input batch");

    RowMatrix current = batch;
    if (tape) {
        tape->pre.clear();
        tape->values.clear();
        tape->batch_size = static_cast<std::size_t>(batch.rows());
        tape->values.push_back(batch);
    }
    for (std::size_t l = 0; l < net.depth(); ++l) {
        RowMatrix pre = current * net.weight(l).transpose();
        pre.rowwise() += net.bias(l).transpose();
        RowMatrix post;
        detail::activate(net.layers()[l].activation, pre, post);
        if (tape) {
            tape->pre.push_back(std::move(pre));
            tape->values.push_back(post);
        }
        current = std::move(post);
    }
    return current;
}

struct ForwardResult {
    RowMatrix outputs;
    ForwardTape tape;
};

inline ForwardResult forward(const FeedforwardNet& net, const RowMatrix& batch) {
    ForwardResult r;
    r.outputs = forward(net, batch, &r.tape);
    return r;
}

struct VjpResult {
    FlatGrad param_grad;
    RowMatrix input_cotangents;
};

/// Sums (d outputs / d params)^T v over the batch and returns per-row input
/// cotangents (d output / d input)^T v.
inline VjpResult vjp(const FeedforwardNet& net, const ForwardTape& tape, const RowMatrix& cotangents) {
    if (tape.pre.size() != net.depth() || tape.values.size() != net.depth() + 1)
        throw ContractError("tape layer count does not match network depth");
    if (static_cast<std::size_t>(cotangents.rows()) != tape.batch_size ||
        static_cast<std::size_t>(cotangents.cols()) != net.out_dim())
        throw ContractError("cotangent shape does not match network output");
    for (std::size_t l = 0; l < net.depth(); ++l) {
        if (static_cast<std::size_t>(tape.pre[l].cols()) != net.layers()[l].out_dim ||
            static_cast<std::size_t>(tape.values[l].cols()) != net.layers()[l].in_dim)
            throw ContractError("tape shapes do not match layer " + std::to_string(l));
    }

    VjpResult out;
    out.param_grad.layout = net.layout();
    out.param_grad.values = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));

    RowMatrix grad = cotangents;
    for (std::size_t l = net.depth(); l-- > 0;) {
        detail::activation_backward(net.layers()[l].activation, tape.pre[l], tape.values[l + 1], grad);
        const auto& spec = net.layers()[l];
        Eigen::Map<RowMatrix> gw(out.param_grad.values.data() + net.layout().weight_offset[l],
                                 static_cast<Eigen::Index>(spec.out_dim), static_cast<Eigen::Index>(spec.in_dim));
        gw.noalias() = grad.transpose() * tape.values[l];
        Eigen::Map<Vector> gb(out.param_grad.values.data() + net.layout().bias_offset[l],
                              static_cast<Eigen::Index>(spec.out_dim));
        gb = grad.colwise().sum().transpose();
        RowMatrix next = grad * net.weight(l);
        grad = std::move(next);
    }
    out.input_cotangents = std::move(grad);
    return out;
}

// Text serialization:
//   wafp-net 1
//   <layer count>
//   <in_dim> <out_dim> <activation>     (one line per layer)
//   then for each layer: out_dim*in_dim row-major weights, then out_dim biases,
//   one value per line at 17 significant digits.
inline void write_net(std::ostream& os, const FeedforwardNet& net) {
    os << "wafp-net 1\n" << net.depth() << '\n';
    for (const auto& s : net.layers()) os << s.in_dim << ' ' << s.out_dim << ' ' << to_string(s.activation) << '\n';
    os << std::setprecision(17);
    const auto& p = net.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) os << p[i] << '\n';
}

inline FeedforwardNet read_net(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "wafp-net" || version != 1)
        throw IoError("not a wafp-net version 1 stream");
    std::size_t depth = 0;
    if (!(is >> depth) || depth == 0) throw IoError("bad layer count in net file");
    std::vector<LayerSpec> specs(depth);
    for (auto& s : specs) {
        std::string act;
        if (!(is >> s.in_dim >> s.out_dim >> act)) throw IoError("truncated layer spec in net file");
        s.activation = parse_activation(act);
    }
    FeedforwardNet net(specs);
    Vector p(static_cast<Eigen::Index>(net.parameter_count()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        std::string tok;
        if (!(is >> tok)) throw IoError("truncated parameter list in net file");
        p[i] = std::stod(tok);
    }
    net.set_parameters(p);
    return net;
}

}  // namespace wafp
