#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipschitz_lr/dataset.hpp"
#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/lipschitz.hpp"
#include "lipschitz_lr/matrix.hpp"
#include "lipschitz_lr/rng.hpp"

namespace lipschitz_lr {

enum class Activation { Linear, ReLU, Sigmoid, Softmax };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::ReLU;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline LossKind loss_kind_for(Task t) {
    switch (t) {
        case Task::Regression: return LossKind::LeastSquares;
        case Task::Binary: return LossKind::BinaryCrossEntropy;
        case Task::Multiclass: return LossKind::MulticlassCrossEntropy;
    }
    return LossKind::LeastSquares;
}

inline Activation output_activation_for(LossKind k) {
    switch (k) {
        case LossKind::LeastSquares: return Activation::Linear;
        case LossKind::BinaryCrossEntropy: return Activation::Sigmoid;
        case LossKind::MulticlassCrossEntropy: return Activation::Softmax;
    }
    return Activation::Linear;
}

/// One dense layer: z = a·W + b with W of shape (in × out).
struct Layer {
    Matrix weights;
    Vector bias;
    Activation activation = Activation::Linear;
    bool has_bias = true;

    std::size_t in() const noexcept { return weights.rows(); }
    std::size_t out() const noexcept { return weights.cols(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelParams {
    std::vector<Layer> layers;

    std::size_t depth() const noexcept { return layers.size(); }
    std::size_t input_width() const { return layers.front().in(); }
    std::size_t output_width() const { return layers.back().out(); }
    Activation output_activation() const { return layers.back().activation; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + (l.has_bias ? l.bias.size() : 0);
        return n;
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline void validate_chain(std::span<const std::size_t> widths, std::span<const Activation> activations) {
    if (widths.size() < 2) throw ConfigError("model needs an input width and at least one layer");
    if (activations.size() != widths.size() - 1)
        throw ConfigError("need one activation per layer (" + std::to_string(widths.size() - 1) + ")");
    for (auto w : widths)
        if (w == 0) throw ConfigError("layer widths must be at least 1");
    for (std::size_t l = 0; l < activations.size(); ++l) {
        const bool last = l + 1 == activations.size();
        if (activations[l] == Activation::Softmax && !last)
            throw ConfigError("softmax is only supported on the output layer");
        if (last && activations[l] == Activation::Softmax && widths.back() < 2)
            throw ConfigError("softmax output needs at least 2 units");
        if (last && activations[l] == Activation::ReLU) throw ConfigError("relu output layer has no matching loss");
    }
}

/// Weights uniform in [−scale, scale], biases zero.
inline ModelParams init_params(std::span<const std::size_t> widths, std::span<const Activation> activations, Rng& rng,
                               double scale = 0.05, bool has_bias = true) {
    validate_chain(widths, activations);
    if (!(scale >= 0.0)) throw ConfigError("init scale must be non-negative");
    ModelParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer{Matrix(widths[l], widths[l + 1]), Vector(widths[l + 1], 0.0), activations[l], has_bias};
        for (double& w : layer.weights.values()) w = rng.uniform(-scale, scale);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

inline ModelParams init_params(std::initializer_list<std::size_t> widths, std::initializer_list<Activation> activations,
                               Rng& rng, double scale = 0.05, bool has_bias = true) {
    return init_params(std::span(widths.begin(), widths.size()), std::span(activations.begin(), activations.size()),
                       rng, scale, has_bias);
}

// ---------------------------------------------------------------------------
// Activations

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Row-wise softmax with the max subtracted first.
inline Matrix softmax(const Matrix& z) {
    Matrix a(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto in = z.row(r);
        auto out = a.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double s = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) s += out[j] = std::exp(in[j] - mx);
        for (double& v : out) v /= s;
    }
    return a;
}

/// ∂a_j/∂z_p = a_j([p = j] − a_p) for a single softmax output row.
inline Matrix softmax_jacobian(std::span<const double> a) {
    Matrix j(a.size(), a.size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t p = 0; p < a.size(); ++p) j(r, p) = a[r] * ((r == p ? 1.0 : 0.0) - a[p]);
    return j;
}

inline Matrix activate(Activation act, const Matrix& z) {
    if (act == Activation::Softmax) return softmax(z);
    Matrix a = z;
    for (double& v : a.values()) {
        switch (act) {
            case Activation::ReLU: v = v > 0.0 ? v : 0.0; break;
            case Activation::Sigmoid: v = sigmoid(v); break;
            default: break;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct ForwardTrace {
    /// z[l] is the pre-activation of layer l (0-based).
    std::vector<Matrix> z;
    /// a[0] is the input batch; a[l + 1] is the output of layer l.
    std::vector<Matrix> a;

    const Matrix& input() const { return a.front(); }
    /// Activations feeding the output layer; the input itself for single-layer models.
    const Matrix& penultimate() const { return a[a.size() - 2]; }
    const Matrix& output() const { return a.back(); }

    friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

inline ForwardTrace forward(const ModelParams& p, const Matrix& batch) {
    if (p.layers.empty()) throw ConfigError("forward: model has no layers");
    if (batch.cols() != p.input_width())
        throw DimensionError("forward: batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                             std::to_string(p.input_width()));
    ForwardTrace t;
    t.a.push_back(batch);
    for (const auto& layer : p.layers) {
        Matrix z = matmul(t.a.back(), layer.weights);
        if (layer.has_bias)
            for (std::size_t r = 0; r < z.rows(); ++r) add_scaled(z.row(r), layer.bias, 1.0);
        t.a.push_back(activate(layer.activation, z));
        t.z.push_back(std::move(z));
    }
    return t;
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    friend bool operator==(const Gradients&, const Gradients&) = default;
};

/// All weight entries, layer by layer, row-major. Biases are excluded.
inline Vector flatten_weights(const ModelParams& p) {
    Vector w;
    for (const auto& l : p.layers) w.insert(w.end(), l.weights.values().begin(), l.weights.values().end());
    return w;
}

inline double max_weight_norm(const ModelParams& p) {
    double m = 0.0;
    for (const auto& l : p.layers) m = std::max(m, frobenius_norm(l.weights));
    return m;
}

inline void check_output_matches_loss(const ModelParams& p, LossKind kind) {
    if (p.output_activation() != output_activation_for(kind))
        throw ConfigError(std::string("output activation '") + to_string(p.output_activation()) +
                          "' does not match loss '" + to_string(kind) + "'");
}

/// Loss of the traced outputs, including the regularization term.
inline double model_loss(const ModelParams& p, const ForwardTrace& t, const Matrix& targets, const LossSpec& spec,
                         std::size_t m) {
    const Vector w = flatten_weights(p);
    return loss_value(spec, t.output(), targets, w, m);
}

/// Analytic gradients of model_loss. The output delta is (A − Y)/m for each
/// matched (activation, loss) pair; ReLU's derivative at 0 is taken as 0.
inline Gradients backward(const ModelParams& p, const ForwardTrace& t, const Matrix& targets, const LossSpec& spec,
                          std::size_t m) {
    check_output_matches_loss(p, spec.kind);
    if (m == 0) throw DimensionError("backward: m must be at least 1");
    const Matrix& out = t.output();
    if (targets.rows() != out.rows() || targets.cols() != out.cols())
        throw ConfigError("backward: targets are " + std::to_string(targets.rows()) + "x" +
                          std::to_string(targets.cols()) + ", outputs are " + std::to_string(out.rows()) + "x" +
                          std::to_string(out.cols()));

    const std::size_t depth = p.depth();
    Gradients g;
    g.weights.resize(depth);
    g.biases.resize(depth);

    Matrix delta = out;
    add_scaled(delta.values(), targets.values(), -1.0);
    for (double& v : delta.values()) v /= static_cast<double>(m);

    for (std::size_t l = depth; l-- > 0;) {
        const Layer& layer = p.layers[l];
        g.weights[l] = matmul_transpose_a(t.a[l], delta);
        g.biases[l] = Vector(layer.out(), 0.0);
        if (layer.has_bias)
            for (std::size_t r = 0; r < delta.rows(); ++r) add_scaled(g.biases[l], delta.row(r), 1.0);
        if (l == 0) break;

        Matrix prev = matmul_transpose_b(delta, layer.weights);
        const Layer& below = p.layers[l - 1];
        const auto z = t.z[l - 1].values();
        const auto a = t.a[l].values();
        auto d = prev.values();
        for (std::size_t i = 0; i < d.size(); ++i) {
            switch (below.activation) {
                case Activation::ReLU: d[i] = z[i] > 0.0 ? d[i] : 0.0; break;
                case Activation::Sigmoid: d[i] *= a[i] * (1.0 - a[i]); break;
                case Activation::Linear: break;
                case Activation::Softmax: throw ConfigError("softmax hidden layers are not supported");
            }
        }
        delta = std::move(prev);
    }

    if (!std::holds_alternative<NoRegularization>(spec.regularization)) {
        const Vector rg = regularization_gradient(spec.regularization, flatten_weights(p));
        std::size_t off = 0;
        for (auto& gw : g.weights) {
            add_scaled(gw.values(), std::span(rg).subspan(off, gw.size()), 1.0);
            off += gw.size();
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Uniform tensor views for the optimizers. Biases are listed only for layers
// that have them.

inline std::vector<std::span<double>> parameter_tensors(ModelParams& p) {
    std::vector<std::span<double>> out;
    for (auto& l : p.layers) {
        out.push_back(l.weights.values());
        if (l.has_bias) out.push_back(l.bias);
    }
    return out;
}

inline std::vector<std::span<const double>> gradient_tensors(const ModelParams& p, const Gradients& g) {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < p.depth(); ++l) {
        out.push_back(g.weights[l].values());
        if (p.layers[l].has_bias) out.push_back(g.biases[l]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Predictions

/// Class index per row: threshold 0.5 for one output column, argmax otherwise.
inline std::vector<std::size_t> predict_labels(const Matrix& outputs) {
    std::vector<std::size_t> out(outputs.rows());
    for (std::size_t r = 0; r < outputs.rows(); ++r) {
        auto row = outputs.row(r);
        if (row.size() == 1)
            out[r] = row[0] > 0.5 ? 1 : 0;
        else
            out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

inline double accuracy(const Matrix& outputs, std::span<const std::size_t> labels) {
    if (labels.empty()) return 0.0;
    const auto pred = predict_labels(outputs);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Serialization
//
//   lipschitz-lr-params 1
//   layers <count>
//   layer <in> <out> <activation> <has_bias 0|1>
//   <in*out weights, row-major, space separated>
//   <out biases>
//   ...
//
// Numbers use the shortest round-trip form, so save/load is bit-exact.

inline constexpr std::string_view kParamsMagic = "lipschitz-lr-params";
inline constexpr int kParamsVersion = 1;

inline std::string serialize_params(const ModelParams& p) {
    std::ostringstream os;
    os << kParamsMagic << ' ' << kParamsVersion << '\n' << "layers " << p.depth() << '\n';
    const auto write_values = [&](std::span<const double> v) {
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << detail::format_double(v[i]);
        os << '\n';
    };
    for (const auto& l : p.layers) {
        os << "layer " << l.in() << ' ' << l.out() << ' ' << to_string(l.activation) << ' ' << (l.has_bias ? 1 : 0)
           << '\n';
        write_values(l.weights.values());
        write_values(l.bias);
    }
    return os.str();
}

inline ModelParams deserialize_params(const std::string& text) {
    std::istringstream is(text);
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != kParamsMagic) throw ParseError("not a parameter file", 1);
    if (version != kParamsVersion) throw ParseError("unsupported parameter format version " + std::to_string(version), 1);
    std::string word;
    std::size_t count = 0;
    if (!(is >> word >> count) || word != "layers") throw ParseError("expected 'layers <count>'", 2);
    const auto read_double = [&](std::size_t layer) {
        std::string tok;
        double v;
        if (!(is >> tok) || !detail::parse_double(tok, v))
            throw ParseError("bad number in layer " + std::to_string(layer), 0);
        return v;
    };
    ModelParams p;
    for (std::size_t l = 0; l < count; ++l) {
        std::size_t in = 0, out = 0;
        std::string act;
        int bias = 0;
        if (!(is >> word >> in >> out >> act >> bias) || word != "layer")
            throw ParseError("bad header for layer " + std::to_string(l), 0);
        Layer layer{Matrix(in, out), Vector(out), parse_activation(act), bias != 0};
        for (double& v : layer.weights.values()) v = read_double(l);
        for (double& v : layer.bias) v = read_double(l);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

inline void save_params(const ModelParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << serialize_params(p);
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_params(ss.str());
}

/// FNV-1a over shapes, flags and the bit patterns of every value.
inline std::uint64_t params_checksum(const ModelParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& l : p.layers) {
        mix(l.in());
        mix(l.out());
        mix(static_cast<std::uint64_t>(l.activation));
        mix(l.has_bias);
        for (double v : l.weights.values()) mix(std::bit_cast<std::uint64_t>(v));
        for (double v : l.bias) mix(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}  // namespace lipschitz_lr
