#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lipschitz_lr/dataset.hpp"
#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/lipschitz.hpp"
#include "lipschitz_lr/matrix.hpp"
#include "lipschitz_lr/model.hpp"

namespace lipschitz_lr {

enum class OptimizerKind { Sgd, AdaMo, AdaRmsProp, AutoAdam };

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::AdaMo: return "adamo";
        case OptimizerKind::AdaRmsProp: return "adarmsprop";
        case OptimizerKind::AutoAdam: return "autoadam";
    }
    return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adamo") return OptimizerKind::AdaMo;
    if (s == "adarmsprop") return OptimizerKind::AdaRmsProp;
    if (s == "autoadam") return OptimizerKind::AutoAdam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

/// Which counter the 1 − β^t divisor uses.
enum class BiasCorrection { Off, Epoch, Step };

inline BiasCorrection parse_bias_correction(std::string_view s) {
    if (s == "off") return BiasCorrection::Off;
    if (s == "epoch") return BiasCorrection::Epoch;
    if (s == "step") return BiasCorrection::Step;
    throw ConfigError("unknown bias correction mode '" + std::string(s) + "'");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    /// AdaMo and AdaRmsProp decay.
    double beta = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    BiasCorrection bias_correction = BiasCorrection::Off;
    /// AdaMo: learning rate used for every step of epoch 1 instead of 1/K.
    std::optional<double> adamo_first_epoch_lr = 0.1;
    /// AdaRmsProp: in epoch 1, a step factor above the trigger is replaced
    /// by the fallback rate.
    std::optional<double> rmsprop_fallback_lr = 1e-3;
    double rmsprop_fallback_trigger = 10.0;
    /// Auto-Adam with K₁ and K₂ pinned instead of tracked.
    bool autoadam_fixed = false;
    double fixed_k1 = 1.0;
    double fixed_k2 = 1e-6;
};

inline void validate(const OptimizerConfig& c) {
    const auto beta_ok = [](double b) { return b >= 0.0 && b < 1.0; };
    if (!beta_ok(c.beta) || !beta_ok(c.beta1) || !beta_ok(c.beta2)) throw ConfigError("betas must lie in [0, 1)");
    if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (c.adamo_first_epoch_lr && !(*c.adamo_first_epoch_lr > 0.0))
        throw ConfigError("AdaMo first-epoch rate must be positive");
    if (c.rmsprop_fallback_lr && !(*c.rmsprop_fallback_lr > 0.0))
        throw ConfigError("RMSprop fallback rate must be positive");
}

struct OptimizerState {
    OptimizerConfig config;
    /// EWA of gradients, one entry per parameter tensor.
    std::vector<Vector> velocity;
    /// EWA of squared gradients.
    std::vector<Vector> accumulator;
    double K = 0.0;
    double K1 = 0.0;
    double K2 = 0.0;
    std::size_t step = 0;
    /// 1-based epoch counter maintained by the caller.
    std::size_t epoch = 1;
    /// Set when a first-epoch override replaced the computed step factor.
    bool override_applied = false;

    explicit OptimizerState(OptimizerConfig c = {}) : config(c) { validate(config); }
};

/// What a step did: the scalar multiplying the update direction, and the
/// gradient norm it saw.
struct StepInfo {
    double lr = 0.0;
    double grad_norm = 0.0;
    bool override_applied = false;
};

using ParamTensors = std::vector<std::span<double>>;
using GradTensors = std::vector<std::span<const double>>;

// ---------------------------------------------------------------------------
// Tensor helpers

/// max over tensors of the Frobenius norm.
inline double max_tensor_norm(const GradTensors& g) {
    double m = 0.0;
    for (auto t : g) {
        double s = 0.0;
        for (double v : t) s += v * v;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

/// max over tensors of the Frobenius norm of the element-wise square.
inline double max_squared_tensor_norm(const GradTensors& g) {
    double m = 0.0;
    for (auto t : g) {
        double s = 0.0;
        for (double v : t) s += v * v * v * v;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

namespace detail {

inline void check_shapes(const ParamTensors& p, const GradTensors& g) {
    if (p.size() != g.size()) throw DimensionError("optimizer: parameter and gradient tensor counts differ");
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i].size() != g[i].size()) throw DimensionError("optimizer: tensor " + std::to_string(i) + " shape mismatch");
    for (auto t : g)
        if (!all_finite(t)) throw DivergenceError("non-finite gradient");
}

inline void ensure_buffers(std::vector<Vector>& buf, const GradTensors& g) {
    if (buf.empty()) {
        for (auto t : g) buf.emplace_back(t.size(), 0.0);
        return;
    }
    if (buf.size() != g.size()) throw DimensionError("optimizer: state was built for a different model");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (buf[i].size() != g[i].size()) throw DimensionError("optimizer: state was built for a different model");
}

inline void ewa(std::vector<Vector>& buf, const GradTensors& g, double beta, bool squared) {
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g[i].size(); ++j) {
            const double x = squared ? g[i][j] * g[i][j] : g[i][j];
            buf[i][j] = beta * buf[i][j] + (1.0 - beta) * x;
        }
}

inline void check_finite_params(const ParamTensors& p) {
    for (auto t : p)
        if (!all_finite(t)) throw DivergenceError("parameters became non-finite");
}

}  // namespace detail

/// 1 − β^t for the configured counter; 1 when correction is off.
inline double bias_correction_divisor(const OptimizerState& s, double beta) {
    switch (s.config.bias_correction) {
        case BiasCorrection::Off: return 1.0;
        case BiasCorrection::Epoch: return 1.0 - std::pow(beta, static_cast<double>(s.epoch));
        case BiasCorrection::Step: return 1.0 - std::pow(beta, static_cast<double>(s.step));
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// Steps

/// w ← w − α∇ on every tensor.
inline void sgd_step(const ParamTensors& p, const GradTensors& g, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DivergenceError("learning rate must be positive and finite");
    detail::check_shapes(p, g);
    for (std::size_t i = 0; i < p.size(); ++i) add_scaled(p[i], g[i], -alpha);
    detail::check_finite_params(p);
}

inline void sgd_step(ModelParams& p, const Gradients& g, const LipschitzEstimate& est) {
    sgd_step(parameter_tensors(p), gradient_tensors(p, g), est.alpha);
}

inline void sgd_step(ModelParams& p, const Gradients& g, double alpha) {
    sgd_step(parameter_tensors(p), gradient_tensors(p, g), alpha);
}

/// V ← βV + (1−β)∇;  K ← βK + (1−β)max‖∇‖;  W ← W − V/K.
inline StepInfo adamo_step(OptimizerState& s, const ParamTensors& p, const GradTensors& g) {
    detail::check_shapes(p, g);
    detail::ensure_buffers(s.velocity, g);
    const double beta = s.config.beta;
    ++s.step;
    detail::ewa(s.velocity, g, beta, false);
    const double gn = max_tensor_norm(g);
    s.K = beta * s.K + (1.0 - beta) * gn;

    const double corr = bias_correction_divisor(s, beta);
    StepInfo info{0.0, gn, false};
    if (s.epoch == 1 && s.config.adamo_first_epoch_lr) {
        info.lr = *s.config.adamo_first_epoch_lr;
        info.override_applied = true;
    } else {
        if (!(s.K > 0.0)) throw DegenerateError("AdaMo: Lipschitz tracker K is zero (all gradients vanished)");
        info.lr = 1.0 / (s.K / corr);
    }
    s.override_applied = info.override_applied;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[i].size(); ++j) p[i][j] -= info.lr * s.velocity[i][j] / corr;
    detail::check_finite_params(p);
    return info;
}

/// S ← βS + (1−β)∇²;  K ← βK + (1−β)max‖∇²‖;
/// W ← W − ((√K + ε)/max‖∇‖)·∇/(√S + ε).
inline StepInfo adarmsprop_step(OptimizerState& s, const ParamTensors& p, const GradTensors& g) {
    detail::check_shapes(p, g);
    detail::ensure_buffers(s.accumulator, g);
    const double beta = s.config.beta, eps = s.config.epsilon;
    ++s.step;
    detail::ewa(s.accumulator, g, beta, true);
    s.K = beta * s.K + (1.0 - beta) * max_squared_tensor_norm(g);
    const double gn = max_tensor_norm(g);
    if (!(gn > 0.0)) throw DegenerateError("adaptive RMSprop: gradient norm is zero");

    const double corr = bias_correction_divisor(s, beta);
    StepInfo info{(std::sqrt(s.K / corr) + eps) / gn, gn, false};
    if (s.epoch == 1 && s.config.rmsprop_fallback_lr && info.lr > s.config.rmsprop_fallback_trigger) {
        info.lr = *s.config.rmsprop_fallback_lr;
        info.override_applied = true;
    }
    s.override_applied = info.override_applied;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[i].size(); ++j)
            p[i][j] -= info.lr * g[i][j] / (std::sqrt(s.accumulator[i][j] / corr) + eps);
    detail::check_finite_params(p);
    return info;
}

/// Estimate of (max‖∇‖)² for classification:
/// ((k−1)²/(k²m²))·K_z² + λ²·(max‖w‖)².
inline double autoadam_k2_feed(double kz, std::size_t k, std::size_t m, double lambda, double max_w) {
    if (k < 2) throw InvalidClassCountError("Auto-Adam estimate needs k >= 2");
    if (m == 0) throw DimensionError("Auto-Adam estimate needs m >= 1");
    const double kd = static_cast<double>(k), md = static_cast<double>(m);
    return (kd - 1.0) * (kd - 1.0) / (kd * kd * md * md) * kz * kz + lambda * lambda * max_w * max_w;
}

/// V, S as in Adam; K₁ tracks max‖∇‖, K₂ tracks `k2_feed`;
/// W ← W − ((√K₂ + ε)/K₁)·V/(√S + ε).
inline StepInfo autoadam_step(OptimizerState& s, const ParamTensors& p, const GradTensors& g, double k2_feed) {
    detail::check_shapes(p, g);
    detail::ensure_buffers(s.velocity, g);
    detail::ensure_buffers(s.accumulator, g);
    const double b1 = s.config.beta1, b2 = s.config.beta2, eps = s.config.epsilon;
    ++s.step;
    detail::ewa(s.velocity, g, b1, false);
    detail::ewa(s.accumulator, g, b2, true);
    const double gn = max_tensor_norm(g);
    if (s.config.autoadam_fixed) {
        s.K1 = s.config.fixed_k1;
        s.K2 = s.config.fixed_k2;
    } else {
        s.K1 = b1 * s.K1 + (1.0 - b1) * gn;
        s.K2 = b2 * s.K2 + (1.0 - b2) * k2_feed;
    }
    const double c1 = s.config.autoadam_fixed ? 1.0 : bias_correction_divisor(s, b1);
    const double c2 = s.config.autoadam_fixed ? 1.0 : bias_correction_divisor(s, b2);
    if (!(s.K1 > 0.0)) throw DegenerateError("Auto-Adam: K1 is zero (all gradients vanished)");
    StepInfo info{(std::sqrt(s.K2 / c2) + eps) / (s.K1 / c1), gn, false};
    const double v1 = bias_correction_divisor(s, b1), v2 = bias_correction_divisor(s, b2);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[i].size(); ++j)
            p[i][j] -= info.lr * (s.velocity[i][j] / v1) / (std::sqrt(s.accumulator[i][j] / v2) + eps);
    detail::check_finite_params(p);
    return info;
}

inline StepInfo autoadam_step(OptimizerState& s, const ParamTensors& p, const GradTensors& g, double kz,
                              std::size_t k, std::size_t m, double lambda, double max_w) {
    return autoadam_step(s, p, g, autoadam_k2_feed(kz, k, m, lambda, max_w));
}

inline StepInfo adamo_step(OptimizerState& s, ModelParams& p, const Gradients& g) {
    return adamo_step(s, parameter_tensors(p), gradient_tensors(p, g));
}

inline StepInfo adarmsprop_step(OptimizerState& s, ModelParams& p, const Gradients& g) {
    return adarmsprop_step(s, parameter_tensors(p), gradient_tensors(p, g));
}

inline StepInfo autoadam_step(OptimizerState& s, ModelParams& p, const Gradients& g, double kz, std::size_t k,
                              std::size_t m, double lambda, double max_w) {
    return autoadam_step(s, parameter_tensors(p), gradient_tensors(p, g), kz, k, m, lambda, max_w);
}

// ---------------------------------------------------------------------------
// Per-epoch learning-rate recomputation

struct LrTrace {
    std::vector<std::size_t> epoch;
    std::vector<double> lr;
    std::vector<double> kz;
    std::vector<double> max_w;
    std::vector<double> L;

    std::size_t size() const noexcept { return epoch.size(); }

    void push(std::size_t e, double rate, double k_z, double mw, double l) {
        epoch.push_back(e);
        lr.push_back(rate);
        kz.push_back(k_z);
        max_w.push_back(mw);
        L.push_back(l);
    }

    bool all_rates_valid() const {
        return std::all_of(lr.begin(), lr.end(), [](double r) { return r > 0.0 && std::isfinite(r); });
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << "epoch,lr,kz,max_w,L\n";
        for (std::size_t i = 0; i < size(); ++i)
            out << epoch[i] << ',' << detail::format_double(lr[i]) << ',' << detail::format_double(kz[i]) << ','
                << detail::format_double(max_w[i]) << ',' << detail::format_double(L[i]) << '\n';
        if (!out) throw IoError("write failed for '" + path + "'");
    }
};

/// Output of every layer except the last; the batch itself for single-layer models.
inline Matrix penultimate_activations(const ModelParams& p, const Matrix& batch) {
    if (batch.cols() != p.input_width()) throw DimensionError("penultimate_activations: batch width mismatch");
    Matrix a = batch;
    for (std::size_t l = 0; l + 1 < p.depth(); ++l) {
        const Layer& layer = p.layers[l];
        Matrix z = matmul(a, layer.weights);
        if (layer.has_bias)
            for (std::size_t r = 0; r < z.rows(); ++r) add_scaled(z.row(r), layer.bias, 1.0);
        a = activate(layer.activation, z);
    }
    return a;
}

/// Lipschitz estimate from the penultimate activations and targets of each
/// batch. K_z is the largest per-batch Frobenius norm and m the nominal batch
/// size. Regression without hidden layers uses the least-squares constant
/// (largest over batches) with weight bound K; with hidden layers it uses
/// K_a = K·K_z. The regularization increment is taken at the current max‖w‖.
inline LipschitzEstimate estimate_from_batches(const ModelParams& p, std::span<const Matrix> penultimates,
                                               std::span<const Matrix> targets, const LossSpec& spec, std::size_t k,
                                               double K, std::size_t m) {
    if (penultimates.empty()) throw DimensionError("no batches to estimate from");
    if (penultimates.size() != targets.size()) throw DimensionError("batch and target counts differ");
    check_output_matches_loss(p, spec.kind);
    double kz = 0.0;
    for (const auto& a : penultimates) kz = std::max(kz, compute_kz(a));
    if (!(kz > 0.0))
        throw DegenerateError("penultimate activations are all zero (K_z = 0); use a first-epoch learning-rate "
                              "override or a different initialization");
    const double max_w = max_weight_norm(p);

    LipschitzEstimate est;
    switch (spec.kind) {
        case LossKind::LeastSquares:
            if (p.depth() == 1) {
                for (std::size_t b = 0; b < penultimates.size(); ++b) {
                    if (targets[b].cols() != 1) throw DimensionError("least-squares constant expects one target column");
                    auto e = lc_linear_regression(penultimates[b], targets[b].values(), K, m);
                    if (b == 0 || e.base > est.base) est = e;
                }
            } else {
                double ny = 0.0;
                for (const auto& t : targets) ny = std::max(ny, frobenius_norm(t));
                est = lc_nn_regression(K * kz, ny, kz, m);
                est.ingredients.K = K;
            }
            break;
        case LossKind::BinaryCrossEntropy:
            est = lc_binary(kz, m);
            break;
        case LossKind::MulticlassCrossEntropy:
            est = lc_multiclass(kz, k, m);
            break;
    }
    est.ingredients.K_z = kz;
    est.ingredients.max_w = max_w;
    est.ingredients.k = k;
    est.ingredients.m = m;
    return with_regularization(est, spec.regularization, max_w);
}

/// Recomputes the estimate for `batches` (row-index lists into `d`) at the
/// current parameters and appends it to `trace` under `epoch`.
inline LipschitzEstimate epoch_lr_recompute(const ModelParams& p, const Dataset& d,
                                            std::span<const std::vector<std::size_t>> batches, const LossSpec& spec,
                                            double K, std::size_t m, LrTrace* trace = nullptr, std::size_t epoch = 0) {
    std::vector<Matrix> pen, tgt;
    for (const auto& b : batches) {
        pen.push_back(penultimate_activations(p, select_rows(d.features, b)));
        tgt.push_back(select_rows(d.targets, b));
    }
    auto est = estimate_from_batches(p, pen, tgt, spec, d.class_count(), K, m);
    if (trace) trace->push(epoch, est.alpha, est.ingredients.K_z, est.ingredients.max_w, est.L);
    return est;
}

/// Full-batch convenience form.
inline LipschitzEstimate epoch_lr_recompute(const ModelParams& p, const Dataset& d, const LossSpec& spec, double K) {
    std::vector<std::vector<std::size_t>> all(1);
    for (std::size_t i = 0; i < d.examples(); ++i) all[0].push_back(i);
    return epoch_lr_recompute(p, d, all, spec, K, d.examples());
}

}  // namespace lipschitz_lr
