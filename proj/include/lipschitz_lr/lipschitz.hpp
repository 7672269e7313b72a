#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>

#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/matrix.hpp"

namespace lipschitz_lr {

enum class LossKind { LeastSquares, BinaryCrossEntropy, MulticlassCrossEntropy };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::LeastSquares: return "least-squares";
        case LossKind::BinaryCrossEntropy: return "binary-ce";
        case LossKind::MulticlassCrossEntropy: return "multiclass-ce";
    }
    return "?";
}

struct NoRegularization {
    friend bool operator==(const NoRegularization&, const NoRegularization&) = default;
};

/// (λ/2)‖w‖² penalty.
struct L2 {
    double lambda = 0.0;
    friend bool operator==(const L2&, const L2&) = default;
};

/// ‖Γw‖² penalty; Γ is square with side equal to the weight count.
struct Tikhonov {
    Matrix gamma;
    friend bool operator==(const Tikhonov&, const Tikhonov&) = default;
};

using Regularization = std::variant<NoRegularization, L2, Tikhonov>;

struct LossSpec {
    LossKind kind = LossKind::LeastSquares;
    Regularization regularization = NoRegularization{};
};

/// Quantities that went into an estimate. Unused ones stay 0.
struct LipschitzIngredients {
    double K = 0.0;
    double K_z = 0.0;
    double K_a = 0.0;
    double norm_X = 0.0;
    double norm_y = 0.0;
    std::size_t m = 0;
    std::size_t k = 0;
    double max_w = 0.0;
};

struct LipschitzEstimate {
    double L = 0.0;
    double alpha = 0.0;
    /// Loss constant without regularization; L = base + reg_increment.
    double base = 0.0;
    double reg_increment = 0.0;
    LipschitzIngredients ingredients;
};

namespace detail {

inline LipschitzEstimate finish_estimate(double base, const LipschitzIngredients& ing) {
    if (!(base > 0.0) || !std::isfinite(base))
        throw DegenerateError("Lipschitz constant is " + std::to_string(base) + "; learning rate would be undefined");
    LipschitzEstimate e;
    e.base = base;
    e.L = base;
    e.alpha = 1.0 / base;
    e.ingredients = ing;
    return e;
}

inline void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidBoundError(std::string(name) + " must be positive and finite, got " + std::to_string(v));
}

inline void require_batch(std::size_t m) {
    if (m == 0) throw DimensionError("batch size m must be at least 1");
}

}  // namespace detail

/// L = (K/m)‖XᵀX‖_F + (1/m)‖yᵀX‖₂
inline LipschitzEstimate lc_linear_regression(const Matrix& x, std::span<const double> y, double K, std::size_t m) {
    detail::require_positive(K, "K");
    detail::require_batch(m);
    if (x.rows() != y.size()) throw DimensionError("lc_linear_regression: X rows differ from y length");
    const Matrix xtx = matmul_transpose_a(x, x);
    const Matrix ytx = matmul_transpose_a(Matrix::column(y), x);
    const double md = static_cast<double>(m);
    LipschitzIngredients ing;
    ing.K = K;
    ing.norm_X = frobenius_norm(x);
    ing.norm_y = vector_2norm(y);
    ing.m = m;
    return detail::finish_estimate(K / md * frobenius_norm(xtx) + vector_2norm(ytx.values()) / md, ing);
}

/// L = (1/m)(K_a + ‖y‖)·K_z
inline LipschitzEstimate lc_nn_regression(double K_a, double norm_y, double K_z, std::size_t m) {
    detail::require_positive(K_a, "K_a");
    detail::require_positive(K_z, "K_z");
    detail::require_batch(m);
    if (!(norm_y >= 0.0)) throw InvalidBoundError("target norm must be non-negative");
    LipschitzIngredients ing;
    ing.K_a = K_a;
    ing.K_z = K_z;
    ing.norm_y = norm_y;
    ing.m = m;
    return detail::finish_estimate((K_a + norm_y) * K_z / static_cast<double>(m), ing);
}

inline LipschitzEstimate lc_nn_regression(double K_a, std::span<const double> y, double K_z, std::size_t m) {
    return lc_nn_regression(K_a, vector_2norm(y), K_z, m);
}

/// L = K_z / (2m)
inline LipschitzEstimate lc_binary(double K_z, std::size_t m) {
    detail::require_positive(K_z, "K_z");
    detail::require_batch(m);
    LipschitzIngredients ing;
    ing.K_z = K_z;
    ing.m = m;
    ing.k = 2;
    return detail::finish_estimate(K_z / (2.0 * static_cast<double>(m)), ing);
}

/// L = (k−1)/(km) · K_z
inline LipschitzEstimate lc_multiclass(double K_z, std::size_t k, std::size_t m) {
    if (k < 2) throw InvalidClassCountError("multiclass constant needs k >= 2, got " + std::to_string(k));
    detail::require_positive(K_z, "K_z");
    detail::require_batch(m);
    LipschitzIngredients ing;
    ing.K_z = K_z;
    ing.m = m;
    ing.k = k;
    const double kd = static_cast<double>(k);
    return detail::finish_estimate((kd - 1.0) * K_z / (kd * static_cast<double>(m)), ing);
}

/// None → 0, L2 → λK, Tikhonov → 2K‖ΓΓ‖_F. K = 0 is accepted and yields 0.
inline double reg_increment(const Regularization& reg, double K) {
    if (!(K >= 0.0) || !std::isfinite(K)) throw InvalidBoundError("K must be non-negative and finite");
    if (const auto* l2 = std::get_if<L2>(&reg)) {
        if (l2->lambda < 0.0) throw ConfigError("L2 lambda must be non-negative");
        return l2->lambda * K;
    }
    if (const auto* t = std::get_if<Tikhonov>(&reg)) {
        if (t->gamma.rows() != t->gamma.cols() || t->gamma.empty())
            throw DimensionError("Tikhonov matrix must be square and non-empty");
        return 2.0 * K * frobenius_norm(matmul(t->gamma, t->gamma));
    }
    return 0.0;
}

/// Adds the regularization increment for weight bound K to an estimate.
inline LipschitzEstimate with_regularization(LipschitzEstimate e, const Regularization& reg, double K) {
    e.reg_increment = reg_increment(reg, K);
    e.L = e.base + e.reg_increment;
    e.alpha = 1.0 / e.L;
    return e;
}

/// Frobenius norm of the whole penultimate-activation matrix.
inline double compute_kz(const Matrix& penultimate) { return frobenius_norm(penultimate); }

// ---------------------------------------------------------------------------
// Loss values

inline constexpr double kProbabilityClamp = 1e-12;

inline void validate_regularization(const Regularization& reg, std::size_t weight_count) {
    if (const auto* l2 = std::get_if<L2>(&reg)) {
        if (!(l2->lambda >= 0.0)) throw ConfigError("L2 lambda must be non-negative");
    } else if (const auto* t = std::get_if<Tikhonov>(&reg)) {
        if (t->gamma.rows() != weight_count || t->gamma.cols() != weight_count)
            throw DimensionError("Tikhonov matrix must be " + std::to_string(weight_count) + "x" +
                                 std::to_string(weight_count));
    }
}

inline double regularization_value(const Regularization& reg, std::span<const double> w) {
    validate_regularization(reg, w.size());
    if (const auto* l2 = std::get_if<L2>(&reg)) return 0.5 * l2->lambda * dot(w, w);
    if (const auto* t = std::get_if<Tikhonov>(&reg)) {
        const Matrix gw = matmul(t->gamma, Matrix::column(w));
        return dot(gw.values(), gw.values());
    }
    return 0.0;
}

/// Gradient of regularization_value: λw for L2, 2ΓᵀΓw for Tikhonov.
inline Vector regularization_gradient(const Regularization& reg, std::span<const double> w) {
    validate_regularization(reg, w.size());
    Vector g(w.size(), 0.0);
    if (const auto* l2 = std::get_if<L2>(&reg)) {
        for (std::size_t i = 0; i < w.size(); ++i) g[i] = l2->lambda * w[i];
    } else if (const auto* t = std::get_if<Tikhonov>(&reg)) {
        const Matrix gw = matmul(t->gamma, Matrix::column(w));
        const Matrix gtgw = matmul_transpose_a(t->gamma, gw);
        for (std::size_t i = 0; i < w.size(); ++i) g[i] = 2.0 * gtgw.values()[i];
    }
    return g;
}

/// Mean loss over m examples plus the regularization term on `weights`.
/// Probabilities are clamped to [1e-12, 1 − 1e-12] before taking logs.
inline double loss_value(const LossSpec& spec, const Matrix& predictions, const Matrix& targets,
                         std::span<const double> weights, std::size_t m) {
    detail::require_batch(m);
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
        throw DimensionError("loss_value: prediction and target shapes differ");
    const auto clamp = [](double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); };
    double s = 0.0;
    const auto a = predictions.values();
    const auto y = targets.values();
    switch (spec.kind) {
        case LossKind::LeastSquares:
            for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - y[i]) * (a[i] - y[i]);
            s /= 2.0 * static_cast<double>(m);
            break;
        case LossKind::BinaryCrossEntropy:
            if (predictions.cols() != 1) throw DimensionError("binary loss expects a single output column");
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double p = clamp(a[i]);
                s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
            }
            s /= static_cast<double>(m);
            break;
        case LossKind::MulticlassCrossEntropy:
            for (std::size_t i = 0; i < a.size(); ++i)
                if (y[i] != 0.0) s -= y[i] * std::log(clamp(a[i]));
            s /= static_cast<double>(m);
            break;
    }
    return s + regularization_value(spec.regularization, weights);
}

}  // namespace lipschitz_lr
