#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "lipschitz_lr/dataset.hpp"
#include "lipschitz_lr/lipschitz.hpp"
#include "lipschitz_lr/model.hpp"
#include "lipschitz_lr/optimizer.hpp"
#include "lipschitz_lr/rng.hpp"

namespace lipschitz_lr {

/// Empirical comparison of gradient norms against the analytic constant over
/// random weight draws.
struct GradBoundReport {
    std::size_t samples = 0;
    double radius = 0.0;
    /// Smallest and largest analytic L seen (it varies with K_z for deep models).
    double min_L = 0.0;
    double max_L = 0.0;
    /// Frobenius norm of the last layer's weight gradient.
    double max_last_layer_norm = 0.0;
    /// Largest Frobenius norm of any layer's weight gradient.
    double max_any_layer_norm = 0.0;
    double max_last_layer_entry = 0.0;
    /// max over draws of last-layer norm / L.
    double max_ratio = 0.0;
    double max_entry_ratio = 0.0;
    /// max over draws and examples of one example's last-layer contribution / L.
    double max_per_example_ratio = 0.0;
    std::size_t norm_violations = 0;
    std::size_t entry_violations = 0;
    std::size_t per_example_violations = 0;
    /// Draws where some earlier layer's gradient norm exceeded the last layer's.
    std::size_t dominance_violations = 0;

    bool passed() const noexcept { return norm_violations == 0; }
};

/// Unit-direction times radius·u^(1/d): uniform in the d-ball.
inline Vector sample_in_ball(Rng& rng, std::size_t d, double radius) {
    Vector v(d);
    double s = 0.0;
    do {
        s = 0.0;
        for (double& x : v) {
            x = rng.normal();
            s += x * x;
        }
    } while (s == 0.0);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(s);
    for (double& x : v) x *= r;
    return v;
}

/// Draws all weights of `params` uniformly from the ball of `radius` (biases
/// are kept), computes full-batch gradients on `d`, and compares them with
/// the analytic constant at that draw. Regression uses `radius` as K.
inline GradBoundReport grad_sup_bound_check(const ModelParams& params, const Dataset& d, const LossSpec& spec,
                                            std::size_t samples, Rng& rng, double radius = 10.0) {
    check_output_matches_loss(params, spec.kind);
    GradBoundReport rep;
    rep.samples = samples;
    rep.radius = radius;
    rep.min_L = INFINITY;
    ModelParams p = params;
    const std::size_t n_weights = flatten_weights(p).size();
    const std::size_t m = d.examples();
    const std::size_t last = p.depth() - 1;

    for (std::size_t s = 0; s < samples; ++s) {
        const Vector w = sample_in_ball(rng, n_weights, radius);
        std::size_t off = 0;
        for (auto& layer : p.layers)
            for (double& v : layer.weights.values()) v = w[off++];

        const ForwardTrace t = forward(p, d.features);
        const Gradients g = backward(p, t, d.targets, spec, m);
        const Matrix pen = t.penultimate();
        const Matrix tgt = d.targets;
        const double L = estimate_from_batches(p, std::span(&pen, 1), std::span(&tgt, 1), spec, d.class_count(),
                                               radius, m)
                             .L;
        rep.min_L = std::min(rep.min_L, L);
        rep.max_L = std::max(rep.max_L, L);

        const double last_norm = frobenius_norm(g.weights[last]);
        const double entry = max_abs(g.weights[last].values());
        double any = 0.0;
        for (std::size_t l = 0; l < last; ++l) any = std::max(any, frobenius_norm(g.weights[l]));
        if (any > last_norm) ++rep.dominance_violations;
        any = std::max(any, last_norm);

        rep.max_last_layer_norm = std::max(rep.max_last_layer_norm, last_norm);
        rep.max_any_layer_norm = std::max(rep.max_any_layer_norm, any);
        rep.max_last_layer_entry = std::max(rep.max_last_layer_entry, entry);
        rep.max_ratio = std::max(rep.max_ratio, last_norm / L);
        rep.max_entry_ratio = std::max(rep.max_entry_ratio, entry / L);
        if (last_norm > L) ++rep.norm_violations;
        if (entry > L) ++rep.entry_violations;

        // Example i adds the rank-one term a_i·δ_iᵀ/m, whose norm is ‖a_i‖‖δ_i‖/m.
        double per_example = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double dn = 0.0;
            for (std::size_t j = 0; j < tgt.cols(); ++j) {
                const double r = t.output()(i, j) - tgt(i, j);
                dn += r * r;
            }
            per_example = std::max(per_example, vector_2norm(pen.row(i)) * std::sqrt(dn) / static_cast<double>(m));
        }
        rep.max_per_example_ratio = std::max(rep.max_per_example_ratio, per_example / L);
        if (per_example > L) ++rep.per_example_violations;
    }
    if (samples == 0) rep.min_L = 0.0;
    return rep;
}

}  // namespace lipschitz_lr
