#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lipschitz_lr/dataset.hpp"
#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/lipschitz.hpp"
#include "lipschitz_lr/matrix.hpp"
#include "lipschitz_lr/model.hpp"
#include "lipschitz_lr/optimizer.hpp"
#include "lipschitz_lr/rng.hpp"

namespace lipschitz_lr {

enum class LrPolicyKind { Fixed, LipschitzAdaptive };

struct LrPolicy {
    LrPolicyKind kind = LrPolicyKind::LipschitzAdaptive;
    /// Rate for the Fixed policy.
    double alpha = 0.1;

    std::string name() const {
        if (kind == LrPolicyKind::LipschitzAdaptive) return "adaptive";
        return "fixed-" + detail::format_double(alpha);
    }
};

/// Where the constant intercept column goes relative to feature scaling.
enum class InterceptPlacement { None, BeforeScaling, AfterScaling };

inline InterceptPlacement parse_intercept(std::string_view s) {
    if (s == "none") return InterceptPlacement::None;
    if (s == "before") return InterceptPlacement::BeforeScaling;
    if (s == "after") return InterceptPlacement::AfterScaling;
    throw ConfigError("unknown intercept placement '" + std::string(s) + "'");
}

inline const char* to_string(InterceptPlacement p) {
    switch (p) {
        case InterceptPlacement::None: return "none";
        case InterceptPlacement::BeforeScaling: return "before";
        case InterceptPlacement::AfterScaling: return "after";
    }
    return "?";
}

inline constexpr std::size_t kDefaultEpochCap = 10'000'000;

struct ExperimentConfig {
    std::string data_path;
    CsvSchema schema;

    ScalingMode scaling = ScalingMode::SumToOne;
    /// Drop columns the scaling cannot handle instead of failing.
    bool drop_degenerate = true;
    InterceptPlacement intercept = InterceptPlacement::None;
    /// Fraction of rows used for training; the rest is validation.
    double train_fraction = 1.0;

    std::vector<std::size_t> hidden;
    Activation hidden_activation = Activation::ReLU;
    bool bias = true;
    double init_scale = 0.05;

    OptimizerConfig optimizer;
    LrPolicy policy;
    double l2_lambda = 0.0;
    /// Weight bound for least-squares constants; estimated from the data when unset.
    std::optional<double> k_bound;

    /// Threshold mode when set; otherwise run exactly `epochs`.
    std::optional<double> threshold;
    std::size_t epochs = 100;
    std::size_t epoch_cap = kDefaultEpochCap;
    /// 0 means full batch.
    std::size_t batch_size = 0;
    std::uint64_t seed = 42;
    /// Keep every n-th metric row (epoch 0 and the last epoch are always kept).
    std::size_t log_every = 1;

    std::string out_dir = "out";
    std::string name = "run";

    Task task() const noexcept { return schema.task; }
    LossSpec loss_spec() const {
        LossSpec s{loss_kind_for(task()), NoRegularization{}};
        if (l2_lambda > 0.0) s.regularization = L2{l2_lambda};
        return s;
    }
};

// ---------------------------------------------------------------------------
// Data preparation

struct PreparedData {
    Dataset train;
    Dataset validation;
    ScalingRecord scaling;
    std::vector<std::size_t> dropped_columns;
    /// Weight bound from the heuristic (or the configured override).
    double K = 0.0;
};

inline constexpr std::uint64_t kSplitSalt = 0x5eed5a17ULL;
inline constexpr std::uint64_t kBatchSalt = 0xba7c4ULL;

/// Split, fit scaling on the training rows, apply it to validation rows, and
/// place the intercept column.
inline PreparedData prepare_data(const Dataset& raw, const ExperimentConfig& cfg) {
    validate(raw);
    Dataset all = raw;
    if (cfg.intercept == InterceptPlacement::BeforeScaling) all = add_intercept_column(all);

    PreparedData out;
    Dataset train, validation;
    if (cfg.train_fraction < 1.0) {
        Rng split_rng(cfg.seed ^ kSplitSalt);
        std::tie(train, validation) = train_validation_split(all, cfg.train_fraction, split_rng);
    } else {
        if (!(cfg.train_fraction == 1.0)) throw ConfigError("train fraction must be in (0, 1]");
        train = all;
        validation = subset(all, std::span<const std::size_t>());
    }
    if (train.examples() == 0) throw ConfigError("training split is empty");

    if (cfg.drop_degenerate) {
        auto [kept, dropped] = drop_degenerate_columns(train, cfg.scaling);
        if (!dropped.empty()) {
            train = std::move(kept);
            validation = drop_columns(validation, dropped);
        }
        out.dropped_columns = std::move(dropped);
    }
    std::tie(out.train, out.scaling) = scale_features(train, cfg.scaling);
    out.validation = validation.examples() ? apply_scaling(validation, out.scaling) : validation;
    if (!validation.examples()) out.validation.features = Matrix(0, out.train.feature_count());

    if (cfg.intercept == InterceptPlacement::AfterScaling) {
        out.train = add_intercept_column(out.train);
        out.validation = add_intercept_column(out.validation);
    }
    out.K = cfg.k_bound ? *cfg.k_bound : estimate_k_bound(out.train);
    return out;
}

inline PreparedData load_and_prepare(const ExperimentConfig& cfg) {
    return prepare_data(load_csv(cfg.data_path, cfg.schema), cfg);
}

inline ModelParams make_model(const ExperimentConfig& cfg, const Dataset& train, Rng& rng) {
    std::vector<std::size_t> widths{train.feature_count()};
    std::vector<Activation> acts;
    for (auto h : cfg.hidden) {
        widths.push_back(h);
        acts.push_back(cfg.hidden_activation);
    }
    widths.push_back(train.task == Task::Multiclass ? train.class_count() : 1);
    acts.push_back(output_activation_for(loss_kind_for(train.task)));
    return init_params(widths, acts, rng, cfg.init_scale, cfg.bias);
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
    double kz = 0.0;
    double max_w = 0.0;
    double L = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
    std::string policy;
    std::vector<EpochRecord> rows;
    LrTrace lr_trace;
    std::optional<std::size_t> epochs_to_threshold;
    bool censored = false;
    std::size_t epochs_run = 0;
    double final_loss = 0.0;
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t init_checksum = 0;
};

/// Runs one training arm epoch by epoch.
///
/// Row e of the metrics holds the loss and accuracies after e epochs together
/// with the rate and Lipschitz ingredients used during epoch e. Row 0 carries
/// the values prepared for epoch 1.
class Trainer {
public:
    Trainer(const ExperimentConfig& cfg, const PreparedData& data, ModelParams init)
        : cfg_(cfg),
          data_(data),
          params_(std::move(init)),
          spec_(cfg.loss_spec()),
          opt_(cfg.optimizer),
          batch_rng_(cfg.seed ^ kBatchSalt) {
        check_output_matches_loss(params_, spec_.kind);
        if (cfg_.policy.kind == LrPolicyKind::Fixed) {
            if (cfg_.optimizer.kind != OptimizerKind::Sgd)
                throw ConfigError("a fixed learning rate only applies to the sgd optimizer");
            if (!(cfg_.policy.alpha > 0.0)) throw ConfigError("fixed learning rate must be positive");
        }
        if (cfg_.optimizer.kind == OptimizerKind::AutoAdam && !cfg_.optimizer.autoadam_fixed &&
            data_.train.task == Task::Regression)
            throw ConfigError("Auto-Adam's estimate needs a classification task (or the fixed K1/K2 mode)");
        m_ = full_batch() ? data_.train.examples() : std::min(cfg_.batch_size, data_.train.examples());
        all_labels_ = data_.train.labels();
        val_labels_ = data_.validation.labels();
    }

    const ModelParams& params() const noexcept { return params_; }
    const LrTrace& lr_trace() const noexcept { return trace_; }
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch_size() const noexcept { return m_; }
    bool full_batch() const noexcept { return cfg_.batch_size == 0 || cfg_.batch_size >= data_.train.examples(); }

    EpochRecord initial_record() {
        full_trace_ = forward(params_, data_.train.features);
        prepare_epoch();
        EpochRecord r = evaluate();
        fill_rate(r);
        return r;
    }

    EpochRecord run_epoch() {
        if (!full_trace_) initial_record();
        ++epoch_;
        opt_.epoch = epoch_;
        double last_rate = 0.0;
        if (full_batch()) {
            const Gradients g = backward(params_, *full_trace_, data_.train.targets, spec_, m_);
            last_rate = step(g);
        } else {
            for (const auto& b : plan_) {
                const Matrix x = select_rows(data_.train.features, b);
                const Matrix y = select_rows(data_.train.targets, b);
                const ForwardTrace t = forward(params_, x);
                // m is the nominal batch size, also for a short trailing batch.
                last_rate = step(backward(params_, t, y, spec_, m_));
            }
        }
        trace_.push(epoch_, last_rate, est_.ingredients.K_z, est_.ingredients.max_w, est_.L);

        EpochRecord r;
        r.lr = last_rate;
        r.kz = est_.ingredients.K_z;
        r.max_w = est_.ingredients.max_w;
        r.L = est_.L;

        full_trace_ = forward(params_, data_.train.features);
        const EpochRecord ev = evaluate();
        r.epoch = epoch_;
        r.loss = ev.loss;
        r.train_acc = ev.train_acc;
        r.val_acc = ev.val_acc;
        if (!std::isfinite(r.loss)) throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch_));
        prepare_epoch();
        return r;
    }

private:
    EpochRecord evaluate() const {
        EpochRecord r;
        r.epoch = epoch_;
        r.loss = model_loss(params_, *full_trace_, data_.train.targets, spec_, data_.train.examples());
        if (data_.train.task != Task::Regression) {
            r.train_acc = accuracy(full_trace_->output(), all_labels_);
            if (data_.validation.examples())
                r.val_acc = accuracy(forward(params_, data_.validation.features).output(), val_labels_);
        }
        return r;
    }

    void fill_rate(EpochRecord& r) const {
        r.kz = est_.ingredients.K_z;
        r.max_w = est_.ingredients.max_w;
        r.L = est_.L;
        if (cfg_.policy.kind == LrPolicyKind::Fixed)
            r.lr = cfg_.policy.alpha;
        else if (cfg_.optimizer.kind == OptimizerKind::Sgd)
            r.lr = est_.alpha;
        else if (cfg_.optimizer.kind == OptimizerKind::AdaMo && cfg_.optimizer.adamo_first_epoch_lr)
            r.lr = *cfg_.optimizer.adamo_first_epoch_lr;
        else
            r.lr = est_.alpha;
    }

    /// Batch plan and Lipschitz estimate for the next epoch.
    void prepare_epoch() {
        plan_.clear();
        if (!full_batch()) {
            const auto order = batch_rng_.permutation(data_.train.examples());
            for (std::size_t s = 0; s < order.size(); s += m_)
                plan_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(s + m_, order.size())));
        }
        try {
            if (full_batch()) {
                const Matrix& pen = full_trace_->penultimate();
                est_ = estimate_from_batches(params_, std::span(&pen, 1), std::span(&data_.train.targets, 1), spec_,
                                             data_.train.class_count(), data_.K, m_);
            } else {
                est_ = epoch_lr_recompute(params_, data_.train, plan_, spec_, data_.K, m_);
            }
        } catch (const DegenerateError&) {
            // A fixed rate does not depend on the estimate; keep training.
            if (cfg_.policy.kind == LrPolicyKind::LipschitzAdaptive) throw;
            est_ = LipschitzEstimate{};
        }
    }

    double step(const Gradients& g) {
        switch (cfg_.optimizer.kind) {
            case OptimizerKind::Sgd: {
                const double a = cfg_.policy.kind == LrPolicyKind::Fixed ? cfg_.policy.alpha : est_.alpha;
                sgd_step(params_, g, a);
                return a;
            }
            case OptimizerKind::AdaMo: return adamo_step(opt_, params_, g).lr;
            case OptimizerKind::AdaRmsProp: return adarmsprop_step(opt_, params_, g).lr;
            case OptimizerKind::AutoAdam: {
                if (cfg_.optimizer.autoadam_fixed)
                    return autoadam_step(opt_, parameter_tensors(params_), gradient_tensors(params_, g), 0.0).lr;
                return autoadam_step(opt_, params_, g, est_.ingredients.K_z, data_.train.class_count(), m_,
                                     cfg_.l2_lambda, max_weight_norm(params_))
                    .lr;
            }
        }
        return 0.0;
    }

    const ExperimentConfig& cfg_;
    const PreparedData& data_;
    ModelParams params_;
    LossSpec spec_;
    OptimizerState opt_;
    Rng batch_rng_;
    std::size_t m_ = 0;
    std::size_t epoch_ = 0;
    std::vector<std::size_t> all_labels_;
    std::vector<std::size_t> val_labels_;
    std::optional<ForwardTrace> full_trace_;
    std::vector<std::vector<std::size_t>> plan_;
    LipschitzEstimate est_;
    LrTrace trace_;
};

/// Trains one arm. In threshold mode stops at the first epoch whose loss is
/// ≤ the threshold, or reports a censored run at the epoch cap.
inline TrainReport run_training(const ExperimentConfig& cfg, const PreparedData& data, const ModelParams& init) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport rep;
    rep.policy = cfg.policy.name();
    rep.init_checksum = params_checksum(init);
    Trainer tr(cfg, data, init);
    const std::size_t every = std::max<std::size_t>(1, cfg.log_every);

    EpochRecord r = tr.initial_record();
    rep.rows.push_back(r);
    const auto met = [&](const EpochRecord& row) { return cfg.threshold && row.loss <= *cfg.threshold; };
    const std::size_t budget = cfg.threshold ? cfg.epoch_cap : cfg.epochs;
    if (met(r)) rep.epochs_to_threshold = 0;
    while (!rep.epochs_to_threshold && tr.epoch() < budget) {
        r = tr.run_epoch();
        const bool done = met(r);
        if (done) rep.epochs_to_threshold = r.epoch;
        if (done || r.epoch % every == 0 || r.epoch == budget) rep.rows.push_back(r);
    }
    rep.censored = cfg.threshold.has_value() && !rep.epochs_to_threshold;
    rep.epochs_run = tr.epoch();
    rep.lr_trace = tr.lr_trace();
    rep.final_loss = r.loss;
    rep.final_train_acc = r.train_acc;
    rep.final_val_acc = r.val_acc;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct PairedReport {
    TrainReport fixed;
    TrainReport adaptive;
    std::uint64_t init_checksum = 0;
    PreparedData data;
};

namespace detail {

inline PairedReport run_pair(const ExperimentConfig& cfg, PreparedData data, double fixed_alpha) {
    Rng init_rng(cfg.seed);
    const ModelParams init = make_model(cfg, data.train, init_rng);
    const std::uint64_t sum = params_checksum(init);

    ExperimentConfig fixed = cfg;
    fixed.policy = {LrPolicyKind::Fixed, fixed_alpha};
    fixed.optimizer.kind = OptimizerKind::Sgd;
    ExperimentConfig adaptive = cfg;
    adaptive.policy = {LrPolicyKind::LipschitzAdaptive, 0.0};

    PairedReport out;
    out.init_checksum = sum;
    out.fixed = run_training(fixed, data, init);
    out.adaptive = run_training(adaptive, data, init);
    if (out.fixed.init_checksum != sum || out.adaptive.init_checksum != sum)
        throw Error("paired arms did not start from the same parameters");
    out.data = std::move(data);
    return out;
}

}  // namespace detail

/// Epochs-to-threshold for a fixed rate and the adaptive rate from the same
/// initial parameters, data and batch order.
inline PairedReport run_threshold_experiment(const ExperimentConfig& cfg, const PreparedData& data,
                                             double fixed_alpha = 0.1) {
    if (!cfg.threshold) throw ConfigError("threshold experiment needs a loss threshold");
    return detail::run_pair(cfg, data, fixed_alpha);
}

/// Accuracy after exactly cfg.epochs epochs for both arms.
inline PairedReport run_accuracy_experiment(const ExperimentConfig& cfg, const PreparedData& data,
                                            double fixed_alpha = 0.1) {
    if (cfg.task() == Task::Regression) throw UnsupportedMetricError("accuracy is undefined for regression");
    ExperimentConfig c = cfg;
    c.threshold.reset();
    return detail::run_pair(c, data, fixed_alpha);
}

// ---------------------------------------------------------------------------
// Convergence checks on quadratics

/// ⌈2L(f0 − f*)/ε⌉
inline std::size_t min_iterations_bound(double L, double f0, double fstar, double eps) {
    if (!(eps > 0.0)) throw InvalidToleranceError("tolerance must be positive");
    if (!(L > 0.0)) throw InvalidBoundError("L must be positive");
    if (f0 < fstar) throw InvalidBoundError("f0 must not be below f*");
    return static_cast<std::size_t>(std::ceil(2.0 * L * (f0 - fstar) / eps));
}

/// f(w) = ½ wᵀAw with A = QΛQᵀ; minimum 0 at w = 0 and smoothness L = max Λ.
struct Quadratic {
    Matrix A;
    Vector eigenvalues;
    double L = 0.0;

    double value(std::span<const double> w) const {
        const Matrix aw = matmul(A, Matrix::column(w));
        return 0.5 * dot(w, aw.values());
    }
    Vector gradient(std::span<const double> w) const {
        const Matrix aw = matmul(A, Matrix::column(w));
        return Vector(aw.values().begin(), aw.values().end());
    }
};

/// Random orthogonal Q from Gram-Schmidt on Gaussian columns; eigenvalues
/// uniform in [lo, hi].
inline Quadratic random_quadratic(Rng& rng, std::size_t dim, double lo = 0.01, double hi = 10.0) {
    Matrix q(dim, dim);
    for (std::size_t c = 0; c < dim; ++c) {
        while (true) {
            Vector v(dim);
            for (double& x : v) x = rng.normal();
            for (std::size_t p = 0; p < c; ++p) {
                double d = 0.0;
                for (std::size_t r = 0; r < dim; ++r) d += v[r] * q(r, p);
                for (std::size_t r = 0; r < dim; ++r) v[r] -= d * q(r, p);
            }
            const double n = vector_2norm(v);
            if (n < 1e-8) continue;
            for (std::size_t r = 0; r < dim; ++r) q(r, c) = v[r] / n;
            break;
        }
    }
    Quadratic f;
    f.eigenvalues.resize(dim);
    for (double& e : f.eigenvalues) e = rng.uniform(lo, hi);
    f.L = *std::max_element(f.eigenvalues.begin(), f.eigenvalues.end());
    Matrix ql = q;
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) ql(r, c) *= f.eigenvalues[c];
    f.A = matmul_transpose_b(ql, q);
    return f;
}

struct QuadraticSuiteReport {
    std::size_t quadratics = 0;
    std::size_t steps_checked = 0;
    std::size_t decrease_violations = 0;
    /// Largest f(w_{k+1}) − [f(w_k) − ‖∇f‖²/(2L)]; ≤ tolerance when the check holds.
    double worst_decrease_excess = -INFINITY;
    std::vector<double> tolerances;
    std::vector<std::size_t> bound_violations;
    /// max over quadratics of observed iterations / bound, per tolerance.
    std::vector<double> worst_bound_ratio;
    bool boundary_constant = false;
    bool boundary_grows = false;

    bool decrease_ok() const noexcept { return decrease_violations == 0 && boundary_grows; }
    bool bound_ok() const {
        return std::all_of(bound_violations.begin(), bound_violations.end(), [](std::size_t v) { return v == 0; });
    }
    bool passed() const { return decrease_ok() && bound_ok() && boundary_constant; }
};

/// Gradient descent at η = 1/L on `count` random convex quadratics of
/// dimension 1..max_dim: checks the per-step decrease inequality and the
/// iteration bound for each tolerance, plus the η = 2/L and η = 2.1/L boundary
/// on the scalar quadratic.
inline QuadraticSuiteReport run_quadratic_suite(std::size_t count, std::uint64_t seed,
                                                std::vector<double> tolerances = {1e-2, 1e-4},
                                                std::size_t max_dim = 10, std::size_t steps = 200,
                                                double slack = 1e-10) {
    Rng rng(seed);
    QuadraticSuiteReport rep;
    rep.quadratics = count;
    rep.tolerances = tolerances;
    rep.bound_violations.assign(tolerances.size(), 0);
    rep.worst_bound_ratio.assign(tolerances.size(), 0.0);

    for (std::size_t q = 0; q < count; ++q) {
        const std::size_t dim = 1 + rng.uniform_index(max_dim);
        const Quadratic f = random_quadratic(rng, dim);
        Vector w0(dim);
        for (double& x : w0) x = rng.uniform(-10.0, 10.0);

        Vector w = w0;
        for (std::size_t k = 0; k < steps; ++k) {
            const Vector g = f.gradient(w);
            const double f0 = f.value(w);
            add_scaled(w, g, -1.0 / f.L);
            const double excess = f.value(w) - (f0 - dot(g, g) / (2.0 * f.L));
            rep.worst_decrease_excess = std::max(rep.worst_decrease_excess, excess);
            if (excess > slack) ++rep.decrease_violations;
            ++rep.steps_checked;
        }

        const double fw0 = f.value(w0);
        for (std::size_t t = 0; t < tolerances.size(); ++t) {
            const std::size_t bound = min_iterations_bound(f.L, fw0, 0.0, tolerances[t]);
            w = w0;
            std::size_t n = 0;
            double best = INFINITY;
            while (true) {
                const Vector g = f.gradient(w);
                best = std::min(best, dot(g, g));
                if (best <= tolerances[t] || n > bound) break;
                add_scaled(w, g, -1.0 / f.L);
                ++n;
            }
            if (n > bound) ++rep.bound_violations[t];
            if (bound > 0) rep.worst_bound_ratio[t] = std::max(rep.worst_bound_ratio[t], double(n) / double(bound));
        }
    }

    // Scalar ½Lw²: w ← (1 − ηL)w.
    const double L = 1.0 + rng.uniform(0.0, 9.0);
    double w = 1.0;
    rep.boundary_constant = true;
    for (int k = 0; k < 20; ++k) {
        w -= (2.0 / L) * L * w;
        if (std::abs(std::abs(w) - 1.0) > 1e-12) rep.boundary_constant = false;
    }
    w = 1.0;
    rep.boundary_grows = true;
    for (int k = 0; k < 20; ++k) {
        const double before = std::abs(w);
        w -= (2.1 / L) * L * w;
        if (!(std::abs(w) > before)) rep.boundary_grows = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Oscillation probe

struct OscillationReport {
    std::size_t every = 0;
    /// Loss at iterations 0, every, 2·every, ...
    std::vector<double> samples;
    bool tail_non_increasing = true;
};

/// True when each sample in the last 20% (at least two) is at most 1% above
/// its predecessor.
inline bool tail_non_increasing(std::span<const double> s, double tolerance = 0.01) {
    if (s.size() < 2) return true;
    const std::size_t tail = std::max<std::size_t>(2, (s.size() + 4) / 5);
    for (std::size_t i = s.size() - tail + 1; i < s.size(); ++i)
        if (!(s[i] <= s[i - 1] + tolerance * std::abs(s[i - 1]))) return false;
    return true;
}

/// `step()` performs one iteration and returns the loss afterwards; `loss0`
/// is the loss before any iteration.
template <typename StepFn>
OscillationReport oscillation_probe(double loss0, StepFn&& step, std::size_t iterations, std::size_t every = 500) {
    if (every == 0) throw ConfigError("checkpoint interval must be positive");
    OscillationReport rep;
    rep.every = every;
    rep.samples.push_back(loss0);
    for (std::size_t i = 1; i <= iterations; ++i) {
        const double l = step();
        if (i % every == 0) rep.samples.push_back(l);
    }
    rep.tail_non_increasing = tail_non_increasing(rep.samples);
    return rep;
}

/// Full-batch training run sampled every `every` epochs (one iteration each).
inline OscillationReport oscillation_probe(const ExperimentConfig& cfg, const PreparedData& data,
                                           std::size_t every = 500) {
    ExperimentConfig c = cfg;
    c.batch_size = 0;
    Rng init_rng(c.seed);
    Trainer tr(c, data, make_model(c, data.train, init_rng));
    const double l0 = tr.initial_record().loss;
    return oscillation_probe(l0, [&] { return tr.run_epoch().loss; }, c.epochs, every);
}

// ---------------------------------------------------------------------------
// Output

inline constexpr std::string_view kMetricsHeader = "epoch,loss,train_acc,val_acc,lr,kz,max_w,L";

inline void write_metrics_csv(const TrainReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kMetricsHeader << '\n';
    for (const auto& row : r.rows) {
        out << row.epoch;
        for (double v : {row.loss, row.train_acc, row.val_acc, row.lr, row.kz, row.max_w, row.L})
            out << ',' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<EpochRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != kMetricsHeader) throw ParseError("unexpected metrics header", 1);
    std::vector<EpochRecord> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 8) throw ParseError("expected 8 cells", line_no);
        EpochRecord r;
        double v[8];
        for (std::size_t i = 0; i < 8; ++i)
            if (!detail::parse_double(cells[i], v[i])) throw ParseError("bad number '" + cells[i] + "'", line_no);
        r.epoch = static_cast<std::size_t>(v[0]);
        r.loss = v[1];
        r.train_acc = v[2];
        r.val_acc = v[3];
        r.lr = v[4];
        r.kz = v[5];
        r.max_w = v[6];
        r.L = v[7];
        rows.push_back(r);
    }
    return rows;
}

/// Output directory: LIPSCHITZ_LR_OUT when set, else the configured one.
inline std::filesystem::path output_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("LIPSCHITZ_LR_OUT"); env && *env) return env;
    return cfg.out_dir;
}

inline std::string report_stem(const ExperimentConfig& cfg, const std::string& policy) {
    return cfg.name + "_seed" + std::to_string(cfg.seed) + "_" + policy;
}

inline nlohmann::json config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["data"] = c.data_path;
    j["task"] = to_string(c.task());
    j["scaling"] = to_string(c.scaling);
    j["intercept"] = to_string(c.intercept);
    j["train_fraction"] = c.train_fraction;
    j["hidden"] = c.hidden;
    j["hidden_activation"] = to_string(c.hidden_activation);
    j["bias"] = c.bias;
    j["init_scale"] = c.init_scale;
    j["optimizer"] = to_string(c.optimizer.kind);
    j["policy"] = c.policy.name();
    j["l2"] = c.l2_lambda;
    j["threshold"] = c.threshold ? nlohmann::json(*c.threshold) : nlohmann::json(nullptr);
    j["epochs"] = c.epochs;
    j["epoch_cap"] = c.epoch_cap;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    return j;
}

inline nlohmann::json report_json(const TrainReport& r) {
    nlohmann::json j;
    j["policy"] = r.policy;
    j["epochs_run"] = r.epochs_run;
    j["epochs_to_threshold"] =
        r.epochs_to_threshold ? nlohmann::json(*r.epochs_to_threshold) : nlohmann::json(nullptr);
    j["censored"] = r.censored;
    j["final_loss"] = r.final_loss;
    j["final_train_acc"] = r.final_train_acc;
    j["final_val_acc"] = r.final_val_acc;
    j["wall_seconds"] = r.wall_seconds;
    j["lr_trace_valid"] = r.lr_trace.all_rates_valid();
    return j;
}

/// Writes <stem>_metrics.csv and <stem>_lr.csv for one arm; returns the metrics path.
inline std::filesystem::path write_report_files(const ExperimentConfig& cfg, const TrainReport& r) {
    const auto dir = output_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string stem = report_stem(cfg, r.policy);
    const auto metrics = dir / (stem + "_metrics.csv");
    write_metrics_csv(r, metrics.string());
    r.lr_trace.write_csv((dir / (stem + "_lr.csv")).string());
    return metrics;
}

inline void write_summary_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace lipschitz_lr
