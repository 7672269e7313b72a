#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lipschitz_lr/bound_check.hpp"
#include "lipschitz_lr/harness.hpp"
#include "lipschitz_lr/presets.hpp"

namespace lipschitz_lr {

namespace cli {

/// Flags shared by lc / train / compare. Unset flags fall back to the preset
/// (when one is given) and then to the config defaults.
struct DataFlags {
    std::optional<std::string> preset;
    std::string data_dir;
    std::optional<std::string> data;
    std::optional<std::string> task;
    std::optional<std::string> target;
    std::optional<std::size_t> target_index;
    bool no_header = false;
    std::optional<std::string> scaling;
    std::optional<std::string> intercept;
    bool keep_degenerate = false;
    std::optional<double> train_fraction;
    std::optional<std::vector<std::size_t>> hidden;
    std::optional<std::string> hidden_activation;
    std::optional<bool> bias;
    std::optional<double> init_scale;
    std::optional<double> l2;
    std::optional<double> k_bound;
    std::optional<std::size_t> batch;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> name;
};

struct TrainFlags {
    std::optional<std::string> optimizer;
    std::optional<double> beta, beta1, beta2, eps;
    std::optional<std::string> bias_correction;
    std::optional<double> adamo_x;
    bool no_adamo_override = false;
    std::optional<double> rms_fallback;
    bool autoadam_fixed = false;
    std::optional<double> threshold;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> cap;
    std::optional<std::size_t> log_every;
};

inline std::string default_data_dir() {
    if (const char* env = std::getenv("LIPSCHITZ_LR_DATA"); env && *env) return env;
    return "data";
}

inline void add_data_flags(CLI::App* app, DataFlags& f) {
    f.data_dir = default_data_dir();
    app->add_option("--preset", f.preset, "Bundled dataset configuration")
        ->check(CLI::IsMember(preset_names()));
    app->add_option("--data-dir", f.data_dir, "Directory holding the bundled CSVs");
    app->add_option("--data", f.data, "CSV file");
    app->add_option("--task", f.task, "regression | binary | multiclass")
        ->check(CLI::IsMember({"regression", "binary", "multiclass"}));
    app->add_option("--target", f.target, "Target column name");
    app->add_option("--target-index", f.target_index, "Target column index (default: last)");
    app->add_flag("--no-header", f.no_header, "CSV has no header row");
    app->add_option("--scaling", f.scaling, "sum-to-one | mean-center-255 | standardize | none")
        ->check(CLI::IsMember({"sum-to-one", "mean-center-255", "standardize", "none"}));
    app->add_option("--intercept", f.intercept, "none | before | after (relative to scaling)")
        ->check(CLI::IsMember({"none", "before", "after"}));
    app->add_flag("--keep-degenerate", f.keep_degenerate, "Fail on unscalable columns instead of dropping them");
    app->add_option("--train-fraction", f.train_fraction, "Training share of a seeded split")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--hidden", f.hidden, "Hidden layer widths")->expected(0, -1);
    app->add_option("--hidden-activation", f.hidden_activation, "relu | sigmoid | linear")
        ->check(CLI::IsMember({"relu", "sigmoid", "linear"}));
    app->add_option("--bias", f.bias, "Use bias vectors (true/false)");
    app->add_option("--init-scale", f.init_scale, "Uniform init half-width");
    app->add_option("--l2", f.l2, "L2 penalty lambda");
    app->add_option("--k-bound", f.k_bound, "Weight bound K (default: estimated)");
    app->add_option("--batch", f.batch, "Mini-batch size (0 = full batch)");
    app->add_option("--seed", f.seed, "Random seed");
    app->add_option("--out", f.out, "Output directory");
    app->add_option("--name", f.name, "Prefix for output files");
}

inline void add_train_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--optimizer", f.optimizer, "sgd | adamo | adarmsprop | autoadam")
        ->check(CLI::IsMember({"sgd", "adamo", "adarmsprop", "autoadam"}));
    app->add_option("--beta", f.beta, "AdaMo / RMSprop decay");
    app->add_option("--beta1", f.beta1, "Auto-Adam first decay");
    app->add_option("--beta2", f.beta2, "Auto-Adam second decay");
    app->add_option("--eps", f.eps, "Stability constant");
    app->add_option("--bias-correction", f.bias_correction, "off | epoch | step")
        ->check(CLI::IsMember({"off", "epoch", "step"}));
    app->add_option("--adamo-x", f.adamo_x, "AdaMo learning rate for epoch 1");
    app->add_flag("--no-adamo-override", f.no_adamo_override, "Use 1/K from the first epoch on");
    app->add_option("--rms-fallback", f.rms_fallback, "RMSprop first-epoch fallback rate");
    app->add_flag("--autoadam-fixed", f.autoadam_fixed, "Pin K1 = 1, K2 = 1e-6");
    app->add_option("--tl", f.threshold, "Stop when the training loss is at or below this");
    app->add_option("--epochs", f.epochs, "Epoch budget");
    app->add_option("--cap", f.cap, "Epoch cap in threshold mode");
    app->add_option("--log-every", f.log_every, "Keep every n-th metric row");
}

inline ExperimentConfig build_config(const DataFlags& d, const TrainFlags* t) {
    ExperimentConfig c = d.preset ? preset(*d.preset, d.data_dir) : ExperimentConfig{};
    if (d.data) c.data_path = *d.data;
    if (c.data_path.empty()) throw ConfigError("give --data or --preset");
    if (!d.preset && !d.data) throw ConfigError("give --data or --preset");
    if (d.task) c.schema.task = parse_task(*d.task);
    if (d.target) c.schema.target_name = *d.target;
    if (d.target_index) c.schema.target_index = *d.target_index;
    if (d.no_header) c.schema.has_header = false;
    if (d.scaling) c.scaling = parse_scaling_mode(*d.scaling);
    if (d.intercept) c.intercept = parse_intercept(*d.intercept);
    if (d.keep_degenerate) c.drop_degenerate = false;
    if (d.train_fraction) c.train_fraction = *d.train_fraction;
    if (d.hidden) c.hidden = *d.hidden;
    if (d.hidden_activation) c.hidden_activation = parse_activation(*d.hidden_activation);
    if (d.bias) c.bias = *d.bias;
    if (d.init_scale) c.init_scale = *d.init_scale;
    if (d.l2) c.l2_lambda = *d.l2;
    if (d.k_bound) c.k_bound = *d.k_bound;
    if (d.batch) c.batch_size = *d.batch;
    if (d.seed) c.seed = *d.seed;
    if (d.out) c.out_dir = *d.out;
    if (d.name) c.name = *d.name;
    if (!t) return c;
    if (t->optimizer) c.optimizer.kind = parse_optimizer_kind(*t->optimizer);
    if (t->beta) c.optimizer.beta = *t->beta;
    if (t->beta1) c.optimizer.beta1 = *t->beta1;
    if (t->beta2) c.optimizer.beta2 = *t->beta2;
    if (t->eps) c.optimizer.epsilon = *t->eps;
    if (t->bias_correction) c.optimizer.bias_correction = parse_bias_correction(*t->bias_correction);
    if (t->adamo_x) c.optimizer.adamo_first_epoch_lr = *t->adamo_x;
    if (t->no_adamo_override) c.optimizer.adamo_first_epoch_lr.reset();
    if (t->rms_fallback) c.optimizer.rmsprop_fallback_lr = *t->rms_fallback;
    if (t->autoadam_fixed) c.optimizer.autoadam_fixed = true;
    if (t->threshold) c.threshold = *t->threshold;
    if (t->epochs) c.epochs = *t->epochs;
    if (t->cap) c.epoch_cap = *t->cap;
    if (t->log_every) c.log_every = *t->log_every;
    validate(c.optimizer);
    return c;
}

inline void print_kv(std::ostream& out, const char* key, double v) {
    out << key << ": " << std::setprecision(10) << v << '\n';
}

inline int run_lc(const DataFlags& d, std::ostream& out) {
    const ExperimentConfig cfg = build_config(d, nullptr);
    const PreparedData data = load_and_prepare(cfg);
    Rng rng(cfg.seed);
    const ModelParams p = make_model(cfg, data.train, rng);
    const std::size_t m =
        cfg.batch_size == 0 ? data.train.examples() : std::min(cfg.batch_size, data.train.examples());
    const Matrix pen = penultimate_activations(p, data.train.features);
    LipschitzEstimate est =
        estimate_from_batches(p, std::span(&pen, 1), std::span(&data.train.targets, 1), cfg.loss_spec(),
                              data.train.class_count(), data.K, m);
    est.ingredients.norm_X = frobenius_norm(data.train.features);
    if (data.train.task == Task::Regression) est.ingredients.norm_y = frobenius_norm(data.train.targets);

    const auto& g = est.ingredients;
    out << "task: " << to_string(data.train.task) << '\n';
    print_kv(out, "L", est.L);
    print_kv(out, "alpha", est.alpha);
    print_kv(out, "base", est.base);
    print_kv(out, "reg_increment", est.reg_increment);
    print_kv(out, "norm_X", g.norm_X);
    print_kv(out, "norm_y", g.norm_y);
    print_kv(out, "K", data.K);
    print_kv(out, "K_z", g.K_z);
    print_kv(out, "K_a", g.K_a);
    out << "k: " << g.k << '\n' << "m: " << g.m << '\n';
    print_kv(out, "max_w", g.max_w);
    if (!data.dropped_columns.empty()) out << "dropped_columns: " << data.dropped_columns.size() << '\n';

    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["L"] = est.L;
    j["alpha"] = est.alpha;
    j["base"] = est.base;
    j["reg_increment"] = est.reg_increment;
    j["ingredients"] = {{"K", data.K},   {"K_z", g.K_z}, {"K_a", g.K_a}, {"norm_X", g.norm_X},
                        {"norm_y", g.norm_y}, {"m", g.m},   {"k", g.k},     {"max_w", g.max_w}};
    j["dropped_columns"] = data.dropped_columns;
    const auto dir = output_dir(cfg);
    std::filesystem::create_directories(dir);
    write_summary_json(j, dir / (cfg.name + "_seed" + std::to_string(cfg.seed) + "_lc.json"));
    return 0;
}

inline int run_train(const DataFlags& d, const TrainFlags& t, const std::optional<std::string>& lr,
                     std::ostream& out) {
    ExperimentConfig cfg = build_config(d, &t);
    if (lr && *lr != "adaptive") {
        double a;
        if (!detail::parse_double(*lr, a)) throw ConfigError("--lr takes a number or 'adaptive'");
        cfg.policy = {LrPolicyKind::Fixed, a};
    } else {
        cfg.policy = {LrPolicyKind::LipschitzAdaptive, 0.0};
    }
    const PreparedData data = load_and_prepare(cfg);
    Rng rng(cfg.seed);
    const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, rng));
    const auto metrics = write_report_files(cfg, rep);
    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["report"] = report_json(rep);
    write_summary_json(j, output_dir(cfg) / (report_stem(cfg, rep.policy) + "_summary.json"));

    out << "policy: " << rep.policy << '\n' << "epochs: " << rep.epochs_run << '\n';
    print_kv(out, "final_loss", rep.final_loss);
    if (data.train.task != Task::Regression) {
        print_kv(out, "train_acc", rep.final_train_acc);
        if (data.validation.examples()) print_kv(out, "val_acc", rep.final_val_acc);
    }
    if (cfg.threshold)
        out << "epochs_to_threshold: "
            << (rep.epochs_to_threshold ? std::to_string(*rep.epochs_to_threshold) : "censored") << '\n';
    out << "metrics: " << metrics.string() << '\n';
    return 0;
}

inline int run_compare(const DataFlags& d, const TrainFlags& t, const std::string& mode, double fixed_lr,
                       std::ostream& out) {
    ExperimentConfig cfg = build_config(d, &t);
    const PreparedData data = load_and_prepare(cfg);
    PairedReport pr;
    if (mode == "threshold") {
        pr = run_threshold_experiment(cfg, data, fixed_lr);
    } else {
        cfg.threshold.reset();
        pr = run_accuracy_experiment(cfg, data, fixed_lr);
    }
    ExperimentConfig fixed_cfg = cfg;
    fixed_cfg.policy = {LrPolicyKind::Fixed, fixed_lr};
    write_report_files(fixed_cfg, pr.fixed);
    write_report_files(cfg, pr.adaptive);

    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["mode"] = mode;
    j["init_checksum"] = pr.init_checksum;
    j["fixed"] = report_json(pr.fixed);
    j["adaptive"] = report_json(pr.adaptive);
    j["adaptive_alpha_epoch1"] = pr.adaptive.rows.front().lr;
    write_summary_json(j, output_dir(cfg) / (cfg.name + "_seed" + std::to_string(cfg.seed) + "_" + mode +
                                             "_summary.json"));

    const auto epochs = [](const TrainReport& r) {
        return r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold)
                                     : ">" + std::to_string(r.epochs_run) + " (censored)";
    };
    out << "init_checksum: " << std::hex << pr.init_checksum << std::dec << '\n';
    print_kv(out, "adaptive_alpha", pr.adaptive.rows.front().lr);
    if (mode == "threshold") {
        out << "E_fixed: " << epochs(pr.fixed) << '\n' << "E_adaptive: " << epochs(pr.adaptive) << '\n';
    } else {
        const bool val = pr.data.validation.examples() > 0;
        print_kv(out, "A_fixed", val ? pr.fixed.final_val_acc : pr.fixed.final_train_acc);
        print_kv(out, "A_adaptive", val ? pr.adaptive.final_val_acc : pr.adaptive.final_train_acc);
    }
    out << "output: " << output_dir(cfg).string() << '\n';
    return 0;
}

struct BoundFlags {
    std::size_t quadratics = 100;
    std::uint64_t seed = 7;
    std::vector<double> tolerances{1e-2, 1e-4};
    std::size_t max_dim = 10;
    std::size_t steps = 200;
    std::size_t grad_samples = 0;
    double radius = 10.0;
};

inline int run_bound_check(const BoundFlags& b, const DataFlags& d, std::ostream& out) {
    const QuadraticSuiteReport q = run_quadratic_suite(b.quadratics, b.seed, b.tolerances, b.max_dim, b.steps);
    out << "quadratics: " << q.quadratics << '\n'
        << "steps_checked: " << q.steps_checked << '\n'
        << "decrease_violations: " << q.decrease_violations << '\n';
    print_kv(out, "worst_decrease_excess", q.worst_decrease_excess);
    for (std::size_t i = 0; i < q.tolerances.size(); ++i) {
        out << "bound_violations[eps=" << q.tolerances[i] << "]: " << q.bound_violations[i] << '\n';
        out << "worst_bound_ratio[eps=" << q.tolerances[i] << "]: " << q.worst_bound_ratio[i] << '\n';
    }
    out << "boundary_2_over_L_constant: " << (q.boundary_constant ? "yes" : "no") << '\n'
        << "boundary_2.1_over_L_grows: " << (q.boundary_grows ? "yes" : "no") << '\n';

    nlohmann::json j;
    j["quadratics"] = q.quadratics;
    j["seed"] = b.seed;
    j["decrease_violations"] = q.decrease_violations;
    j["tolerances"] = q.tolerances;
    j["bound_violations"] = q.bound_violations;
    j["worst_bound_ratio"] = q.worst_bound_ratio;
    j["boundary_constant"] = q.boundary_constant;
    j["boundary_grows"] = q.boundary_grows;
    j["passed"] = q.passed();

    ExperimentConfig cfg;
    if (d.out) cfg.out_dir = *d.out;
    if (b.grad_samples > 0) {
        cfg = build_config(d, nullptr);
        const PreparedData data = load_and_prepare(cfg);
        Rng rng(b.seed);
        const ModelParams p = make_model(cfg, data.train, rng);
        const GradBoundReport g = grad_sup_bound_check(p, data.train, cfg.loss_spec(), b.grad_samples, rng, b.radius);
        out << "grad_samples: " << g.samples << '\n' << "grad_norm_violations: " << g.norm_violations << '\n';
        print_kv(out, "grad_max_ratio", g.max_ratio);
        print_kv(out, "grad_max_per_example_ratio", g.max_per_example_ratio);
        out << "grad_dominance_violations: " << g.dominance_violations << '\n';
        j["gradient"] = {{"samples", g.samples},
                         {"norm_violations", g.norm_violations},
                         {"max_ratio", g.max_ratio},
                         {"max_entry_ratio", g.max_entry_ratio},
                         {"max_per_example_ratio", g.max_per_example_ratio},
                         {"dominance_violations", g.dominance_violations}};
    }
    const auto dir = output_dir(cfg);
    std::filesystem::create_directories(dir);
    write_summary_json(j, dir / ("bound_check_seed" + std::to_string(b.seed) + ".json"));
    out << "result: " << (q.passed() ? "pass" : "fail") << '\n';
    return q.passed() ? 0 : 1;
}

}  // namespace cli

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Lipschitz learning-rate experiments"};
    app.require_subcommand(1);

    cli::DataFlags lc_data, train_data, cmp_data, bound_data;
    cli::TrainFlags train_flags, cmp_flags;
    std::optional<std::string> lr;
    std::string mode = "threshold";
    double fixed_lr = 0.1;
    cli::BoundFlags bound;

    auto* lc = app.add_subcommand("lc", "Print the Lipschitz constant and its ingredients");
    cli::add_data_flags(lc, lc_data);

    auto* train = app.add_subcommand("train", "Train one model and write its report");
    cli::add_data_flags(train, train_data);
    cli::add_train_flags(train, train_flags);
    train->add_option("--lr", lr, "Fixed rate, or 'adaptive' (default)");

    auto* cmp = app.add_subcommand("compare", "Fixed vs adaptive rate from the same initialization");
    cli::add_data_flags(cmp, cmp_data);
    cli::add_train_flags(cmp, cmp_flags);
    cmp->add_option("--mode", mode, "threshold | accuracy")->check(CLI::IsMember({"threshold", "accuracy"}));
    cmp->add_option("--fixed-lr", fixed_lr, "Rate of the fixed arm")->check(CLI::PositiveNumber);

    auto* bc = app.add_subcommand("bound-check", "Check the descent inequality and iteration bound on quadratics");
    bc->add_option("--quadratics", bound.quadratics, "Number of random quadratics");
    bc->add_option("--seed", bound.seed, "Random seed");
    bc->add_option("--tolerance", bound.tolerances, "Gradient tolerances")->expected(1, -1);
    bc->add_option("--max-dim", bound.max_dim, "Largest dimension")->check(CLI::PositiveNumber);
    bc->add_option("--steps", bound.steps, "Steps per quadratic for the decrease check");
    bc->add_option("--grad-samples", bound.grad_samples, "Also sample gradient norms on a dataset");
    bc->add_option("--radius", bound.radius, "Weight ball radius for gradient sampling");
    bc->add_option("--preset", bound_data.preset, "Bundled dataset for --grad-samples")
        ->check(CLI::IsMember(preset_names()));
    bound_data.data_dir = cli::default_data_dir();
    bc->add_option("--data-dir", bound_data.data_dir, "Directory holding the bundled CSVs");
    bc->add_option("--data", bound_data.data, "CSV file for --grad-samples");
    bc->add_option("--task", bound_data.task, "Task of --data")
        ->check(CLI::IsMember({"regression", "binary", "multiclass"}));
    bc->add_option("--out", bound_data.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
        return 2;
    }

    try {
        if (*lc) return cli::run_lc(lc_data, out);
        if (*train) return cli::run_train(train_data, train_flags, lr, out);
        if (*cmp) return cli::run_compare(cmp_data, cmp_flags, mode, fixed_lr, out);
        if (*bc) return cli::run_bound_check(bound, bound_data, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace lipschitz_lr
