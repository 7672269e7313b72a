#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lipschitz_lr/harness.hpp"
#include "lipschitz_lr/presets.hpp"

using namespace lipschitz_lr;

namespace {

const std::filesystem::path kData = LIPSCHITZ_LR_DATA_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("lipschitz_lr_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST(MinIterationsBound, Values) {
    EXPECT_EQ(min_iterations_bound(1.0, 2.0, 0.0, 1.0), 4u);
    EXPECT_EQ(min_iterations_bound(3.0, 1.0, 1.0, 0.5), 0u);
    EXPECT_EQ(min_iterations_bound(1.0, 1.0, 0.0, 0.3), 7u);
    EXPECT_THROW(min_iterations_bound(1.0, 1.0, 0.0, 0.0), InvalidToleranceError);
    EXPECT_THROW(min_iterations_bound(0.0, 1.0, 0.0, 1.0), InvalidBoundError);
    EXPECT_THROW(min_iterations_bound(1.0, 0.0, 1.0, 1.0), InvalidBoundError);
}

TEST(Quadratic, RandomInstanceIsSymmetricWithKnownSpectrum) {
    Rng rng(5);
    const Quadratic f = random_quadratic(rng, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(f.A(i, j), f.A(j, i), 1e-12);
    double trace = 0.0, eig = 0.0;
    for (std::size_t i = 0; i < 6; ++i) trace += f.A(i, i);
    for (double e : f.eigenvalues) {
        eig += e;
        EXPECT_GE(e, 0.01);
        EXPECT_LE(e, 10.0);
    }
    EXPECT_NEAR(trace, eig, 1e-10);
    EXPECT_EQ(f.L, *std::max_element(f.eigenvalues.begin(), f.eigenvalues.end()));
}

TEST(QuadraticSuite, DecreaseAndIterationBoundHold) {
    const QuadraticSuiteReport r = run_quadratic_suite(100, 1234);
    EXPECT_EQ(r.decrease_violations, 0u);
    EXPECT_TRUE(r.boundary_constant);
    EXPECT_TRUE(r.boundary_grows);
    EXPECT_TRUE(r.bound_ok());
    EXPECT_TRUE(r.passed());
    EXPECT_LE(r.worst_decrease_excess, 1e-10);
}

TEST(OscillationProbe, FlagsOvershootingRate) {
    const double L = 4.0;
    for (double eta : {1.0 / L, 3.0 / L}) {
        double w = 1.0;
        const auto rep = oscillation_probe(
            0.5 * L, [&] {
                w -= eta * L * w;
                return 0.5 * L * w * w;
            },
            100, 10);
        EXPECT_EQ(rep.samples.size(), 11u);
        EXPECT_EQ(rep.tail_non_increasing, eta < 2.0 / L);
    }
    const std::vector<double> flat{3, 2, 2, 2, 2.01};
    EXPECT_TRUE(tail_non_increasing(flat));
    const std::vector<double> bump{3, 2, 2, 2, 2.5};
    EXPECT_FALSE(tail_non_increasing(bump));
}

TEST(PrepareData, InterceptAndScaling) {
    ExperimentConfig cfg = preset("breast_cancer", kData);
    const PreparedData p = load_and_prepare(cfg);
    EXPECT_EQ(p.train.examples(), 569u);
    EXPECT_EQ(p.train.feature_names.back(), "intercept");
    EXPECT_NEAR(p.train.features(0, p.train.feature_count() - 1), 1.0 / 569.0, 1e-15);
    EXPECT_GT(p.K, 0.0);

    cfg.train_fraction = 0.7;
    const PreparedData s = load_and_prepare(cfg);
    EXPECT_EQ(s.train.examples() + s.validation.examples(), 569u);
    EXPECT_EQ(s.validation.feature_count(), s.train.feature_count());
}

TEST(PrepareData, DigitsDropsBlankPixels) {
    ExperimentConfig cfg = preset("digits", kData);
    cfg.scaling = ScalingMode::SumToOne;
    const PreparedData p = load_and_prepare(cfg);
    EXPECT_FALSE(p.dropped_columns.empty());
    EXPECT_EQ(p.train.feature_count() + p.dropped_columns.size(), 64u);
}

TEST(ThresholdExperiment, InitialLossThresholdGivesZeroEpochs) {
    ExperimentConfig cfg = preset("iris", kData);
    const PreparedData data = load_and_prepare(cfg);
    Rng r(cfg.seed);
    Trainer t(cfg, data, make_model(cfg, data.train, r));
    cfg.threshold = t.initial_record().loss;
    const PairedReport rep = run_threshold_experiment(cfg, data);
    EXPECT_EQ(rep.fixed.epochs_to_threshold, 0u);
    EXPECT_EQ(rep.adaptive.epochs_to_threshold, 0u);
    EXPECT_EQ(rep.fixed.rows.size(), 1u);
}

TEST(ThresholdExperiment, IrisAdaptiveIsFaster) {
    const ExperimentConfig cfg = preset("iris", kData);
    const PairedReport rep = run_threshold_experiment(cfg, load_and_prepare(cfg));
    ASSERT_TRUE(rep.fixed.epochs_to_threshold);
    ASSERT_TRUE(rep.adaptive.epochs_to_threshold);
    EXPECT_LT(*rep.adaptive.epochs_to_threshold, *rep.fixed.epochs_to_threshold);
    EXPECT_EQ(rep.fixed.init_checksum, rep.adaptive.init_checksum);
    EXPECT_EQ(rep.fixed.policy, "fixed-0.1");
    EXPECT_EQ(rep.adaptive.policy, "adaptive");
    EXPECT_TRUE(rep.adaptive.lr_trace.all_rates_valid());
}

TEST(ThresholdExperiment, CensoredWhenCapIsHit) {
    ExperimentConfig cfg = preset("iris", kData);
    cfg.threshold = 1e-9;
    cfg.epoch_cap = 5;
    const PairedReport rep = run_threshold_experiment(cfg, load_and_prepare(cfg));
    EXPECT_TRUE(rep.fixed.censored);
    EXPECT_FALSE(rep.fixed.epochs_to_threshold);
    EXPECT_EQ(rep.fixed.epochs_run, 5u);
}

TEST(AccuracyExperiment, ZeroEpochsGiveEqualAccuracies) {
    ExperimentConfig cfg = preset("iris", kData);
    cfg.epochs = 0;
    cfg.train_fraction = 0.7;
    const PairedReport rep = run_accuracy_experiment(cfg, load_and_prepare(cfg));
    EXPECT_EQ(rep.fixed.final_val_acc, rep.adaptive.final_val_acc);
    EXPECT_EQ(rep.fixed.final_train_acc, rep.adaptive.final_train_acc);
}

TEST(AccuracyExperiment, RegressionIsUnsupported) {
    const ExperimentConfig cfg = preset("linreg_small", kData);
    EXPECT_THROW(run_accuracy_experiment(cfg, load_and_prepare(cfg)), UnsupportedMetricError);
}

TEST(Training, RegressionAdaptiveDecreasesLoss) {
    ExperimentConfig cfg = preset("linreg_small", kData);
    cfg.epochs = 50;
    const PreparedData data = load_and_prepare(cfg);
    Rng r(cfg.seed);
    const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, r));
    ASSERT_EQ(rep.rows.size(), 51u);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) EXPECT_LE(rep.rows[i].loss, rep.rows[i - 1].loss);
}

TEST(Training, AdaptiveOptimizersRunOnTwoMoons) {
    for (auto kind : {OptimizerKind::AdaMo, OptimizerKind::AdaRmsProp, OptimizerKind::AutoAdam}) {
        ExperimentConfig cfg = preset("two_moons", kData);
        cfg.epochs = 5;
        cfg.optimizer.kind = kind;
        const PreparedData data = load_and_prepare(cfg);
        Rng r(cfg.seed);
        const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, r));
        EXPECT_EQ(rep.rows.size(), 6u) << to_string(kind);
        EXPECT_TRUE(rep.lr_trace.all_rates_valid()) << to_string(kind);
        EXPECT_TRUE(std::isfinite(rep.final_loss));
    }
}

TEST(Training, FixedPolicyNeedsSgd) {
    ExperimentConfig cfg = preset("iris", kData);
    cfg.policy = {LrPolicyKind::Fixed, 0.1};
    cfg.optimizer.kind = OptimizerKind::AdaMo;
    const PreparedData data = load_and_prepare(cfg);
    Rng r(1);
    EXPECT_THROW(Trainer(cfg, data, make_model(cfg, data.train, r)), ConfigError);
}

TEST(Training, SameSeedIsBitIdentical) {
    ExperimentConfig cfg = preset("two_moons", kData);
    cfg.epochs = 10;
    const PreparedData data = load_and_prepare(cfg);
    Rng a(cfg.seed), b(cfg.seed);
    const TrainReport x = run_training(cfg, data, make_model(cfg, data.train, a));
    const TrainReport y = run_training(cfg, data, make_model(cfg, data.train, b));
    EXPECT_EQ(x.rows, y.rows);
}

TEST(MetricsCsv, RoundTrip) {
    ExperimentConfig cfg = preset("iris", kData);
    cfg.epochs = 7;
    cfg.threshold.reset();
    const PreparedData data = load_and_prepare(cfg);
    Rng r(cfg.seed);
    const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, r));
    const auto dir = temp_dir("metrics");
    const auto path = (dir / "m.csv").string();
    write_metrics_csv(rep, path);
    EXPECT_EQ(read_metrics_csv(path), rep.rows);
    EXPECT_EQ(slurp(path).substr(0, kMetricsHeader.size()), kMetricsHeader);
}

TEST(ReportFiles, NamedBySeedAndPolicy) {
    ExperimentConfig cfg = preset("iris", kData);
    cfg.epochs = 2;
    cfg.threshold.reset();
    cfg.out_dir = temp_dir("reports").string();
    const PreparedData data = load_and_prepare(cfg);
    Rng r(cfg.seed);
    const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, r));
    const auto metrics = write_report_files(cfg, rep);
    EXPECT_EQ(metrics.filename(), "iris_seed42_adaptive_metrics.csv");
    EXPECT_TRUE(std::filesystem::exists(metrics.parent_path() / "iris_seed42_adaptive_lr.csv"));
    const auto j = report_json(rep);
    EXPECT_EQ(j["epochs_run"], 2);
    EXPECT_TRUE(j["lr_trace_valid"].get<bool>());
    EXPECT_EQ(config_json(cfg)["seed"], 42);
}

TEST(Presets, AllLoad) {
    for (const auto& n : preset_names()) {
        const ExperimentConfig cfg = preset(n, kData);
        EXPECT_NO_THROW(load_and_prepare(cfg)) << n;
    }
    EXPECT_THROW(preset("mnist", kData), ConfigError);
}
