// Acceptance checks, one per numbered criterion.
//
//   acceptance        run all ten
//   acceptance N      run criterion N only
//
// Each prints one line "cN PASS|FAIL <summary>" and the exit code is nonzero
// when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lipschitz_lr/lipschitz_lr.hpp"

using namespace lipschitz_lr;

namespace {

const std::filesystem::path kData = LIPSCHITZ_LR_DATA_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome c1_gradient_supremum() {
    Timer t;
    Outcome o{true, ""};
    for (const char* name : {"iris", "digits", "breast_cancer", "two_moons"}) {
        ExperimentConfig cfg = preset(name, kData);
        cfg.scaling = ScalingMode::SumToOne;
        if (cfg.intercept == InterceptPlacement::AfterScaling) cfg.intercept = InterceptPlacement::BeforeScaling;
        cfg.hidden.clear();
        cfg.bias = false;
        const PreparedData data = load_and_prepare(cfg);
        Rng init(cfg.seed);
        const ModelParams p = make_model(cfg, data.train, init);
        Rng rng(cfg.seed ^ 0xc1);
        const GradBoundReport r = grad_sup_bound_check(p, data.train, cfg.loss_spec(), 10000, rng, 10.0);
        o.pass = o.pass && r.passed();
        o.detail += std::string(name) + ": " + std::to_string(r.norm_violations) + "/10000 over L, max ratio " +
                    fmt(r.max_ratio) + " (per-example max " + fmt(r.max_per_example_ratio) + "); ";
    }
    const double s = t.seconds();
    o.pass = o.pass && s < 30.0;
    o.detail += fmt(s, 3) + " s";
    return o;
}

Outcome c2_threshold_speedup() {
    Timer t;
    Outcome o{true, ""};
    const std::size_t cap = 20000;
    for (auto [name, ratio] : {std::pair{"iris", 4.0}, std::pair{"digits", 10.0}, std::pair{"breast_cancer", 10.0}}) {
        ExperimentConfig cfg = preset(name, kData);
        cfg.epoch_cap = cap;
        const PairedReport pr = run_threshold_experiment(cfg, load_and_prepare(cfg));
        const auto& ea = pr.adaptive.epochs_to_threshold;
        const auto& ef = pr.fixed.epochs_to_threshold;
        bool ok = false;
        std::string fixed_text;
        if (!ea) {
            fixed_text = ef ? std::to_string(*ef) : ">" + std::to_string(cap);
        } else if (ef) {
            ok = double(*ea) <= double(*ef) / ratio;
            fixed_text = std::to_string(*ef);
        } else {
            // Censored fixed arm: E_fixed > cap is a valid lower bound.
            ok = double(*ea) <= double(cap) / ratio;
            fixed_text = ">" + std::to_string(cap) + " (censored)";
        }
        o.pass = o.pass && ok;
        o.detail += std::string(name) + ": E_fixed " + fixed_text + ", E_adaptive " +
                    (ea ? std::to_string(*ea) : "censored") + " (need ratio >= " + fmt(ratio) + "); ";
    }
    const double s = t.seconds();
    o.pass = o.pass && s < 300.0;
    o.detail += fmt(s, 3) + " s";
    return o;
}

Outcome c3_accuracy_ordering() {
    Outcome o{true, ""};
    {
        ExperimentConfig cfg = preset("iris", kData);
        cfg.train_fraction = 0.7;
        cfg.epochs = 200;
        const PairedReport pr = run_accuracy_experiment(cfg, load_and_prepare(cfg));
        const double af = pr.fixed.final_val_acc, aa = pr.adaptive.final_val_acc;
        o.pass = o.pass && aa >= af && aa >= 0.95;
        o.detail += "iris: A_fixed " + fmt(100 * af) + "%, A_adaptive " + fmt(100 * aa) + "%; ";
    }
    {
        ExperimentConfig cfg = preset("breast_cancer", kData);
        cfg.train_fraction = 0.7;
        cfg.epochs = 1000;
        const PairedReport pr = run_accuracy_experiment(cfg, load_and_prepare(cfg));
        const double aa = pr.adaptive.final_val_acc;
        o.pass = o.pass && aa >= 0.85;
        o.detail += "breast_cancer: A_fixed " + fmt(100 * pr.fixed.final_val_acc) + "%, A_adaptive " +
                    fmt(100 * aa) + "%";
    }
    return o;
}

Outcome c4_decrease_inequality() {
    Timer t;
    const QuadraticSuiteReport r = run_quadratic_suite(100, 4);
    const double s = t.seconds();
    return {r.decrease_ok() && s < 5.0,
            std::to_string(r.decrease_violations) + " violations in " + std::to_string(r.steps_checked) +
                " steps, worst excess " + fmt(r.worst_decrease_excess) + ", 2.1/L grows: " +
                (r.boundary_grows ? "yes" : "no") + ", " + fmt(s, 3) + " s"};
}

Outcome c5_iteration_bound() {
    Timer t;
    const QuadraticSuiteReport r = run_quadratic_suite(100, 4);
    const double s = t.seconds();
    std::string d;
    for (std::size_t i = 0; i < r.tolerances.size(); ++i)
        d += "eps " + fmt(r.tolerances[i]) + ": " + std::to_string(r.bound_violations[i]) +
             " over bound, worst n/bound " + fmt(r.worst_bound_ratio[i]) + "; ";
    return {r.bound_ok() && s < 10.0, d + fmt(s, 3) + " s"};
}

// Central differences at step 1e-6; relative error with a 1e-4 floor on the
// denominator so coordinates with near-zero gradient compare absolutely.
double fd_max_error(const ModelParams& params, const Matrix& x, const Matrix& y, const LossSpec& spec) {
    const auto loss = [&](const ModelParams& p) { return model_loss(p, forward(p, x), y, spec, x.rows()); };
    const Gradients g = backward(params, forward(params, x), y, spec, x.rows());
    double worst = 0.0;
    for (std::size_t l = 0; l < params.depth(); ++l) {
        const auto probe = [&](bool is_bias, std::size_t i, double analytic) {
            ModelParams a = params, b = params;
            double& pa = is_bias ? a.layers[l].bias[i] : a.layers[l].weights.values()[i];
            double& pb = is_bias ? b.layers[l].bias[i] : b.layers[l].weights.values()[i];
            pa += 1e-6;
            pb -= 1e-6;
            const double fd = (loss(a) - loss(b)) / 2e-6;
            worst = std::max(worst, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-4}));
        };
        for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i)
            probe(false, i, g.weights[l].values()[i]);
        for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i) probe(true, i, g.biases[l][i]);
    }
    return worst;
}

Outcome c6_gradient_correctness() {
    Outcome o{true, ""};
    double worst_all = 0.0;
    std::size_t cases = 0;
    for (auto kind : {LossKind::LeastSquares, LossKind::BinaryCrossEntropy, LossKind::MulticlassCrossEntropy})
        for (bool l2 : {false, true})
            for (int arch = 0; arch < 3; ++arch) {
                Rng rng(100 + cases);
                const std::size_t n = 3, m = 6, out = kind == LossKind::MulticlassCrossEntropy ? 3 : 1;
                std::vector<std::size_t> widths{n};
                std::vector<Activation> acts;
                if (arch > 0) {
                    widths.push_back(4);
                    acts.push_back(arch == 1 ? Activation::ReLU : Activation::Sigmoid);
                }
                widths.push_back(out);
                acts.push_back(output_activation_for(kind));
                ModelParams p = init_params(widths, acts, rng, 0.8, true);
                for (auto& layer : p.layers)
                    for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
                Matrix x(m, n), y(m, out);
                for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
                for (std::size_t r = 0; r < m; ++r) {
                    if (kind == LossKind::LeastSquares)
                        y(r, 0) = rng.uniform(-2.0, 2.0);
                    else if (kind == LossKind::BinaryCrossEntropy)
                        y(r, 0) = double(rng.uniform_index(2));
                    else
                        y(r, rng.uniform_index(out)) = 1.0;
                }
                LossSpec spec{kind, NoRegularization{}};
                if (l2) spec.regularization = L2{0.1};
                const double e = fd_max_error(p, x, y, spec);
                worst_all = std::max(worst_all, e);
                o.pass = o.pass && e <= 1e-5 && p.parameter_count() <= 50;
                ++cases;
            }
    o.detail = std::to_string(cases) + " configurations, worst relative error " + fmt(worst_all);
    return o;
}

Outcome c7_optimizer_oracles() {
    std::vector<std::string> failed;
    const auto scalar_step = [](OptimizerConfig c, double w, double g, auto step) {
        OptimizerState s(c);
        std::vector<double> wv{w}, gv{g};
        ParamTensors p{std::span<double>(wv)};
        GradTensors gt{std::span<const double>(gv)};
        step(s, p, gt);
        return wv[0];
    };
    OptimizerConfig zero;
    zero.beta = zero.beta1 = zero.beta2 = 0.0;
    zero.adamo_first_epoch_lr.reset();
    zero.rmsprop_fallback_lr.reset();

    if (scalar_step(zero, 1.0, 2.0, [](auto& s, auto& p, auto& g) { adamo_step(s, p, g); }) != 0.0)
        failed.push_back("adamo beta=0");
    if (std::abs(scalar_step(zero, 1.0, 2.0, [](auto& s, auto& p, auto& g) { adarmsprop_step(s, p, g); })) > 1e-15)
        failed.push_back("rmsprop beta=0");
    if (std::abs(scalar_step(zero, 1.0, 2.0, [](auto& s, auto& p, auto& g) { autoadam_step(s, p, g, 4.0); })) >
        1e-15)
        failed.push_back("autoadam beta=0");
    {
        std::vector<double> w{1.0}, g{2.0};
        sgd_step(ParamTensors{std::span<double>(w)}, GradTensors{std::span<const double>(g)}, 0.5);
        if (w[0] != 0.0) failed.push_back("sgd");
    }

    // Brute-force weighted sums over 100 random steps.
    Rng rng(7);
    OptimizerConfig c = zero;
    c.beta = 0.9;
    c.beta1 = 0.8;
    c.beta2 = 0.99;
    OptimizerState mo(c), rms(c), aa(c);
    std::vector<double> w1(4), w2(4), w3(4);
    std::vector<std::vector<double>> gs;
    std::vector<double> feeds;
    double worst = 0.0;
    const auto brute = [](const std::vector<double>& xs, double beta) {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            s += (1 - beta) * std::pow(beta, double(xs.size() - 1 - i)) * xs[i];
        return s;
    };
    for (int n = 0; n < 100; ++n) {
        std::vector<double> g(4);
        for (double& v : g) v = rng.uniform(-3.0, 3.0);
        gs.push_back(g);
        feeds.push_back(rng.uniform(0.0, 5.0));
        const GradTensors gt{std::span<const double>(gs.back())};
        adamo_step(mo, ParamTensors{std::span<double>(w1)}, gt);
        adarmsprop_step(rms, ParamTensors{std::span<double>(w2)}, gt);
        autoadam_step(aa, ParamTensors{std::span<double>(w3)}, gt, feeds.back());

        std::vector<double> norms, sq, col, colsq;
        for (const auto& h : gs) {
            const GradTensors ht{std::span<const double>(h)};
            norms.push_back(max_tensor_norm(ht));
            sq.push_back(max_squared_tensor_norm(ht));
        }
        const auto rel = [&](double a, double b) { worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b))); };
        rel(mo.K, brute(norms, 0.9));
        rel(rms.K, brute(sq, 0.9));
        rel(aa.K1, brute(norms, 0.8));
        rel(aa.K2, brute(feeds, 0.99));
        for (std::size_t j = 0; j < 4; ++j) {
            col.clear();
            colsq.clear();
            for (const auto& h : gs) {
                col.push_back(h[j]);
                colsq.push_back(h[j] * h[j]);
            }
            rel(mo.velocity[0][j], brute(col, 0.9));
            rel(rms.accumulator[0][j], brute(colsq, 0.9));
            rel(aa.velocity[0][j], brute(col, 0.8));
            rel(aa.accumulator[0][j], brute(colsq, 0.99));
        }
    }
    if (worst > 1e-12) failed.push_back("ewa oracle");

    // Bias-corrected EWA of a constant.
    double worst_bc = 0.0;
    for (double beta : {0.5, 0.9, 0.999}) {
        OptimizerConfig b = zero;
        b.beta = beta;
        b.bias_correction = BiasCorrection::Step;
        OptimizerState s(b);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> w{0.0}, g{2.5};
            adamo_step(s, ParamTensors{std::span<double>(w)}, GradTensors{std::span<const double>(g)});
            const double d = bias_correction_divisor(s, beta);
            worst_bc = std::max({worst_bc, std::abs(s.K / d - 2.5), std::abs(s.velocity[0][0] / d - 2.5)});
        }
    }
    if (worst_bc > 1e-12) failed.push_back("bias correction");

    std::string d = "ewa worst rel error " + fmt(worst) + ", bias-corrected constant worst error " + fmt(worst_bc);
    for (const auto& f : failed) d += "; failed: " + f;
    return {failed.empty(), d};
}

Outcome c8_constant_equivalence() {
    Rng rng(8);
    std::size_t agree = 0;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 2 + rng.uniform_index(20), n = 1 + rng.uniform_index(8);
        Matrix x(m, n);
        for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
        Vector y(m);
        for (double& v : y) v = rng.uniform(-2.0, 2.0);
        const double K = rng.uniform(0.1, 5.0), nx = frobenius_norm(x);
        const double a = lc_nn_regression(K * nx, y, nx, m).L;
        const double b = lc_linear_regression(x, y, K, m).L;
        const double rel = std::abs(a - b) / std::abs(b);
        worst = std::max(worst, rel);
        if (rel <= 1e-12) ++agree;
    }
    return {agree == 100, std::to_string(agree) + "/100 instances within 1e-12, worst relative gap " + fmt(worst)};
}

Outcome c9_mlp_training() {
    ExperimentConfig cfg = preset("two_moons", kData);
    cfg.epochs = 200;
    const PreparedData data = load_and_prepare(cfg);
    Rng r(cfg.seed);
    const TrainReport rep = run_training(cfg, data, make_model(cfg, data.train, r));
    double best = 0.0;
    std::size_t first = 0;
    for (const auto& row : rep.rows)
        if (row.train_acc > best) {
            best = row.train_acc;
            if (best >= 0.9 && first == 0) first = row.epoch;
        }
    const bool valid = rep.lr_trace.all_rates_valid() && rep.lr_trace.size() == 200;
    return {best >= 0.9 && valid, "final train acc " + fmt(100 * rep.final_train_acc) + "%, first >= 90% at epoch " +
                                      std::to_string(first) + ", alpha range [" +
                                      fmt(*std::min_element(rep.lr_trace.lr.begin(), rep.lr_trace.lr.end())) + ", " +
                                      fmt(*std::max_element(rep.lr_trace.lr.begin(), rep.lr_trace.lr.end())) +
                                      "], all valid: " + (valid ? "yes" : "no")};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome c10_determinism() {
    const auto root = std::filesystem::temp_directory_path() / "lipschitz_lr_acceptance_c10";
    std::filesystem::remove_all(root);
    const std::vector<std::string> invocations{
        "compare --preset iris --mode threshold",
        "compare --preset two_moons --mode accuracy --epochs 30 --train-fraction 0.8",
        "compare --preset digits --mode threshold --seed 3 --cap 300",
    };
    std::size_t files = 0;
    for (std::size_t i = 0; i < invocations.size(); ++i) {
        std::vector<std::filesystem::path> dirs;
        for (int run = 0; run < 2; ++run) {
            const auto dir = root / (std::to_string(i) + "_" + std::to_string(run));
            dirs.push_back(dir);
            const std::string cmd = std::string("\"") + LIPSCHITZ_LR_CLI + "\" " + invocations[i] + " --data-dir \"" +
                                    kData.string() + "\" --out \"" + dir.string() + "\" > /dev/null";
            if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + invocations[i]};
        }
        std::vector<std::string> names;
        for (const auto& e : std::filesystem::directory_iterator(dirs[0]))
            if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
        if (names.empty()) return {false, "no CSVs written by: " + invocations[i]};
        for (const auto& n : names) {
            if (slurp(dirs[0] / n) != slurp(dirs[1] / n)) return {false, n + " differs for: " + invocations[i]};
            ++files;
        }
    }
    return {true, std::to_string(files) + " CSV files byte-identical across " +
                      std::to_string(invocations.size()) + " repeated compare invocations"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> checks{
        c1_gradient_supremum, c2_threshold_speedup,   c3_accuracy_ordering,   c4_decrease_inequality,
        c5_iteration_bound,   c6_gradient_correctness, c7_optimizer_oracles,  c8_constant_equivalence,
        c9_mlp_training,      c10_determinism};
    std::vector<std::size_t> which;
    if (argc > 1) {
        for (int i = 1; i < argc; ++i) {
            const int n = std::atoi(argv[i]);
            if (n < 1 || n > int(checks.size())) {
                std::cerr << "criterion must be 1.." << checks.size() << '\n';
                return 2;
            }
            which.push_back(std::size_t(n));
        }
    } else {
        for (std::size_t n = 1; n <= checks.size(); ++n) which.push_back(n);
    }
    bool all = true;
    for (std::size_t n : which) {
        Outcome o;
        try {
            o = checks[n - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << 'c' << n << (o.pass ? " PASS " : " FAIL ") << o.detail << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
