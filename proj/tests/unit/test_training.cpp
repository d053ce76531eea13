#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>

#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"
#include "quietnet/error.hpp"
#include "quietnet/evaluation.hpp"
#include "quietnet/optim.hpp"
#include "quietnet/regularizers.hpp"
#include "quietnet/training.hpp"

using namespace quietnet;
namespace qt = quietnet::testing;

namespace {

TrainConfig small_config(TrainMode mode)
{
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.layer_sizes = {12, 16, 16, 4};
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.optimizer.learning_rate = 0.01;
    cfg.seed = 3;
    switch (mode) {
    case TrainMode::noise_aware:
        cfg.noise = {NoiseKind::uncorrelated, 0.1, {}};
        break;
    case TrainMode::reg_correlated:
        cfg.reg.mode = RegMode::correlated;
        cfg.reg.lambda_rowsum = {{2, 0.01}, {3, 0.01}};
        break;
    case TrainMode::reg_uncorrelated:
        cfg.reg.mode = RegMode::uncorrelated;
        cfg.reg.lambda_deriv = 0.01;
        cfg.reg.lambda_l2 = {{2, 1e-3}, {3, 1e-3}};
        break;
    default:
        break;
    }
    return cfg;
}

const Dataset& train_set()
{
    static const Dataset d = qt::blobs(600, 12, 4, 1);
    return d;
}

const Dataset& val_set()
{
    static const Dataset d = qt::blobs(200, 12, 4, 2);
    return d;
}

}  // namespace

TEST_CASE("gradient check on every objective")
{
    const auto start = std::chrono::steady_clock::now();
    const GradCheckReport report = gradient_check_all({10, 8, 8, 4}, 200, 1e-5);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(report.entries.size() == 4);
    for (const auto& e : report.entries) {
        CAPTURE(to_string(e.mode));
        CHECK(e.probes == 200);
        CHECK(e.max_rel_error < 1e-5);
        CHECK(e.passed);
    }
    CHECK(report.passed());
    CHECK_NOTHROW(require_passed(report));
    CHECK(seconds < 10.0);

    GradCheckReport failing = report;
    failing.entries[0].passed = false;
    try {
        require_passed(failing);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::GradientMismatch);
    }
}

TEST_CASE("property: assembled objective gradient matches an external finite difference")
{
    // Independent of gradient_check: perturb parameters here and replay the
    // noise stream ourselves.
    for (TrainMode mode : {TrainMode::standard, TrainMode::noise_aware, TrainMode::reg_correlated,
                           TrainMode::reg_uncorrelated}) {
        TrainConfig cfg = small_config(mode);
        cfg.layer_sizes = {6, 5, 5, 3};
        if (mode == TrainMode::reg_correlated) cfg.reg.lambda_rowsum = {{2, 0.2}, {3, 0.3}};
        if (mode == TrainMode::reg_uncorrelated) cfg.reg.lambda_deriv = 0.5;
        const Objective obj = Objective::from(cfg);
        MlpParams p = MlpParams::glorot_uniform(cfg.layer_sizes, 4);
        for (int l = 1; l <= p.num_layers(); ++l) p.b(l) = qt::random_matrix(p.b(l).size(), 1, 70 + l, 0.5);
        const Eigen::MatrixXd x = qt::random_matrix(8, 6, 5).cwiseAbs();
        const std::vector<std::uint8_t> y{0, 1, 2, 0, 1, 2, 0, 1};

        Rng rng(11);
        const ObjectiveEval ev = evaluate_objective(p, x, y, obj, rng);
        auto f = [&] {
            Rng r(11);
            return objective_value(p, x, y, obj, r);
        };
        CHECK(f() == ev.total);
        for (int l = 1; l <= p.num_layers(); ++l) {
            for (Eigen::Index i = 0; i < p.W(l).rows(); ++i) {
                if (mode == TrainMode::reg_correlated && l >= 2 && std::abs(p.W(l).row(i).sum()) < 1e-3) continue;
                for (Eigen::Index j = 0; j < p.W(l).cols(); ++j) {
                    CHECK(qt::rel_error(ev.grads.W(l)(i, j), qt::fd_coordinate(p.W(l)(i, j), f), 1e-6) < 1e-5);
                }
            }
        }
    }
}

TEST_CASE("zero epochs returns the initialization")
{
    TrainConfig cfg = small_config(TrainMode::standard);
    cfg.epochs = 0;
    const TrainResult r = train(cfg, train_set(), val_set());
    CHECK(r.params == MlpParams::glorot_uniform(cfg.layer_sizes, cfg.seed));
    CHECK(r.history.train_loss.empty());
    CHECK(r.history.penalty.empty());
    CHECK(r.history.val_accuracy.empty());
}

TEST_CASE("training learns the synthetic task and fills the history")
{
    for (TrainMode mode : {TrainMode::standard, TrainMode::noise_aware, TrainMode::reg_correlated,
                           TrainMode::reg_uncorrelated}) {
        CAPTURE(to_string(mode));
        const TrainConfig cfg = small_config(mode);
        const TrainResult r = train(cfg, train_set(), val_set());
        CHECK(r.history.train_loss.size() == 4);
        CHECK(r.history.penalty.size() == 4);
        CHECK(r.history.val_accuracy.size() == 4);
        CHECK(r.history.wall_seconds >= 0.0);
        CHECK(noiseless_accuracy(r.params, val_set()) > 90.0);
        if (mode == TrainMode::standard || mode == TrainMode::noise_aware) {
            for (double pen : r.history.penalty) CHECK(pen == 0.0);
        }
    }
}

TEST_CASE("training is bit-reproducible")
{
    for (TrainMode mode : {TrainMode::noise_aware, TrainMode::reg_uncorrelated}) {
        const TrainConfig cfg = small_config(mode);
        const TrainResult a = train(cfg, train_set(), val_set());
        const TrainResult b = train(cfg, train_set(), val_set());
        CHECK(a.params == b.params);
        CHECK(a.history.train_loss == b.history.train_loss);
        TrainConfig other = cfg;
        other.seed = 4;
        CHECK(!(train(other, train_set(), val_set()).params == a.params));
    }
}

TEST_CASE("regularized modes with zero coefficients follow the standard trajectory")
{
    const TrainConfig base = small_config(TrainMode::standard);
    const TrainResult ref = train(base, train_set(), val_set());

    TrainConfig corr = base;
    corr.mode = TrainMode::reg_correlated;
    corr.reg.mode = RegMode::correlated;
    corr.reg.lambda_rowsum = {{2, 0.0}, {3, 0.0}};
    const TrainResult rc = train(corr, train_set(), val_set());
    CHECK(rc.params == ref.params);
    CHECK(rc.history.train_loss == ref.history.train_loss);

    TrainConfig unc = base;
    unc.mode = TrainMode::reg_uncorrelated;
    unc.reg.mode = RegMode::uncorrelated;
    unc.reg.lambda_deriv = 0.0;
    unc.reg.lambda_l2 = {{2, 0.0}};
    CHECK(train(unc, train_set(), val_set()).params == ref.params);
}

TEST_CASE("noise-aware training sees fresh noise every batch")
{
    const TrainConfig cfg = small_config(TrainMode::noise_aware);
    std::vector<Eigen::MatrixXd> draws;
    TrainHooks hooks;
    hooks.on_batch = [&](int epoch, std::size_t batch, const ForwardTrace& t) {
        if (epoch == 0 && batch < 3) draws.push_back(t.noise(1));
        if (epoch == 1 && batch == 0) draws.push_back(t.noise(1));
    };
    train(cfg, train_set(), val_set(), hooks);
    REQUIRE(draws.size() == 4);
    for (const auto& d : draws) CHECK(!d.isZero(0.0));
    CHECK(draws[0].topRows(8) != draws[1].topRows(8));
    CHECK(draws[1].topRows(8) != draws[2].topRows(8));
    CHECK(draws[0].topRows(8) != draws[3].topRows(8));
}

TEST_CASE("training noise by mode")
{
    TrainConfig cfg = small_config(TrainMode::standard);
    cfg.noise = {NoiseKind::uncorrelated, 0.5, {}};
    CHECK(!cfg.training_noise().active());

    std::size_t noisy_batches = 0;
    TrainHooks hooks;
    hooks.on_batch = [&](int, std::size_t, const ForwardTrace& t) { noisy_batches += !t.noise(1).isZero(0.0); };
    cfg.epochs = 1;
    train(cfg, train_set(), val_set(), hooks);
    CHECK(noisy_batches == 0);

    TrainConfig reg = small_config(TrainMode::reg_uncorrelated);
    reg.noise = {NoiseKind::uncorrelated, 0.5, {}};
    CHECK(!reg.training_noise().active());
    reg.noise_in_reg_training = true;
    CHECK(reg.training_noise().active());
}

TEST_CASE("row-sum pressure shrinks the penalty")
{
    TrainConfig cfg = small_config(TrainMode::reg_correlated);
    cfg.reg.lambda_rowsum = {{2, 0.05}, {3, 0.05}};
    cfg.epochs = 8;
    const TrainResult r = train(cfg, train_set(), val_set());
    CHECK(r.history.penalty.back() < r.history.penalty.front());
    double max_row_sum = 0.0;
    for (int l = 2; l <= 3; ++l) max_row_sum = std::max(max_row_sum, r.params.W(l).rowwise().sum().cwiseAbs().maxCoeff());
    CHECK(max_row_sum < 0.1);
}

TEST_CASE("configuration errors")
{
    auto code = [](const TrainConfig& cfg) {
        try {
            train(cfg, train_set(), val_set());
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::Io;
    };
    TrainConfig cfg = small_config(TrainMode::standard);
    cfg.reg.mode = RegMode::correlated;
    CHECK(code(cfg) == Errc::ConfigMismatch);

    cfg = small_config(TrainMode::noise_aware);
    cfg.noise.kind = NoiseKind::none;
    CHECK(code(cfg) == Errc::ConfigMismatch);

    cfg = small_config(TrainMode::standard);
    cfg.layer_sizes = {13, 8, 4};
    CHECK(code(cfg) == Errc::ConfigMismatch);

    cfg = small_config(TrainMode::standard);
    cfg.batch_size = 0;
    CHECK(code(cfg) == Errc::ConfigMismatch);

    CHECK(parse_train_mode("reg-uncorrelated") == TrainMode::reg_uncorrelated);
    CHECK(to_string(TrainMode::noise_aware) == "noise-aware");
    CHECK_THROWS_AS(parse_train_mode("fancy"), Error);
}

TEST_CASE("divergence is detected")
{
    TrainConfig cfg = small_config(TrainMode::standard);
    cfg.optimizer.kind = OptimizerKind::sgd;
    cfg.optimizer.learning_rate = 1e6;
    cfg.epochs = 6;
    try {
        train(cfg, train_set(), val_set());
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DivergenceDetected);
    }
}

TEST_CASE("validation split keeps the tail")
{
    const auto [head, tail] = split_validation(train_set(), 100);
    CHECK(head.features.rows() == 500);
    CHECK(tail.features.rows() == 100);
    CHECK(tail.features.row(0) == train_set().features.row(500));
    CHECK(tail.labels.back() == train_set().labels.back());
    CHECK_THROWS_AS(split_validation(train_set(), 600), Error);
}

TEST_CASE("optimizer steps")
{
    MlpParams p = MlpParams::zeros({2, 2, 1});
    Gradients g = Gradients::zeros_like(p);
    g.W(1).setConstant(1.0);

    OptimizerSettings s;
    s.kind = OptimizerKind::sgd;
    s.learning_rate = 0.1;
    auto sgd = make_optimizer(s, p);
    sgd->step(p, g);
    CHECK(p.W(1)(0, 0) == doctest::Approx(-0.1));

    p = MlpParams::zeros({2, 2, 1});
    s.kind = OptimizerKind::sgd_momentum;
    auto mom = make_optimizer(s, p);
    mom->step(p, g);
    mom->step(p, g);
    // velocity: 1, then 0.9 + 1
    CHECK(p.W(1)(0, 0) == doctest::Approx(-0.1 - 0.19));

    p = MlpParams::zeros({2, 2, 1});
    s.kind = OptimizerKind::adam;
    s.learning_rate = 1e-3;
    auto adam = make_optimizer(s, p);
    adam->step(p, g);
    // First bias-corrected Adam step is lr * g / (|g| + eps).
    CHECK(p.W(1)(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.W(2).isZero(0.0));
}
