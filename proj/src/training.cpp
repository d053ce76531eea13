#include "quietnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "quietnet/error.hpp"
#include "quietnet/evaluation.hpp"

namespace quietnet {

std::string_view to_string(TrainMode mode) noexcept
{
    switch (mode) {
    case TrainMode::standard: return "standard";
    case TrainMode::noise_aware: return "noise-aware";
    case TrainMode::reg_correlated: return "reg-correlated";
    case TrainMode::reg_uncorrelated: return "reg-uncorrelated";
    }
    return "standard";
}

TrainMode parse_train_mode(std::string_view text)
{
    if (text == "standard") return TrainMode::standard;
    if (text == "noise-aware") return TrainMode::noise_aware;
    if (text == "reg-correlated") return TrainMode::reg_correlated;
    if (text == "reg-uncorrelated") return TrainMode::reg_uncorrelated;
    throw Error(Errc::ConfigParse, "unknown training mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const
{
    if (layer_sizes.size() < 2 || std::any_of(layer_sizes.begin(), layer_sizes.end(), [](int n) { return n <= 0; })) {
        throw Error(Errc::ConfigMismatch, "layer_sizes needs at least two positive entries");
    }
    if (epochs < 0 || batch_size <= 0) {
        throw Error(Errc::ConfigMismatch, "epochs must be >= 0 and batch_size > 0");
    }
    if (!(optimizer.learning_rate > 0.0)) {
        throw Error(Errc::ConfigMismatch, "learning rate must be positive");
    }
    const int L = static_cast<int>(layer_sizes.size()) - 1;
    noise.validate(L);
    reg.validate(L);

    const RegMode expected = mode == TrainMode::reg_correlated     ? RegMode::correlated
                             : mode == TrainMode::reg_uncorrelated ? RegMode::uncorrelated
                                                                   : RegMode::none;
    if (reg.mode != expected) {
        throw Error(Errc::ConfigMismatch, "training mode " + std::string(to_string(mode)) + " requires reg.mode " +
                                              std::string(to_string(expected)) + ", got " +
                                              std::string(to_string(reg.mode)));
    }
    if (mode == TrainMode::noise_aware && noise.kind == NoiseKind::none) {
        throw Error(Errc::ConfigMismatch, "noise-aware training needs noise.kind correlated or uncorrelated");
    }
}

NoiseSpec TrainConfig::training_noise() const
{
    switch (mode) {
    case TrainMode::standard: return {};
    case TrainMode::noise_aware: return noise;
    case TrainMode::reg_correlated:
    case TrainMode::reg_uncorrelated: return noise_in_reg_training ? noise : NoiseSpec{};
    }
    return {};
}

Objective Objective::from(const TrainConfig& cfg)
{
    return Objective{cfg.loss, cfg.training_noise(), cfg.reg};
}

ObjectiveEval evaluate_objective(const MlpParams& params, const Eigen::MatrixXd& input,
                                 std::span<const std::uint8_t> labels, const Objective& objective, Rng& noise_rng)
{
    ObjectiveEval out;
    out.trace = forward(params, input, objective.noise, noise_rng);
    LossResult base = loss_and_output_grad(out.trace.logits(), labels, objective.loss);
    const RegTerms terms = total_loss(base.loss, params, out.trace, objective.reg);

    out.data_loss = base.loss;
    out.penalty = terms.penalty;
    out.total = terms.total;
    out.grads = backward(params, out.trace, base.grad, terms.preact_grads);
    add_weight_terms(out.grads, terms);
    return out;
}

double objective_value(const MlpParams& params, const Eigen::MatrixXd& input, std::span<const std::uint8_t> labels,
                       const Objective& objective, Rng& noise_rng)
{
    const ForwardTrace trace = forward(params, input, objective.noise, noise_rng);
    const LossResult base = loss_and_output_grad(trace.logits(), labels, objective.loss);
    return total_loss(base.loss, params, trace, objective.reg).total;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, std::size_t holdout)
{
    if (holdout >= data.size()) {
        throw Error(Errc::ShapeMismatch, "validation holdout must be smaller than the dataset");
    }
    const std::size_t keep = data.size() - holdout;
    return {slice(data, 0, keep), slice(data, keep, holdout)};
}

namespace {

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng)
{
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
}

void check_data(const TrainConfig& cfg, const Dataset& data, const char* what)
{
    if (data.features.cols() != cfg.layer_sizes.front()) {
        throw Error(Errc::ConfigMismatch, std::string(what) + " data has " + std::to_string(data.features.cols()) +
                                              " features, network input is " +
                                              std::to_string(cfg.layer_sizes.front()));
    }
    for (auto y : data.labels) {
        if (y >= cfg.layer_sizes.back()) {
            throw Error(Errc::ConfigMismatch, std::string(what) + " data has labels beyond the output width");
        }
    }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const TrainHooks& hooks)
{
    cfg.validate();
    return train_from(cfg, MlpParams::glorot_uniform(cfg.layer_sizes, cfg.seed), train_data, val_data, hooks);
}

TrainResult train_from(const TrainConfig& cfg, MlpParams init, const Dataset& train_data, const Dataset& val_data,
                       const TrainHooks& hooks)
{
    cfg.validate();
    init.validate();
    if (init.layer_sizes != cfg.layer_sizes) {
        throw Error(Errc::ConfigMismatch, "initial parameters do not match layer_sizes");
    }
    check_data(cfg, train_data, "training");
    if (val_data.size() > 0) {
        check_data(cfg, val_data, "validation");
    }

    const auto started = std::chrono::steady_clock::now();
    TrainResult result{std::move(init), {}};
    MlpParams& params = result.params;
    TrainHistory& history = result.history;
    if (cfg.epochs == 0 || train_data.size() == 0) {
        return result;
    }

    const Objective objective = Objective::from(cfg);
    auto optimizer = make_optimizer(cfg.optimizer, params);
    const std::size_t n = train_data.size();
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    const Eigen::Index width = train_data.features.cols();
    std::vector<std::size_t> order(n);
    std::vector<std::uint8_t> labels;
    Eigen::MatrixXd batch;

    double initial_loss = 0.0;
    bool have_initial = false;
    int epochs_above = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = Rng::derive(cfg.seed, {stream::shuffle, static_cast<std::uint64_t>(epoch)});
        shuffle_indices(order, shuffle_rng);

        double loss_sum = 0.0;
        double penalty_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch_size, ++batches) {
            const std::size_t rows = std::min(batch_size, n - start);
            batch.resize(static_cast<Eigen::Index>(rows), width);
            labels.resize(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                batch.row(static_cast<Eigen::Index>(r)) =
                    train_data.features.row(static_cast<Eigen::Index>(order[start + r]));
                labels[r] = train_data.labels[order[start + r]];
            }
            Rng noise_rng = Rng::derive(cfg.seed, {stream::train_noise, static_cast<std::uint64_t>(epoch),
                                                   static_cast<std::uint64_t>(batches)});
            const ObjectiveEval ev = evaluate_objective(params, batch, labels, objective, noise_rng);
            if (!std::isfinite(ev.total)) {
                throw Error(Errc::DivergenceDetected, "non-finite objective at epoch " + std::to_string(epoch + 1) +
                                                          ", batch " + std::to_string(batches + 1));
            }
            if (hooks.on_batch) {
                hooks.on_batch(epoch, batches, ev.trace);
            }
            if (!have_initial) {
                initial_loss = ev.total;
                have_initial = true;
            }
            optimizer->step(params, ev.grads);
            loss_sum += ev.total;
            penalty_sum += ev.penalty;
        }

        const double epoch_loss = loss_sum / static_cast<double>(batches);
        history.train_loss.push_back(epoch_loss);
        history.penalty.push_back(penalty_sum / static_cast<double>(batches));
        history.val_accuracy.push_back(val_data.size() > 0 ? noiseless_accuracy(params, val_data) : 0.0);

        epochs_above = epoch_loss > 10.0 * initial_loss ? epochs_above + 1 : 0;
        if (epochs_above >= 3) {
            throw Error(Errc::DivergenceDetected, "objective above 10x its initial value for 3 consecutive epochs");
        }
        history.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (hooks.on_epoch) {
            hooks.on_epoch(epoch, history);
        }
    }
    return result;
}

bool GradCheckReport::passed() const
{
    return !entries.empty() &&
           std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

GradCheckEntry gradient_check(const TrainConfig& cfg, int n_probes, double tolerance)
{
    cfg.validate();
    constexpr double kStep = 1e-5;
    constexpr double kFloor = 1e-6;
    constexpr Eigen::Index kBatch = 16;

    MlpParams params = MlpParams::glorot_uniform(cfg.layer_sizes, derive_seed(cfg.seed, {stream::gradcheck, 1}));
    Rng data_rng = Rng::derive(cfg.seed, {stream::gradcheck, 2});
    // Non-zero biases keep the check away from the symmetric initial point.
    for (auto& b : params.biases) {
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.5 * (2.0 * data_rng.uniform() - 1.0);
    }
    Eigen::MatrixXd input(kBatch, cfg.layer_sizes.front());
    for (Eigen::Index r = 0; r < input.rows(); ++r) {
        for (Eigen::Index c = 0; c < input.cols(); ++c) input(r, c) = data_rng.uniform();
    }
    std::vector<std::uint8_t> labels(kBatch);
    for (auto& y : labels) y = static_cast<std::uint8_t>(data_rng.below(static_cast<std::uint64_t>(cfg.layer_sizes.back())));

    const Objective objective = Objective::from(cfg);
    const std::uint64_t noise_seed = derive_seed(cfg.seed, {stream::gradcheck, 3});
    Rng replay(noise_seed);
    const ObjectiveEval analytic = evaluate_objective(params, input, labels, objective, replay);
    auto value = [&]() {
        Rng r(noise_seed);
        return objective_value(params, input, labels, objective, r);
    };

    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (int l = 1; l <= params.num_layers(); ++l) {
        total += static_cast<std::size_t>(params.W(l).size() + params.b(l).size());
        sizes.push_back(total);
    }

    GradCheckEntry entry;
    entry.mode = cfg.mode;
    Rng probe_rng = Rng::derive(cfg.seed, {stream::gradcheck, 4});
    int attempts = 0;
    while (entry.probes < n_probes && attempts < 100 * n_probes) {
        ++attempts;
        const std::size_t flat = probe_rng.below(total);
        const int l = static_cast<int>(std::upper_bound(sizes.begin(), sizes.end(), flat) - sizes.begin()) + 1;
        std::size_t local = flat - (l == 1 ? 0 : sizes[static_cast<std::size_t>(l - 2)]);
        Eigen::MatrixXd& w = params.W(l);
        double* coord = nullptr;
        double grad = 0.0;
        if (local < static_cast<std::size_t>(w.size())) {
            const auto i = static_cast<Eigen::Index>(local) % w.rows();
            const auto j = static_cast<Eigen::Index>(local) / w.rows();
            // The row-sum penalty has a kink at zero row sum; probe only generic points.
            if (cfg.reg.mode == RegMode::correlated && l >= 2 && std::abs(w.row(i).sum()) < 10.0 * kStep) {
                continue;
            }
            coord = &w(i, j);
            grad = analytic.grads.W(l)(i, j);
        } else {
            local -= static_cast<std::size_t>(w.size());
            coord = &params.b(l)[static_cast<Eigen::Index>(local)];
            grad = analytic.grads.biases[static_cast<std::size_t>(l - 1)][static_cast<Eigen::Index>(local)];
        }
        const double saved = *coord;
        *coord = saved + kStep;
        const double up = value();
        *coord = saved - kStep;
        const double down = value();
        *coord = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        const double rel = std::abs(grad - numeric) / std::max({std::abs(grad), std::abs(numeric), kFloor});
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        ++entry.probes;
    }
    entry.passed = entry.probes == n_probes && entry.max_rel_error < tolerance;
    return entry;
}

GradCheckReport gradient_check_all(const std::vector<int>& layer_sizes, int n_probes, double tolerance,
                                   std::uint64_t seed)
{
    if (layer_sizes.size() != 4 || layer_sizes[0] > 10 || layer_sizes[1] > 8 || layer_sizes[2] > 8 ||
        layer_sizes[3] > 4) {
        throw Error(Errc::ConfigMismatch, "gradient checks run on nets no larger than 10-8-8-4");
    }
    const int L = static_cast<int>(layer_sizes.size()) - 1;
    GradCheckReport report;
    for (TrainMode mode :
         {TrainMode::standard, TrainMode::noise_aware, TrainMode::reg_correlated, TrainMode::reg_uncorrelated}) {
        TrainConfig cfg;
        cfg.mode = mode;
        cfg.seed = seed;
        cfg.layer_sizes = layer_sizes;
        if (mode == TrainMode::noise_aware) {
            cfg.noise = {NoiseKind::uncorrelated, 0.1, {}};
        } else if (mode == TrainMode::reg_correlated) {
            cfg.reg.mode = RegMode::correlated;
            for (int l = 2; l <= L; ++l) cfg.reg.lambda_rowsum[l] = 0.05 * l;
        } else if (mode == TrainMode::reg_uncorrelated) {
            cfg.reg.mode = RegMode::uncorrelated;
            cfg.reg.lambda_deriv = 0.1;
            for (int l = 2; l <= L; ++l) cfg.reg.lambda_l2[l] = 0.01 * l;
        }
        report.entries.push_back(gradient_check(cfg, n_probes, tolerance));
    }
    return report;
}

void require_passed(const GradCheckReport& report)
{
    for (const auto& e : report.entries) {
        if (!e.passed) {
            throw Error(Errc::GradientMismatch, "gradient check failed for mode " + std::string(to_string(e.mode)) +
                                                    ": max relative error " + std::to_string(e.max_rel_error));
        }
    }
}

}  // namespace quietnet
