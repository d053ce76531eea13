#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "quietnet/idx.hpp"
#include "quietnet/network.hpp"
#include "quietnet/noise.hpp"
#include "quietnet/optim.hpp"
#include "quietnet/regularizers.hpp"

namespace quietnet {

enum class TrainMode { standard, noise_aware, reg_correlated, reg_uncorrelated };

std::string_view to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
    TrainMode mode = TrainMode::standard;
    int epochs = 30;
    int batch_size = 128;
    OptimizerSettings optimizer;
    std::uint64_t seed = 1;
    /// Injected during training in noise-aware mode, and in the reg modes when
    /// `noise_in_reg_training` is set.
    NoiseSpec noise;
    bool noise_in_reg_training = false;
    RegConfig reg;
    LossKind loss = LossKind::softmax_ce;
    std::vector<int> layer_sizes{784, 300, 300, 10};

    /// Throws ConfigMismatch when mode, regularizer and noise disagree.
    void validate() const;
    /// The noise actually injected while training.
    NoiseSpec training_noise() const;
};

struct TrainHistory {
    std::vector<double> train_loss;    // mean objective (data loss + penalty) per epoch
    std::vector<double> penalty;       // mean penalty per epoch
    std::vector<double> val_accuracy;  // noiseless, percent
    double wall_seconds = 0.0;
};

struct TrainResult {
    MlpParams params;
    TrainHistory history;
};

/// Optional observers. on_epoch gets the 0-based epoch and the history so far;
/// on_batch gets (epoch, batch index, trace of that batch's forward pass).
struct TrainHooks {
    std::function<void(int, const TrainHistory&)> on_epoch;
    std::function<void(int, std::size_t, const ForwardTrace&)> on_batch;
};

/// Mini-batch training. Initialization, shuffling and noise all derive from
/// cfg.seed, so equal inputs give bit-identical parameters. Throws
/// DivergenceDetected when the objective becomes non-finite or stays above ten
/// times its initial value for three consecutive epochs.
TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const TrainHooks& hooks = {});

/// Same, starting from given parameters instead of a seeded initialization.
TrainResult train_from(const TrainConfig& cfg, MlpParams init, const Dataset& train_data, const Dataset& val_data,
                       const TrainHooks& hooks = {});

/// First `size() - holdout` rows for training, the last `holdout` for validation.
std::pair<Dataset, Dataset> split_validation(const Dataset& data, std::size_t holdout = 10000);

struct Objective {
    LossKind loss = LossKind::softmax_ce;
    NoiseSpec noise;
    RegConfig reg;

    static Objective from(const TrainConfig& cfg);
};

struct ObjectiveEval {
    double data_loss = 0.0;
    double penalty = 0.0;
    double total = 0.0;
    Gradients grads;
    ForwardTrace trace;
};

/// Objective value and its exact gradient for one batch. Noise draws come from
/// `noise_rng`; passing an identically seeded generator replays them.
ObjectiveEval evaluate_objective(const MlpParams& params, const Eigen::MatrixXd& input,
                                 std::span<const std::uint8_t> labels, const Objective& objective, Rng& noise_rng);

/// Value only (no backward pass).
double objective_value(const MlpParams& params, const Eigen::MatrixXd& input, std::span<const std::uint8_t> labels,
                       const Objective& objective, Rng& noise_rng);

struct GradCheckEntry {
    TrainMode mode = TrainMode::standard;
    int probes = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool passed() const;
};

/// Central finite differences (step 1e-5) against the assembled analytic
/// gradient of cfg's objective at `n_probes` random parameter coordinates of a
/// seeded network with cfg.layer_sizes, on a synthetic batch. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckEntry gradient_check(const TrainConfig& cfg, int n_probes, double tolerance);

/// The four training objectives on a small net with non-trivial coefficients.
/// Layer sizes must not exceed 10-8-8-4.
GradCheckReport gradient_check_all(const std::vector<int>& layer_sizes, int n_probes, double tolerance,
                                   std::uint64_t seed = 7);

/// Throws GradientMismatch naming the first failing mode.
void require_passed(const GradCheckReport& report);

}  // namespace quietnet
