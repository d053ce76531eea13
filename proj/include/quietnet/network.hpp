#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "quietnet/noise.hpp"
#include "quietnet/rng.hpp"

namespace quietnet {

/// Layers are numbered l = 1..L. Weight matrix W(l) maps layer l-1 to layer l
/// and has shape n_l x n_{l-1}; W(1) is the input matrix. Vectors below are
/// zero-based, so weights[l - 1] holds W(l).
struct MlpParams {
    std::vector<int> layer_sizes;  // n_0, n_1, ..., n_L
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int num_layers() const noexcept { return static_cast<int>(weights.size()); }
    Eigen::MatrixXd& W(int l) { return weights.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::MatrixXd& W(int l) const { return weights.at(static_cast<std::size_t>(l - 1)); }
    Eigen::VectorXd& b(int l) { return biases.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::VectorXd& b(int l) const { return biases.at(static_cast<std::size_t>(l - 1)); }

    /// Throws ShapeMismatch or NonFiniteInput.
    void validate() const;

    static MlpParams zeros(std::vector<int> layer_sizes);
    /// Weights uniform in +-sqrt(6 / (n_in + n_out)), biases zero.
    static MlpParams glorot_uniform(std::vector<int> layer_sizes, std::uint64_t seed);

    bool operator==(const MlpParams& other) const;
};

/// Everything the forward pass computed for one batch (rows are samples).
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> pre_activations;  // [l-1] -> z(l), l = 1..L
    std::vector<Eigen::MatrixXd> activations;      // [0] -> input, [l] -> a(l) for hidden l
    std::vector<Eigen::MatrixXd> noise_draws;      // [l-1] -> noise added to a(l), hidden l

    const Eigen::MatrixXd& z(int l) const { return pre_activations.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::MatrixXd& a(int l) const { return activations.at(static_cast<std::size_t>(l)); }
    const Eigen::MatrixXd& noise(int l) const { return noise_draws.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::MatrixXd& logits() const { return pre_activations.back(); }

    /// The signal entering layer l + 1: a(l) plus its noise (input for l = 0).
    Eigen::MatrixXd perturbed(int l) const;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const MlpParams& params);
    Eigen::MatrixXd& W(int l) { return weights.at(static_cast<std::size_t>(l - 1)); }
    const Eigen::MatrixXd& W(int l) const { return weights.at(static_cast<std::size_t>(l - 1)); }
};

double sigmoid(double z) noexcept;
double sigmoid_prime(double z) noexcept;
double sigmoid_second(double z) noexcept;
/// ln(a / (1 - a)), the inverse of the sigmoid on (0, 1).
double logit(double a) noexcept;

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z);
Eigen::MatrixXd sigmoid_prime(const Eigen::MatrixXd& z);
Eigen::MatrixXd sigmoid_second(const Eigen::MatrixXd& z);

/// Noisy forward pass:
///   z(l) = W(l) (a(l-1) + n(l-1)) + b(l),  a(l) = sigmoid(z(l)) for hidden l,
/// with n(0) = 0 and the readout z(L) left linear. Noise for hidden layer l is
/// drawn from `rng` in increasing l, after a(l) is computed.
ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& input, const NoiseSpec& noise, Rng& rng);

/// Noiseless forward pass returning only the readout.
Eigen::MatrixXd predict(const MlpParams& params, const Eigen::MatrixXd& input);

enum class LossKind { softmax_ce, sigmoid_mse };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view text);

struct LossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // d loss / d logits, batch x n_L
};

/// softmax_ce: mean cross-entropy over the batch.
/// sigmoid_mse: mean over all batch x class entries of (sigmoid(z) - onehot)^2.
LossResult loss_and_output_grad(const Eigen::MatrixXd& logits, std::span<const std::uint8_t> labels, LossKind kind);

/// Reverse-mode pass through a recorded trace. Noise draws are constants.
/// `preact_grads`, when non-empty, holds extra d loss / d z(l) terms for the
/// hidden layers ([l-1] -> layer l; empty matrices are skipped) which are
/// added where the backward signal reaches z(l).
Gradients backward(const MlpParams& params, const ForwardTrace& trace, const Eigen::MatrixXd& output_grad,
                   std::span<const Eigen::MatrixXd> preact_grads = {});

/// Index of the largest readout per row.
std::vector<int> argmax_rows(const Eigen::MatrixXd& logits);

}  // namespace quietnet
