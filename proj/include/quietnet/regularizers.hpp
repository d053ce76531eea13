#pragma once

#include <map>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "quietnet/network.hpp"

namespace quietnet {

enum class RegMode { none, correlated, uncorrelated };

std::string_view to_string(RegMode mode) noexcept;
RegMode parse_reg_mode(std::string_view text);

/// Penalty coefficients. Per-layer maps are keyed by weight-matrix index l,
/// valid for 2 <= l <= L (the input matrix W(1) is never penalized).
struct RegConfig {
    RegMode mode = RegMode::none;
    std::map<int, double> lambda_rowsum;  // correlated mode
    double lambda_deriv = 0.0;            // uncorrelated mode
    std::map<int, double> lambda_l2;      // uncorrelated mode
    std::vector<int> deriv_layers;        // hidden layers 1..L-1; empty means all

    /// Throws ConfigMismatch for negative coefficients, layers out of range, or
    /// coefficients that the selected mode does not use.
    void validate(int num_layers) const;
    bool penalizes_derivative(int hidden_layer) const;
};

/// sum_i | sum_j w_ij |
double row_sum_penalty(const Eigen::MatrixXd& w);
/// Subgradient: entry (i, j) = sign(sum_j w_ij), with sign(0) = 0.
Eigen::MatrixXd row_sum_penalty_grad(const Eigen::MatrixXd& w);

/// Mean over the batch (rows) of sum_i sigmoid'(z_i).
double derivative_penalty(const Eigen::MatrixXd& z);
/// sigmoid''(z) / batch, the gradient of derivative_penalty.
Eigen::MatrixXd derivative_penalty_grad(const Eigen::MatrixXd& z);

/// sum w^2
double l2_penalty(const Eigen::MatrixXd& w);
/// 2 w
Eigen::MatrixXd l2_penalty_grad(const Eigen::MatrixXd& w);

struct RegTerms {
    double total = 0.0;    // base loss + penalty
    double penalty = 0.0;
    /// [l-1] -> direct d penalty / d W(l); empty matrix when layer l is unpenalized.
    std::vector<Eigen::MatrixXd> weight_grads;
    /// [l-1] -> d penalty / d z(l) for hidden layer l; empty when unpenalized.
    /// Feed to backward() so it reaches every upstream parameter.
    std::vector<Eigen::MatrixXd> preact_grads;
};

/// correlated:   base + sum_{l>=2} lambda_rowsum[l] * row_sum_penalty(W(l))
/// uncorrelated: base + lambda_deriv * sum_{l in deriv_layers} derivative_penalty(z(l))
///                    + sum_{l>=2} lambda_l2[l] * l2_penalty(W(l))
RegTerms total_loss(double base_loss, const MlpParams& params, const ForwardTrace& trace, const RegConfig& cfg);

/// Adds the direct weight terms of `terms` into `grads`.
void add_weight_terms(Gradients& grads, const RegTerms& terms);

}  // namespace quietnet
