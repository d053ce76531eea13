#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "quietnet/rng.hpp"

namespace quietnet {

enum class NoiseKind { none, correlated, uncorrelated };

std::string_view to_string(NoiseKind kind) noexcept;
NoiseKind parse_noise_kind(std::string_view text);

/// Additive zero-mean Gaussian noise on hidden activations.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double variance = 0.0;
    /// Hidden layer indices 1..L-1 that receive noise; empty means all of them.
    std::vector<int> sites;

    bool active() const noexcept { return kind != NoiseKind::none && variance > 0.0; }
    bool applies_to(int hidden_layer) const;
    /// Throws NegativeVariance or ConfigMismatch (site outside 1..num_layers-1).
    void validate(int num_layers) const;
};

/// Draws a batch x width noise matrix.
///
/// correlated: one scalar per batch row, replicated across the row.
/// uncorrelated: independent draws per entry, row by row.
/// A zero variance or kind `none` yields an exact zero matrix and consumes no
/// random numbers.
Eigen::MatrixXd sample_layer_noise(const NoiseSpec& spec, Eigen::Index width, Eigen::Index batch, Rng& rng);

}  // namespace quietnet
