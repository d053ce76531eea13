#include "quietnet/noise.hpp"

#include <algorithm>
#include <cmath>

#include "quietnet/error.hpp"

namespace quietnet {

std::string_view to_string(NoiseKind kind) noexcept
{
    switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::correlated: return "correlated";
    case NoiseKind::uncorrelated: return "uncorrelated";
    }
    return "none";
}

NoiseKind parse_noise_kind(std::string_view text)
{
    if (text == "none") return NoiseKind::none;
    if (text == "correlated") return NoiseKind::correlated;
    if (text == "uncorrelated") return NoiseKind::uncorrelated;
    throw Error(Errc::ConfigParse, "unknown noise kind '" + std::string(text) + "'");
}

bool NoiseSpec::applies_to(int hidden_layer) const
{
    return sites.empty() || std::find(sites.begin(), sites.end(), hidden_layer) != sites.end();
}

void NoiseSpec::validate(int num_layers) const
{
    if (!(variance >= 0.0) || !std::isfinite(variance)) {
        throw Error(Errc::NegativeVariance, "noise variance must be finite and >= 0, got " + std::to_string(variance));
    }
    for (int s : sites) {
        if (s < 1 || s > num_layers - 1) {
            throw Error(Errc::ConfigMismatch, "noise site " + std::to_string(s) + " is not a hidden layer");
        }
    }
}

Eigen::MatrixXd sample_layer_noise(const NoiseSpec& spec, Eigen::Index width, Eigen::Index batch, Rng& rng)
{
    if (!(spec.variance >= 0.0) || !std::isfinite(spec.variance)) {
        throw Error(Errc::NegativeVariance, "noise variance must be finite and >= 0");
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(batch, width);
    if (!spec.active()) {
        return out;
    }
    const double sigma = std::sqrt(spec.variance);
    if (spec.kind == NoiseKind::correlated) {
        for (Eigen::Index r = 0; r < batch; ++r) {
            out.row(r).setConstant(sigma * rng.normal());
        }
    } else {
        for (Eigen::Index r = 0; r < batch; ++r) {
            for (Eigen::Index c = 0; c < width; ++c) {
                out(r, c) = sigma * rng.normal();
            }
        }
    }
    return out;
}

}  // namespace quietnet
