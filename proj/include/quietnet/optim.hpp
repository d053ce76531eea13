#pragma once

#include <memory>
#include <string_view>

#include "quietnet/network.hpp"

namespace quietnet {

enum class OptimizerKind { sgd, sgd_momentum, adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view text);

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;  // sgd-momentum
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(MlpParams& params, const Gradients& grads) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerSettings& settings, const MlpParams& params);

}  // namespace quietnet
