#include "quietnet/optim.hpp"

#include <cmath>
#include <string>

#include "quietnet/error.hpp"

namespace quietnet {

std::string_view to_string(OptimizerKind kind) noexcept
{
    switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::sgd_momentum: return "sgd-momentum";
    case OptimizerKind::adam: return "adam";
    }
    return "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view text)
{
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "sgd-momentum") return OptimizerKind::sgd_momentum;
    if (text == "adam") return OptimizerKind::adam;
    throw Error(Errc::ConfigParse, "unknown optimizer '" + std::string(text) + "'");
}

namespace {

class Sgd final : public Optimizer {
public:
    explicit Sgd(double lr) : lr_(lr) {}

    void step(MlpParams& params, const Gradients& grads) override
    {
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            params.weights[l] -= lr_ * grads.weights[l];
            params.biases[l] -= lr_ * grads.biases[l];
        }
    }

private:
    double lr_;
};

class SgdMomentum final : public Optimizer {
public:
    SgdMomentum(double lr, double momentum, const MlpParams& params)
        : lr_(lr), momentum_(momentum), velocity_(Gradients::zeros_like(params))
    {
    }

    void step(MlpParams& params, const Gradients& grads) override
    {
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            velocity_.weights[l] = momentum_ * velocity_.weights[l] + grads.weights[l];
            velocity_.biases[l] = momentum_ * velocity_.biases[l] + grads.biases[l];
            params.weights[l] -= lr_ * velocity_.weights[l];
            params.biases[l] -= lr_ * velocity_.biases[l];
        }
    }

private:
    double lr_;
    double momentum_;
    Gradients velocity_;
};

class Adam final : public Optimizer {
public:
    Adam(const OptimizerSettings& s, const MlpParams& params)
        : s_(s), m_(Gradients::zeros_like(params)), v_(Gradients::zeros_like(params))
    {
    }

    void step(MlpParams& params, const Gradients& grads) override
    {
        ++t_;
        const double c1 = 1.0 - std::pow(s_.beta1, t_);
        const double c2 = 1.0 - std::pow(s_.beta2, t_);
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = s_.beta1 * m + (1.0 - s_.beta1) * g;
            v = s_.beta2 * v + (1.0 - s_.beta2) * g.cwiseProduct(g);
            param.array() -= s_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s_.epsilon);
        };
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            update(params.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
            update(params.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
        }
    }

private:
    OptimizerSettings s_;
    Gradients m_;
    Gradients v_;
    int t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerSettings& settings, const MlpParams& params)
{
    if (!(settings.learning_rate > 0.0)) {
        throw Error(Errc::ConfigMismatch, "learning rate must be positive");
    }
    switch (settings.kind) {
    case OptimizerKind::sgd: return std::make_unique<Sgd>(settings.learning_rate);
    case OptimizerKind::sgd_momentum:
        return std::make_unique<SgdMomentum>(settings.learning_rate, settings.momentum, params);
    case OptimizerKind::adam: return std::make_unique<Adam>(settings, params);
    }
    throw Error(Errc::ConfigMismatch, "unknown optimizer");
}

}  // namespace quietnet
