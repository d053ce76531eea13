#include "quietnet/network.hpp"

#include <cmath>
#include <string>

#include "quietnet/error.hpp"

namespace quietnet {

void MlpParams::validate() const
{
    if (layer_sizes.size() < 2) {
        throw Error(Errc::ShapeMismatch, "a network needs at least an input and an output layer");
    }
    for (int n : layer_sizes) {
        if (n <= 0) {
            throw Error(Errc::ShapeMismatch, "layer sizes must be positive");
        }
    }
    const std::size_t L = layer_sizes.size() - 1;
    if (weights.size() != L || biases.size() != L) {
        throw Error(Errc::ShapeMismatch, "expected " + std::to_string(L) + " weight matrices and bias vectors");
    }
    for (std::size_t l = 0; l < L; ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1]) {
            throw Error(Errc::ShapeMismatch, "layer " + std::to_string(l + 1) + " parameters do not match layer sizes");
        }
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            throw Error(Errc::NonFiniteInput, "layer " + std::to_string(l + 1) + " has non-finite parameters");
        }
    }
}

MlpParams MlpParams::zeros(std::vector<int> layer_sizes)
{
    MlpParams p;
    p.layer_sizes = std::move(layer_sizes);
    for (std::size_t l = 1; l < p.layer_sizes.size(); ++l) {
        p.weights.push_back(Eigen::MatrixXd::Zero(p.layer_sizes[l], p.layer_sizes[l - 1]));
        p.biases.push_back(Eigen::VectorXd::Zero(p.layer_sizes[l]));
    }
    p.validate();
    return p;
}

MlpParams MlpParams::glorot_uniform(std::vector<int> layer_sizes, std::uint64_t seed)
{
    MlpParams p = zeros(std::move(layer_sizes));
    Rng rng = Rng::derive(seed, {stream::init});
    for (auto& w : p.weights) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = limit * (2.0 * rng.uniform() - 1.0);
            }
        }
    }
    return p;
}

bool MlpParams::operator==(const MlpParams& other) const
{
    if (layer_sizes != other.layer_sizes || weights.size() != other.weights.size()) {
        return false;
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) {
            return false;
        }
    }
    return true;
}

Eigen::MatrixXd ForwardTrace::perturbed(int l) const
{
    if (l == 0) {
        return activations.front();
    }
    return a(l) + noise(l);
}

Gradients Gradients::zeros_like(const MlpParams& params)
{
    Gradients g;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
    }
    return g;
}

double sigmoid(double z) noexcept
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double sigmoid_prime(double z) noexcept
{
    // exp(-|z|) / (1 + exp(-|z|))^2 is symmetric and never overflows.
    const double e = std::exp(-std::abs(z));
    const double d = 1.0 + e;
    return e / (d * d);
}

double sigmoid_second(double z) noexcept
{
    return sigmoid_prime(z) * (1.0 - 2.0 * sigmoid(z));
}

double logit(double a) noexcept
{
    return std::log(a) - std::log1p(-a);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z)
{
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::MatrixXd sigmoid_prime(const Eigen::MatrixXd& z)
{
    return z.unaryExpr([](double v) { return sigmoid_prime(v); });
}

Eigen::MatrixXd sigmoid_second(const Eigen::MatrixXd& z)
{
    return z.unaryExpr([](double v) { return sigmoid_second(v); });
}

namespace {

void check_input(const MlpParams& params, const Eigen::MatrixXd& input)
{
    if (params.layer_sizes.empty() || input.cols() != params.layer_sizes.front()) {
        throw Error(Errc::ShapeMismatch, "input has " + std::to_string(input.cols()) + " columns, network expects " +
                                             std::to_string(params.layer_sizes.empty() ? 0 : params.layer_sizes.front()));
    }
    if (!input.allFinite()) {
        throw Error(Errc::NonFiniteInput, "input contains non-finite values");
    }
}

Eigen::MatrixXd affine(const Eigen::MatrixXd& in, const Eigen::MatrixXd& w, const Eigen::VectorXd& b)
{
    Eigen::MatrixXd z = in * w.transpose();
    z.rowwise() += b.transpose();
    return z;
}

}  // namespace

ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& input, const NoiseSpec& noise, Rng& rng)
{
    check_input(params, input);
    const int L = params.num_layers();
    noise.validate(L);

    ForwardTrace t;
    t.pre_activations.reserve(L);
    t.activations.reserve(L);
    t.noise_draws.reserve(L - 1);
    t.activations.push_back(input);

    for (int l = 1; l <= L; ++l) {
        const Eigen::MatrixXd& w = params.W(l);
        if (l == 1) {
            t.pre_activations.push_back(affine(input, w, params.b(l)));
        } else {
            t.pre_activations.push_back(affine(t.a(l - 1) + t.noise(l - 1), w, params.b(l)));
        }
        if (l == L) {
            break;
        }
        t.activations.push_back(sigmoid(t.z(l)));
        const Eigen::Index batch = input.rows();
        if (noise.applies_to(l)) {
            t.noise_draws.push_back(sample_layer_noise(noise, params.layer_sizes[l], batch, rng));
        } else {
            t.noise_draws.push_back(Eigen::MatrixXd::Zero(batch, params.layer_sizes[l]));
        }
    }
    return t;
}

Eigen::MatrixXd predict(const MlpParams& params, const Eigen::MatrixXd& input)
{
    check_input(params, input);
    const int L = params.num_layers();
    Eigen::MatrixXd a = input;
    for (int l = 1; l < L; ++l) {
        a = sigmoid(affine(a, params.W(l), params.b(l)));
    }
    return affine(a, params.W(L), params.b(L));
}

std::string_view to_string(LossKind kind) noexcept
{
    return kind == LossKind::softmax_ce ? "softmax-ce" : "sigmoid-mse";
}

LossKind parse_loss_kind(std::string_view text)
{
    if (text == "softmax-ce") return LossKind::softmax_ce;
    if (text == "sigmoid-mse") return LossKind::sigmoid_mse;
    throw Error(Errc::ConfigParse, "unknown loss kind '" + std::string(text) + "'");
}

LossResult loss_and_output_grad(const Eigen::MatrixXd& logits, std::span<const std::uint8_t> labels, LossKind kind)
{
    const Eigen::Index batch = logits.rows();
    const Eigen::Index classes = logits.cols();
    if (static_cast<std::size_t>(batch) != labels.size()) {
        throw Error(Errc::ShapeMismatch, "logits rows and label count differ");
    }
    for (auto y : labels) {
        if (y >= classes) {
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " not below " + std::to_string(classes));
        }
    }
    LossResult out;
    out.grad.resize(batch, classes);
    if (batch == 0) {
        return out;
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);

    if (kind == LossKind::softmax_ce) {
        double total = 0.0;
        for (Eigen::Index r = 0; r < batch; ++r) {
            const double m = logits.row(r).maxCoeff();
            const Eigen::RowVectorXd e = (logits.row(r).array() - m).exp().matrix();
            const double s = e.sum();
            total += std::log(s) + m - logits(r, labels[r]);
            out.grad.row(r) = e / s;
            out.grad(r, labels[r]) -= 1.0;
        }
        out.loss = total * inv_batch;
        out.grad *= inv_batch;
    } else {
        const double scale = 1.0 / static_cast<double>(batch * classes);
        double total = 0.0;
        for (Eigen::Index r = 0; r < batch; ++r) {
            for (Eigen::Index c = 0; c < classes; ++c) {
                const double z = logits(r, c);
                const double diff = sigmoid(z) - (c == labels[r] ? 1.0 : 0.0);
                total += diff * diff;
                out.grad(r, c) = 2.0 * diff * sigmoid_prime(z) * scale;
            }
        }
        out.loss = total * scale;
    }
    return out;
}

Gradients backward(const MlpParams& params, const ForwardTrace& trace, const Eigen::MatrixXd& output_grad,
                   std::span<const Eigen::MatrixXd> preact_grads)
{
    const int L = params.num_layers();
    if (static_cast<int>(trace.pre_activations.size()) != L || output_grad.rows() != trace.logits().rows() ||
        output_grad.cols() != trace.logits().cols()) {
        throw Error(Errc::ShapeMismatch, "trace or output gradient does not match the network");
    }
    if (!preact_grads.empty() && static_cast<int>(preact_grads.size()) != L - 1) {
        throw Error(Errc::ShapeMismatch, "need one pre-activation gradient slot per hidden layer");
    }

    Gradients g;
    g.weights.resize(L);
    g.biases.resize(L);
    Eigen::MatrixXd delta = output_grad;  // d loss / d z(l)
    for (int l = L; l >= 1; --l) {
        const Eigen::MatrixXd in = trace.perturbed(l - 1);
        g.weights[l - 1] = delta.transpose() * in;
        g.biases[l - 1] = delta.colwise().sum().transpose();
        if (l == 1) {
            break;
        }
        const Eigen::MatrixXd& a = trace.a(l - 1);
        Eigen::MatrixXd next = (delta * params.W(l)).cwiseProduct((a.array() * (1.0 - a.array())).matrix());
        if (!preact_grads.empty()) {
            const Eigen::MatrixXd& extra = preact_grads[l - 2];
            if (extra.size() != 0) {
                if (extra.rows() != next.rows() || extra.cols() != next.cols()) {
                    throw Error(Errc::ShapeMismatch, "pre-activation gradient for layer " + std::to_string(l - 1));
                }
                next += extra;
            }
        }
        delta = std::move(next);
    }
    return g;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& logits)
{
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index idx = 0;
        logits.row(r).maxCoeff(&idx);
        out[static_cast<std::size_t>(r)] = static_cast<int>(idx);
    }
    return out;
}

}  // namespace quietnet
