#include "quietnet/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quietnet/error.hpp"

namespace quietnet {

std::string_view to_string(RegMode mode) noexcept
{
    switch (mode) {
    case RegMode::none: return "none";
    case RegMode::correlated: return "correlated";
    case RegMode::uncorrelated: return "uncorrelated";
    }
    return "none";
}

RegMode parse_reg_mode(std::string_view text)
{
    if (text == "none") return RegMode::none;
    if (text == "correlated") return RegMode::correlated;
    if (text == "uncorrelated") return RegMode::uncorrelated;
    throw Error(Errc::ConfigParse, "unknown regularization mode '" + std::string(text) + "'");
}

namespace {

void check_layer_map(const std::map<int, double>& m, int num_layers, const char* what)
{
    for (const auto& [l, lambda] : m) {
        if (l < 2 || l > num_layers) {
            throw Error(Errc::ConfigMismatch, std::string(what) + " given for layer " + std::to_string(l) +
                                                  "; valid layers are 2.." + std::to_string(num_layers));
        }
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw Error(Errc::ConfigMismatch, std::string(what) + " must be finite and >= 0");
        }
    }
}

bool any_positive(const std::map<int, double>& m)
{
    return std::any_of(m.begin(), m.end(), [](const auto& kv) { return kv.second > 0.0; });
}

double lambda_at(const std::map<int, double>& m, int l)
{
    auto it = m.find(l);
    return it == m.end() ? 0.0 : it->second;
}

}  // namespace

void RegConfig::validate(int num_layers) const
{
    check_layer_map(lambda_rowsum, num_layers, "lambda_rowsum");
    check_layer_map(lambda_l2, num_layers, "lambda_l2");
    if (!(lambda_deriv >= 0.0) || !std::isfinite(lambda_deriv)) {
        throw Error(Errc::ConfigMismatch, "lambda_deriv must be finite and >= 0");
    }
    for (int h : deriv_layers) {
        if (h < 1 || h > num_layers - 1) {
            throw Error(Errc::ConfigMismatch, "deriv layer " + std::to_string(h) + " is not a hidden layer");
        }
    }
    if (mode != RegMode::correlated && any_positive(lambda_rowsum)) {
        throw Error(Errc::ConfigMismatch, "lambda_rowsum is only used in correlated mode");
    }
    if (mode != RegMode::uncorrelated && (lambda_deriv > 0.0 || any_positive(lambda_l2))) {
        throw Error(Errc::ConfigMismatch, "lambda_deriv and lambda_l2 are only used in uncorrelated mode");
    }
}

bool RegConfig::penalizes_derivative(int hidden_layer) const
{
    return deriv_layers.empty() ||
           std::find(deriv_layers.begin(), deriv_layers.end(), hidden_layer) != deriv_layers.end();
}

double row_sum_penalty(const Eigen::MatrixXd& w)
{
    return w.rowwise().sum().cwiseAbs().sum();
}

Eigen::MatrixXd row_sum_penalty_grad(const Eigen::MatrixXd& w)
{
    Eigen::MatrixXd g(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double s = w.row(i).sum();
        g.row(i).setConstant(s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0));
    }
    return g;
}

double derivative_penalty(const Eigen::MatrixXd& z)
{
    if (z.rows() == 0) {
        return 0.0;
    }
    return sigmoid_prime(z).sum() / static_cast<double>(z.rows());
}

Eigen::MatrixXd derivative_penalty_grad(const Eigen::MatrixXd& z)
{
    if (z.rows() == 0) {
        return Eigen::MatrixXd(0, z.cols());
    }
    return sigmoid_second(z) / static_cast<double>(z.rows());
}

double l2_penalty(const Eigen::MatrixXd& w)
{
    return w.squaredNorm();
}

Eigen::MatrixXd l2_penalty_grad(const Eigen::MatrixXd& w)
{
    return 2.0 * w;
}

RegTerms total_loss(double base_loss, const MlpParams& params, const ForwardTrace& trace, const RegConfig& cfg)
{
    const int L = params.num_layers();
    cfg.validate(L);
    RegTerms out;
    out.weight_grads.resize(L);
    out.preact_grads.resize(L - 1);

    if (cfg.mode == RegMode::correlated) {
        for (int l = 2; l <= L; ++l) {
            const double lambda = lambda_at(cfg.lambda_rowsum, l);
            if (lambda == 0.0) continue;
            out.penalty += lambda * row_sum_penalty(params.W(l));
            out.weight_grads[l - 1] = lambda * row_sum_penalty_grad(params.W(l));
        }
    } else if (cfg.mode == RegMode::uncorrelated) {
        if (cfg.lambda_deriv != 0.0) {
            for (int h = 1; h < L; ++h) {
                if (!cfg.penalizes_derivative(h)) continue;
                out.penalty += cfg.lambda_deriv * derivative_penalty(trace.z(h));
                out.preact_grads[h - 1] = cfg.lambda_deriv * derivative_penalty_grad(trace.z(h));
            }
        }
        for (int l = 2; l <= L; ++l) {
            const double lambda = lambda_at(cfg.lambda_l2, l);
            if (lambda == 0.0) continue;
            out.penalty += lambda * l2_penalty(params.W(l));
            out.weight_grads[l - 1] = lambda * l2_penalty_grad(params.W(l));
        }
    }
    out.total = base_loss + out.penalty;
    return out;
}

void add_weight_terms(Gradients& grads, const RegTerms& terms)
{
    for (std::size_t l = 0; l < terms.weight_grads.size() && l < grads.weights.size(); ++l) {
        if (terms.weight_grads[l].size() != 0) {
            grads.weights[l] += terms.weight_grads[l];
        }
    }
}

}  // namespace quietnet
