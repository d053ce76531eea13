#include "quietnet/pdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "quietnet/error.hpp"

namespace quietnet {

double Histogram::integral() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < bins(); ++i) {
        s += density[i] * width(i);
    }
    return s;
}

namespace {

void normalize(Histogram& h, std::size_t total)
{
    h.density.assign(h.counts.size(), 0.0);
    if (total == 0) {
        return;
    }
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        h.density[i] = static_cast<double>(h.counts[i]) / (static_cast<double>(total) * h.width(i));
    }
}

double normal_pdf(double x, double mu, double variance)
{
    const double d = x - mu;
    return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double normal_cdf(double x, double mu, double variance)
{
    return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * variance));
}

void check_variance(const GaussianInput& g)
{
    if (!(g.variance > 0.0) || !std::isfinite(g.variance) || !std::isfinite(g.mu)) {
        throw Error(Errc::DomainError, "Gaussian input needs finite mu and variance > 0");
    }
}

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

Histogram histogram_fixed(std::span<const double> values, double lo, double hi, std::size_t bins)
{
    if (bins == 0 || !(hi > lo)) {
        throw Error(Errc::DomainError, "histogram needs bins > 0 and hi > lo");
    }
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.counts.assign(bins, 0);
    const double scale = static_cast<double>(bins) / (hi - lo);
    for (double v : values) {
        const double pos = std::floor((v - lo) * scale);
        const auto k = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
        ++h.counts[k];
    }
    normalize(h, values.size());
    return h;
}

Histogram histogram_observed(std::span<const double> values, std::size_t bins)
{
    if (values.empty()) {
        return histogram_fixed(values, 0.0, 1.0, bins);
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mn == *mx) {
        return histogram_fixed(values, *mn - 0.5, *mn + 0.5, 1);
    }
    return histogram_fixed(values, *mn, *mx, bins);
}

double analytic_activation_pdf(const GaussianInput& g, double a)
{
    check_variance(g);
    if (!(a > 0.0 && a < 1.0)) {
        throw Error(Errc::DomainError, "activation density is defined on (0, 1) only");
    }
    return normal_pdf(logit(a), g.mu, g.variance) / (a * (1.0 - a));
}

double analytic_activation_mass(const GaussianInput& g, double lo, double hi)
{
    check_variance(g);
    auto cdf = [&](double a) {
        if (a <= 0.0) return 0.0;
        if (a >= 1.0) return 1.0;
        return normal_cdf(logit(a), g.mu, g.variance);
    };
    return cdf(hi) - cdf(lo);
}

Histogram empirical_activation_pdf(const GaussianInput& g, std::size_t n_samples, std::size_t bins, Rng& rng)
{
    check_variance(g);
    const double sigma = std::sqrt(g.variance);
    std::vector<double> values(n_samples);
    for (auto& v : values) {
        v = sigmoid(g.mu + sigma * rng.normal());
    }
    return histogram_fixed(values, 0.0, 1.0, bins);
}

double l1_distance_at_centers(const Histogram& h, const GaussianInput& g)
{
    double d = 0.0;
    for (std::size_t k = 0; k < h.bins(); ++k) {
        d += std::abs(h.density[k] - analytic_activation_pdf(g, h.center(k))) * h.width(k);
    }
    return d;
}

double l1_distance_bin_averaged(const Histogram& h, const GaussianInput& g)
{
    double d = 0.0;
    for (std::size_t k = 0; k < h.bins(); ++k) {
        const double w = h.width(k);
        const double lo = k == 0 ? 0.0 : h.edges[k];
        const double hi = k + 1 == h.bins() ? 1.0 : h.edges[k + 1];
        d += std::abs(h.density[k] - analytic_activation_mass(g, lo, hi) / w) * w;
    }
    return d;
}

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi, double tol, int panels)
{
    const double step = (hi - lo) / panels;
    const double panel_tol = tol / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + step * p;
        const double b = p + 1 == panels ? hi : lo + step * (p + 1);
        const double fa = f(a);
        const double fb = f(b);
        const double fm = f(0.5 * (a + b));
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(f, a, b, fa, fm, fb, whole, panel_tol, 50);
    }
    return total;
}

std::pair<double, double> activation_moments(const GaussianInput& g, double tol)
{
    check_variance(g);
    auto density = [&](double a) { return a > 0.0 && a < 1.0 ? analytic_activation_pdf(g, a) : 0.0; };
    const double mean = adaptive_simpson([&](double a) { return a * density(a); }, 0.0, 1.0, tol);
    const double second =
        adaptive_simpson([&](double a) { return (a - mean) * (a - mean) * density(a); }, 0.0, 1.0, tol);
    return {mean, std::sqrt(second)};
}

NetworkDistributions collect_network_distributions(const MlpParams& params, const Dataset& data,
                                                   std::size_t sample_cap, std::size_t bins)
{
    params.validate();
    if (data.features.cols() != params.layer_sizes.front()) {
        throw Error(Errc::ShapeMismatch, "dataset width does not match the network input");
    }
    const auto n = static_cast<Eigen::Index>(std::min(sample_cap, data.size()));
    const Eigen::MatrixXd input = data.features.topRows(n);
    Rng unused(0);
    const ForwardTrace trace = forward(params, input, NoiseSpec{}, unused);

    NetworkDistributions out;
    const int L = params.num_layers();
    for (int h = 1; h < L; ++h) {
        const Eigen::MatrixXd& z = trace.z(h);
        const Eigen::MatrixXd& a = trace.a(h);
        out.pre_activations.push_back(histogram_observed(std::span(z.data(), static_cast<std::size_t>(z.size())), bins));
        out.post_activations.push_back(
            histogram_fixed(std::span(a.data(), static_cast<std::size_t>(a.size())), 0.0, 1.0, bins));
    }
    const Eigen::MatrixXd& w = params.W(L);
    out.output_weights = histogram_observed(std::span(w.data(), static_cast<std::size_t>(w.size())), bins);
    return out;
}

std::vector<RowStat> row_stats(const Eigen::MatrixXd& w)
{
    if (w.size() == 0) {
        throw Error(Errc::ShapeMismatch, "row_stats needs a non-empty matrix");
    }
    std::vector<RowStat> out(static_cast<std::size_t>(w.rows()));
    const double n = static_cast<double>(w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double mean = w.row(i).sum() / n;
        const double var = (w.row(i).array() - mean).square().sum() / n;
        out[static_cast<std::size_t>(i)] = {mean, std::sqrt(var)};
    }
    std::stable_sort(out.begin(), out.end(), [](const RowStat& x, const RowStat& y) { return x.mean < y.mean; });
    return out;
}

void write_histogram_csv(std::ostream& os, const Histogram& h)
{
    os << "bin_left,bin_right,density\n";
    char buf[128];
    for (std::size_t k = 0; k < h.bins(); ++k) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", h.edges[k], h.edges[k + 1], h.density[k]);
        os << buf;
    }
}

}  // namespace quietnet
