#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "quietnet/idx.hpp"
#include "quietnet/network.hpp"
#include "quietnet/rng.hpp"

namespace quietnet {

/// Pre-activation modelled as N(mu, variance).
struct GaussianInput {
    double mu = 0.0;
    double variance = 1.0;
};

struct Histogram {
    std::vector<double> edges;          // strictly increasing, bins + 1 entries
    std::vector<std::uint64_t> counts;
    std::vector<double> density;        // counts / (total * width)

    std::size_t bins() const noexcept { return counts.size(); }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    /// sum density * width; 1 for any non-empty histogram.
    double integral() const;
};

/// Density-normalized histogram with `bins` uniform bins on [lo, hi]. Values
/// outside are clamped into the end bins.
Histogram histogram_fixed(std::span<const double> values, double lo, double hi, std::size_t bins);

/// Uniform bins over the observed [min, max]. A constant sample set yields a
/// single unit-width bin centred on the value.
Histogram histogram_observed(std::span<const double> values, std::size_t bins);

/// Density of a = sigmoid(z), z ~ g, by change of variables:
///   p_a(a) = N(logit(a); mu, variance) / (a (1 - a)).
/// Throws DomainError for a outside (0, 1) or a non-positive variance.
double analytic_activation_pdf(const GaussianInput& g, double a);

/// Probability that sigmoid(z) falls in [lo, hi], z ~ g. Exact, via the
/// Gaussian CDF at the logit of the endpoints.
double analytic_activation_mass(const GaussianInput& g, double lo, double hi);

/// Histogram over (0, 1) of sigmoid(z) for n_samples draws z ~ g.
Histogram empirical_activation_pdf(const GaussianInput& g, std::size_t n_samples, std::size_t bins, Rng& rng);

/// sum_k |h.density[k] - p(center_k)| * width_k
double l1_distance_at_centers(const Histogram& h, const GaussianInput& g);
/// sum_k |h.density[k] - mass_k / width_k| * width_k, with mass_k the exact
/// analytic probability of bin k.
double l1_distance_bin_averaged(const Histogram& h, const GaussianInput& g);

/// Adaptive Simpson quadrature on [lo, hi] to absolute tolerance `tol`. The
/// interval is first split into `panels` equal pieces so narrow peaks are not
/// missed.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi, double tol, int panels = 64);

/// Mean and standard deviation of sigmoid(z), z ~ g, by quadrature of the
/// analytic density.
std::pair<double, double> activation_moments(const GaussianInput& g, double tol = 1e-10);

struct NetworkDistributions {
    std::vector<Histogram> pre_activations;   // [l-1] -> hidden layer l
    std::vector<Histogram> post_activations;  // [l-1] -> hidden layer l
    Histogram output_weights;                 // entries of W(L)
};

/// Noiseless pass over the first `sample_cap` rows of `data`.
NetworkDistributions collect_network_distributions(const MlpParams& params, const Dataset& data,
                                                   std::size_t sample_cap, std::size_t bins = 200);

struct RowStat {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation of the row
};

/// Per-row mean and standard deviation, ordered by ascending mean.
std::vector<RowStat> row_stats(const Eigen::MatrixXd& w);

/// CSV with header `bin_left,bin_right,density`, six decimals.
void write_histogram_csv(std::ostream& os, const Histogram& h);

}  // namespace quietnet
