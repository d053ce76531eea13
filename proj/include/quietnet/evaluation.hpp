#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "quietnet/idx.hpp"
#include "quietnet/network.hpp"
#include "quietnet/noise.hpp"

namespace quietnet {

/// Percentage of rows whose readout argmax equals the label; no noise.
double noiseless_accuracy(const MlpParams& params, const Dataset& data);

struct AccuracyStats {
    double mean = 0.0;  // percent
    double std = 0.0;   // sample standard deviation over repeats, percent
};

/// `repeats` full passes over `data`, each with fresh noise. The noise for
/// repeat r and row chunk c comes from derive_seed(seed, {eval, r, c}), so the
/// result does not depend on how the passes are scheduled.
AccuracyStats evaluate_accuracy(const MlpParams& params, const Dataset& data, const NoiseSpec& noise, int repeats,
                                std::uint64_t seed);

struct SweepPoint {
    double variance = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0;
};

struct SweepResult {
    std::string model_tag;
    NoiseKind kind = NoiseKind::uncorrelated;
    std::vector<SweepPoint> points;
    int repeats = 0;
    std::uint64_t seed = 0;
};

/// `count` points log-spaced from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, int count);
/// 30 log-spaced variances from 1e-3 to 1.
std::vector<double> default_sweep_grid();

/// Accuracy at each variance. Point i uses seed derive_seed(seed, {sweep, kind, i});
/// `threads` > 1 evaluates points concurrently with identical results.
SweepResult noise_sweep(const MlpParams& params, const Dataset& data, NoiseKind kind,
                        const std::vector<double>& variances, int repeats, std::uint64_t seed,
                        std::string model_tag = "model", unsigned threads = 1);

struct DropRow {
    double variance = 0.0;
    double mean_acc = 0.0;
    double drop = 0.0;  // noiseless - mean_acc, in accuracy points
};

std::vector<DropRow> drop_report(const SweepResult& sweep, double noiseless);

/// Header `variance,mean_acc,std_acc`, six decimals per value.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);
SweepResult read_sweep_csv(std::istream& is);
/// Header `variance,mean_acc,drop`, six decimals per value.
void write_drop_csv(std::ostream& os, const std::vector<DropRow>& rows);
/// `<model>_<kind>.csv`
std::string sweep_file_name(const std::string& model_tag, NoiseKind kind);

}  // namespace quietnet
