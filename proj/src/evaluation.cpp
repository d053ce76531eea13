#include "quietnet/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "quietnet/error.hpp"

namespace quietnet {

namespace {

constexpr Eigen::Index kChunkRows = 1000;

void check_shapes(const MlpParams& params, const Dataset& data)
{
    params.validate();
    if (data.features.cols() != params.layer_sizes.front()) {
        throw Error(Errc::ShapeMismatch, "dataset width " + std::to_string(data.features.cols()) +
                                             " does not match network input " +
                                             std::to_string(params.layer_sizes.front()));
    }
    if (static_cast<std::size_t>(data.features.rows()) != data.labels.size()) {
        throw Error(Errc::ShapeMismatch, "dataset features and labels differ in length");
    }
}

std::size_t count_correct(const Eigen::MatrixXd& logits, const std::uint8_t* labels)
{
    const std::vector<int> pred = argmax_rows(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        correct += pred[i] == labels[i] ? 1 : 0;
    }
    return correct;
}

double percent(std::size_t correct, std::size_t total)
{
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

double noiseless_accuracy(const MlpParams& params, const Dataset& data)
{
    check_shapes(params, data);
    std::size_t correct = 0;
    const Eigen::Index n = data.features.rows();
    for (Eigen::Index start = 0; start < n; start += kChunkRows) {
        const Eigen::Index rows = std::min(kChunkRows, n - start);
        const Eigen::MatrixXd x = data.features.middleRows(start, rows);
        correct += count_correct(predict(params, x), data.labels.data() + start);
    }
    return percent(correct, data.size());
}

AccuracyStats evaluate_accuracy(const MlpParams& params, const Dataset& data, const NoiseSpec& noise, int repeats,
                                std::uint64_t seed)
{
    check_shapes(params, data);
    noise.validate(params.num_layers());
    if (repeats < 1) {
        throw Error(Errc::ConfigMismatch, "repeats must be positive");
    }
    std::vector<double> acc;
    acc.reserve(static_cast<std::size_t>(repeats));
    const Eigen::Index n = data.features.rows();
    for (int r = 0; r < repeats; ++r) {
        std::size_t correct = 0;
        for (Eigen::Index start = 0, chunk = 0; start < n; start += kChunkRows, ++chunk) {
            const Eigen::Index rows = std::min(kChunkRows, n - start);
            const Eigen::MatrixXd x = data.features.middleRows(start, rows);
            Rng rng = Rng::derive(seed, {stream::eval_noise, static_cast<std::uint64_t>(r),
                                         static_cast<std::uint64_t>(chunk)});
            const ForwardTrace trace = forward(params, x, noise, rng);
            correct += count_correct(trace.logits(), data.labels.data() + start);
        }
        acc.push_back(percent(correct, data.size()));
    }

    AccuracyStats out;
    if (std::all_of(acc.begin(), acc.end(), [&](double v) { return v == acc.front(); })) {
        out.mean = acc.front();
        return out;
    }
    double sum = 0.0;
    for (double v : acc) sum += v;
    out.mean = sum / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double v : acc) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    return out;
}

std::vector<double> log_spaced(double lo, double hi, int count)
{
    if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
        throw Error(Errc::ConfigMismatch, "log grid needs count >= 1 and 0 < lo <= hi");
    }
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<double> default_sweep_grid()
{
    return log_spaced(1e-3, 1.0, 30);
}

SweepResult noise_sweep(const MlpParams& params, const Dataset& data, NoiseKind kind,
                        const std::vector<double>& variances, int repeats, std::uint64_t seed, std::string model_tag,
                        unsigned threads)
{
    if (variances.empty()) {
        throw Error(Errc::ConfigMismatch, "sweep needs at least one variance");
    }
    for (std::size_t i = 0; i < variances.size(); ++i) {
        if (!(variances[i] >= 0.0)) {
            throw Error(Errc::NegativeVariance, "sweep variances must be >= 0");
        }
        if (i > 0 && !(variances[i] > variances[i - 1])) {
            throw Error(Errc::ConfigMismatch, "sweep variances must be strictly increasing");
        }
    }
    check_shapes(params, data);

    SweepResult out;
    out.model_tag = std::move(model_tag);
    out.kind = kind;
    out.repeats = repeats;
    out.seed = seed;
    out.points.resize(variances.size());

    auto run_point = [&](std::size_t i) {
        NoiseSpec spec{kind, variances[i], {}};
        const std::uint64_t point_seed =
            derive_seed(seed, {stream::sweep_point, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(i)});
        const AccuracyStats s = evaluate_accuracy(params, data, spec, repeats, point_seed);
        out.points[i] = {variances[i], s.mean, s.std};
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(variances.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < variances.size(); ++i) run_point(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < variances.size(); i = next++) run_point(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<DropRow> drop_report(const SweepResult& sweep, double noiseless)
{
    if (sweep.points.empty()) {
        throw Error(Errc::ConfigMismatch, "empty sweep");
    }
    std::vector<DropRow> rows;
    for (const auto& p : sweep.points) {
        rows.push_back({p.variance, p.mean_acc, noiseless - p.mean_acc});
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep)
{
    os << "variance,mean_acc,std_acc\n";
    char buf[160];
    for (const auto& p : sweep.points) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.variance, p.mean_acc, p.std_acc);
        os << buf;
    }
}

SweepResult read_sweep_csv(std::istream& is)
{
    SweepResult out;
    std::string line;
    if (!std::getline(is, line) || line != "variance,mean_acc,std_acc") {
        throw Error(Errc::ConfigParse, "sweep CSV must start with header variance,mean_acc,std_acc");
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        SweepPoint p;
        char c1 = 0, c2 = 0;
        std::istringstream row(line);
        if (!(row >> p.variance >> c1 >> p.mean_acc >> c2 >> p.std_acc) || c1 != ',' || c2 != ',') {
            throw Error(Errc::ConfigParse, "malformed sweep row: " + line);
        }
        out.points.push_back(p);
    }
    return out;
}

void write_drop_csv(std::ostream& os, const std::vector<DropRow>& rows)
{
    os << "variance,mean_acc,drop\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", r.variance, r.mean_acc, r.drop);
        os << buf;
    }
}

std::string sweep_file_name(const std::string& model_tag, NoiseKind kind)
{
    return model_tag + "_" + std::string(to_string(kind)) + ".csv";
}

}  // namespace quietnet
