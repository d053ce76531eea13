// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
// Criteria 3-6 and 10 need the dataset archives produced by `quietnet ingest`
// under <data-dir>/archives (see README). Trained models are cached in
// <cache-dir>, keyed by the checksum of their canonical config text and of the
// training archive, so reruns only evaluate.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "cli.hpp"
#include "quietnet/quietnet.hpp"

namespace fs = std::filesystem;
using namespace quietnet;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-5;
constexpr int kGradProbes = 200;
constexpr double kGradSeconds = 10.0;
constexpr double kCancelTol = 1e-10;
constexpr int kCancelDraws = 100;
constexpr double kCancelSeconds = 1.0;
constexpr double kMnistStandardMin = 97.0;
constexpr double kMnistRegMin = 94.0;
constexpr double kTrainSecondsMax = 30.0 * 60.0;
constexpr double kStandardDropMin = 30.0;
constexpr double kRegDropMax = 8.0;
constexpr double kNoiseAwareDropMax = 8.0;
constexpr double kFlatSpreadMax = 0.5;
constexpr double kFashionStandardDropMin = 40.0;
constexpr double kFashionRegDropMax = 12.0;
constexpr double kFashionStandardMin = 86.0;
constexpr double kFashionRegMin = 83.0;
constexpr double kPdfIntegralTol = 1e-6;
constexpr double kPdfL1Max = 0.02;
constexpr double kPdfSeconds = 30.0;
constexpr double kNoiseMeanTol = 0.002;
constexpr double kNoiseVarRelTol = 0.02;
constexpr int kEvalRepeats = 3;
constexpr std::uint64_t kEvalSeed = 1;

struct Context {
    fs::path data_dir;
    fs::path cache_dir;
    fs::path config_dir;
    unsigned threads = 1;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// Models

struct Model {
    std::string tag;
    MlpParams params;
    TrainHistory history;
    Dataset test;
    double noiseless = 0.0;
};

class ModelStore {
public:
    explicit ModelStore(Context ctx) : ctx_(std::move(ctx)) {}

    const Model& get(const std::string& config_name)
    {
        auto it = models_.find(config_name);
        if (it == models_.end()) it = models_.emplace(config_name, load_or_train(config_name)).first;
        return it->second;
    }

private:
    const Dataset& dataset(const std::string& rel)
    {
        auto it = datasets_.find(rel);
        if (it == datasets_.end()) it = datasets_.emplace(rel, load_dataset(resolve_data_path(rel))).first;
        return it->second;
    }

    Model load_or_train(const std::string& config_name)
    {
        const RunConfig cfg = load_config(ctx_.config_dir / (config_name + ".cfg"));
        const std::string text = to_config_text(cfg);
        const auto train_bytes = read_file_bytes(resolve_data_path(cfg.train_data));
        const std::string key_text = text + "|" + std::to_string(crc32_of(train_bytes));
        const std::vector<std::uint8_t> key_bytes(key_text.begin(), key_text.end());
        char key[16];
        std::snprintf(key, sizeof key, "%08x", crc32_of(key_bytes));
        const fs::path ckpt = ctx_.cache_dir / (cfg.tag + "_" + key + ".qnck");
        const fs::path hist = ctx_.cache_dir / (cfg.tag + "_" + key + ".history");

        Model m;
        m.tag = cfg.tag;
        m.test = dataset(cfg.test_data);
        if (fs::exists(ckpt) && fs::exists(hist)) {
            m.params = load_checkpoint(ckpt).params;
            std::ifstream in(hist);
            in >> m.history.wall_seconds;
            double loss = 0, pen = 0, val = 0;
            while (in >> loss >> pen >> val) {
                m.history.train_loss.push_back(loss);
                m.history.penalty.push_back(pen);
                m.history.val_accuracy.push_back(val);
            }
            std::cout << "  [cache] " << cfg.tag << " from " << ckpt.string() << std::endl;
        } else {
            std::cout << "  [train] " << cfg.tag << " (" << cfg.train.epochs << " epochs)" << std::endl;
            const Dataset& full = dataset(cfg.train_data);
            auto [train_set, val_set] = split_validation(full, cfg.validation_size);
            TrainResult r = train(cfg.train, train_set, val_set);
            m.params = std::move(r.params);
            m.history = std::move(r.history);
            fs::create_directories(ctx_.cache_dir);
            save_checkpoint(ckpt, m.params,
                            CheckpointMeta{cfg.train.seed, std::string(to_string(cfg.train.mode)),
                                           std::string(to_string(cfg.train.loss)), text});
            std::ofstream out(hist);
            out.precision(17);
            out << m.history.wall_seconds << "\n";
            for (std::size_t e = 0; e < m.history.train_loss.size(); ++e) {
                out << m.history.train_loss[e] << " " << m.history.penalty[e] << " " << m.history.val_accuracy[e]
                    << "\n";
            }
            std::cout << "  [train] " << cfg.tag << " done in " << fmt("%.1f", m.history.wall_seconds) << " s"
                      << std::endl;
        }
        m.noiseless = noiseless_accuracy(m.params, m.test);
        return m;
    }

    Context ctx_;
    std::map<std::string, Model> models_;
    std::map<std::string, Dataset> datasets_;
};

double accuracy_at(const Model& m, NoiseKind kind, double variance)
{
    return evaluate_accuracy(m.params, m.test, NoiseSpec{kind, variance, {}}, kEvalRepeats, kEvalSeed).mean;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome gradient_exactness()
{
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport report = gradient_check_all({10, 8, 8, 4}, kGradProbes, kGradTol);
    const double secs = seconds_since(t0);
    bool ok = report.entries.size() == 4 && secs < kGradSeconds;
    std::string detail;
    for (const auto& e : report.entries) {
        ok = ok && e.probes == kGradProbes && e.max_rel_error < kGradTol;
        detail += std::string(to_string(e.mode)) + "=" + fmt("%.2e", e.max_rel_error) + " ";
    }
    return {ok, detail + "time=" + fmt("%.2f", secs) + "s"};
}

Outcome correlated_cancellation()
{
    const auto t0 = std::chrono::steady_clock::now();
    MlpParams p = MlpParams::glorot_uniform({784, 300, 300, 10}, 2024);
    Rng init(17);
    for (int l = 1; l <= p.num_layers(); ++l) {
        for (Eigen::Index i = 0; i < p.b(l).size(); ++i) p.b(l)(i) = init.normal();
    }
    for (int l = 2; l <= p.num_layers(); ++l) {
        Eigen::MatrixXd& w = p.W(l);
        w = w.colwise() - w.rowwise().mean();
    }
    Eigen::MatrixXd x(16, 784);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = init.uniform();
    const Eigen::MatrixXd clean = predict(p, x);

    Rng rng(99);
    double worst = 0.0;
    for (int d = 0; d < kCancelDraws; ++d) {
        const ForwardTrace t = forward(p, x, NoiseSpec{NoiseKind::correlated, 1.0, {}}, rng);
        worst = std::max(worst, (t.logits() - clean).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    return {worst <= kCancelTol && secs < kCancelSeconds,
            "max|logit diff|=" + fmt("%.2e", worst) + " draws=" + std::to_string(kCancelDraws) +
                " time=" + fmt("%.3f", secs) + "s"};
}

Outcome mnist_reproduction(ModelStore& store)
{
    const Model& s = store.get("mnist_standard");
    const Model& r = store.get("mnist_reg_uncorrelated");
    const bool ok = s.noiseless >= kMnistStandardMin && r.noiseless >= kMnistRegMin &&
                    s.history.wall_seconds <= kTrainSecondsMax && r.history.wall_seconds <= kTrainSecondsMax;
    return {ok, "standard=" + fmt("%.2f", s.noiseless) + "% reg-uncorrelated=" + fmt("%.2f", r.noiseless) +
                    "% train_time=" + fmt("%.0f", s.history.wall_seconds) + "s/" +
                    fmt("%.0f", r.history.wall_seconds) + "s"};
}

Outcome uncorrelated_gap(ModelStore& store)
{
    const Model& s = store.get("mnist_standard");
    const Model& r = store.get("mnist_reg_uncorrelated");
    const Model& n = store.get("mnist_noise_aware");
    const double ds = s.noiseless - accuracy_at(s, NoiseKind::uncorrelated, 1.0);
    const double dr = r.noiseless - accuracy_at(r, NoiseKind::uncorrelated, 1.0);
    const double dn = n.noiseless - accuracy_at(n, NoiseKind::uncorrelated, 1.0);
    const bool ok = ds >= kStandardDropMin && dr <= kRegDropMax && dn <= kNoiseAwareDropMax;
    return {ok, "drop@1.0 standard=" + fmt("%.2f", ds) + " reg-uncorrelated=" + fmt("%.2f", dr) +
                    " noise-aware=" + fmt("%.2f", dn)};
}

Outcome correlated_flatness(ModelStore& store, const Context& ctx)
{
    const Model& m = store.get("mnist_reg_correlated");
    const SweepResult sweep = noise_sweep(m.params, m.test, NoiseKind::correlated, default_sweep_grid(), kEvalRepeats,
                                          kEvalSeed, m.tag, ctx.threads);
    double lo = 100.0, hi = 0.0;
    for (const auto& p : sweep.points) {
        lo = std::min(lo, p.mean_acc);
        hi = std::max(hi, p.mean_acc);
    }
    double max_row_sum = 0.0;
    for (int l = 2; l <= m.params.num_layers(); ++l) {
        max_row_sum = std::max(max_row_sum, m.params.W(l).rowwise().sum().cwiseAbs().maxCoeff());
    }
    const auto& pen = m.history.penalty;
    const bool pressure = !pen.empty() && pen.back() < pen.front();
    return {hi - lo < kFlatSpreadMax,
            "points=" + std::to_string(sweep.points.size()) + " min=" + fmt("%.2f", lo) + " max=" +
                fmt("%.2f", hi) + " spread=" + fmt("%.3f", hi - lo) + " noiseless=" + fmt("%.2f", m.noiseless) +
                " (max|row sum|=" + fmt("%.4f", max_row_sum) + ", penalty " + (pressure ? "decreased" : "did not decrease") +
                ")"};
}

Outcome fashion_run(ModelStore& store)
{
    const Model& s = store.get("fashion_standard");
    const Model& r = store.get("fashion_reg_uncorrelated");
    const double ds = s.noiseless - accuracy_at(s, NoiseKind::uncorrelated, 1.0);
    const double dr = r.noiseless - accuracy_at(r, NoiseKind::uncorrelated, 1.0);
    const bool ok = ds >= kFashionStandardDropMin && dr <= kFashionRegDropMax && s.noiseless >= kFashionStandardMin &&
                    r.noiseless >= kFashionRegMin;
    return {ok, "noiseless standard=" + fmt("%.2f", s.noiseless) + "% reg=" + fmt("%.2f", r.noiseless) +
                    "% drop@1.0 standard=" + fmt("%.2f", ds) + " reg=" + fmt("%.2f", dr)};
}

Outcome pdf_transform()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst_integral = 0.0, worst_l1 = 0.0, prev_sd = INFINITY;
    std::string sds;
    for (int mu = 0; mu <= 5; ++mu) {
        const GaussianInput g{static_cast<double>(mu), 0.2};
        const double integral = adaptive_simpson(
            [&](double a) { return a > 0.0 && a < 1.0 ? analytic_activation_pdf(g, a) : 0.0; }, 0.0, 1.0, 1e-9);
        Rng rng = Rng::derive(kEvalSeed, {stream::monte_carlo, static_cast<std::uint64_t>(mu)});
        const Histogram h = empirical_activation_pdf(g, 1000000, 200, rng);
        // Each bin compares the analytic mass over the bin (divided by its
        // width) with the Monte Carlo density.
        const double l1 = l1_distance_bin_averaged(h, g);
        const double sd = activation_moments(g).second;
        worst_integral = std::max(worst_integral, std::abs(integral - 1.0));
        worst_l1 = std::max(worst_l1, l1);
        ok = ok && std::abs(integral - 1.0) <= kPdfIntegralTol && l1 < kPdfL1Max && sd < prev_sd;
        prev_sd = sd;
        sds += (mu ? "," : "") + fmt("%.4f", sd);
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < kPdfSeconds;
    return {ok, "max|integral-1|=" + fmt("%.1e", worst_integral) + " max L1=" + fmt("%.4f", worst_l1) + " std=[" +
                    sds + "] time=" + fmt("%.1f", secs) + "s"};
}

Outcome noise_statistics()
{
    Rng rng = Rng::derive(kEvalSeed, {stream::monte_carlo, 1000});
    const Eigen::MatrixXd u = sample_layer_noise(NoiseSpec{NoiseKind::uncorrelated, 0.25, {}}, 1000, 1000, rng);
    const double mean = u.mean();
    const double var = (u.array() - mean).square().sum() / static_cast<double>(u.size() - 1);
    const Eigen::MatrixXd c = sample_layer_noise(NoiseSpec{NoiseKind::correlated, 0.25, {}}, 300, 1000, rng);
    double worst_row_range = 0.0;
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
        worst_row_range = std::max(worst_row_range, c.row(r).maxCoeff() - c.row(r).minCoeff());
    }
    const bool ok = std::abs(mean) <= kNoiseMeanTol && std::abs(var - 0.25) <= kNoiseVarRelTol * 0.25 &&
                    worst_row_range == 0.0;
    return {ok, "mean=" + fmt("%+.5f", mean) + " var=" + fmt("%.5f", var) +
                    " correlated max row range=" + fmt("%g", worst_row_range)};
}

Outcome idx_parser()
{
    Rng rng(2051);
    int round_trips = 0;
    bool ok = true;
    for (int t = 0; t < 25; ++t) {
        RawImages img{static_cast<std::uint32_t>(rng.below(5)), static_cast<std::uint32_t>(1 + rng.below(28)),
                      static_cast<std::uint32_t>(1 + rng.below(28)), {}};
        img.pixels.resize(std::size_t{img.count} * img.rows * img.cols);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
        std::vector<std::uint8_t> labels(img.count);
        for (auto& y : labels) y = static_cast<std::uint8_t>(rng.below(10));
        ok = ok && parse_idx_images(serialize_idx_images(img)) == img &&
             parse_idx_labels(serialize_idx_labels(labels)) == labels;
        ++round_trips;
    }

    auto header = [](std::initializer_list<std::uint32_t> words) {
        std::vector<std::uint8_t> out;
        for (auto w : words) {
            for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(w >> s));
        }
        return out;
    };
    auto code_of = [](const std::vector<std::uint8_t>& bytes) -> std::string {
        try {
            parse_idx_images(bytes);
        } catch (const Error& e) {
            return std::string(to_string(e.code()));
        }
        return "none";
    };
    auto bad_magic = header({2049, 1, 2, 3});
    bad_magic.resize(bad_magic.size() + 6);
    auto truncated = header({2051, 2, 2, 3});
    truncated.resize(truncated.size() + 6);
    const auto overflow = header({2051, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    const std::string c1 = code_of(bad_magic), c2 = code_of(truncated), c3 = code_of(overflow);
    ok = ok && c1 == "BadMagic" && c2 == "Truncated" && c3 == "DimensionOverflow";
    return {ok, "round_trips=" + std::to_string(round_trips) + " errors=" + c1 + "," + c2 + "," + c3};
}

Outcome determinism(const Context& ctx)
{
    const fs::path dir = ctx.cache_dir / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "small.cfg");
        cfg << "training.mode = noise-aware\n"
               "training.epochs = 1\n"
               "training.layer_sizes = 784,32,32,10\n"
               "training.seed = 11\n"
               "noise.kind = uncorrelated\n"
               "noise.variance = 0.5\n"
               "data.train = archives/mnist_train.qnds\n"
               "data.test = archives/mnist_t10k.qnds\n"
               "output.tag = small\n";
    }
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "quietnet");
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        if (code != 0) std::cout << "  " << err.str();
        return code;
    };
    const std::string out_dir = (dir / "out").string();
    auto train_and_sweep = [&](const std::string& threads, const std::string& sweep_dir) {
        return run({"train", (dir / "small.cfg").string(), "--out-dir", out_dir, "--quiet"}) == 0 &&
               run({"sweep", "--checkpoint", out_dir + "/small.qnck", "--data", "archives/mnist_t10k.qnds",
                    "--kind", "uncorrelated", "--points", "8", "--repeats", "2", "--threads", threads,
                    "--out-dir", (dir / sweep_dir).string()}) == 0;
    };
    if (!train_and_sweep("1", "sweep1")) return {false, "command failed"};
    const std::string ck1 = slurp(dir / "out" / "small.qnck");
    const std::string hist1 = slurp(dir / "out" / "small_history.csv");
    fs::remove_all(dir / "out");
    const unsigned par = std::max(4u, ctx.threads);
    if (!train_and_sweep(std::to_string(par), "sweep2")) return {false, "command failed"};
    const std::string ck2 = slurp(dir / "out" / "small.qnck");
    const std::string hist2 = slurp(dir / "out" / "small_history.csv");
    const std::string csv1 = slurp(dir / "sweep1" / "small_uncorrelated.csv");
    const std::string csv2 = slurp(dir / "sweep2" / "small_uncorrelated.csv");
    const std::string drop1 = slurp(dir / "sweep1" / "small_uncorrelated_drop.csv");
    const std::string drop2 = slurp(dir / "sweep2" / "small_uncorrelated_drop.csv");
    const bool ok = !ck1.empty() && ck1 == ck2 && hist1 == hist2 && !csv1.empty() && csv1 == csv2 && drop1 == drop2;
    return {ok, std::string("checkpoint ") + (ck1 == ck2 ? "identical" : "DIFFERS") + ", history " +
                    (hist1 == hist2 ? "identical" : "DIFFERS") + ", sweep csv (1 vs " + std::to_string(par) +
                    " threads) " + (csv1 == csv2 && drop1 == drop2 ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"quietnet acceptance suite"};
    Context ctx;
    std::string data_dir, cache_dir = "acceptance_cache", config_dir = QUIETNET_CONFIG_DIR;
    std::vector<int> only;
    ctx.threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--data-dir", data_dir, "Directory containing archives/ (defaults to $QUIETNET_DATA_DIR)");
    app.add_option("--cache-dir", cache_dir, "Where trained models are cached");
    app.add_option("--config-dir", config_dir, "Directory with the shipped configs");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("--threads", ctx.threads, "Threads for sweeps");
    CLI11_PARSE(app, argc, argv);

    if (!data_dir.empty()) ::setenv("QUIETNET_DATA_DIR", data_dir.c_str(), 1);
    ctx.data_dir = data_directory();
    ctx.cache_dir = cache_dir;
    ctx.config_dir = config_dir;
    fs::create_directories(ctx.cache_dir);
    ModelStore store(ctx);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient exactness", [] { return gradient_exactness(); }},
        {"correlated cancellation", [] { return correlated_cancellation(); }},
        {"MNIST reproduction", [&] { return mnist_reproduction(store); }},
        {"uncorrelated robustness gap", [&] { return uncorrelated_gap(store); }},
        {"correlated robustness", [&] { return correlated_flatness(store, ctx); }},
        {"Fashion-MNIST extended run", [&] { return fashion_run(store); }},
        {"PDF transform", [] { return pdf_transform(); }},
        {"noise statistics", [] { return noise_statistics(); }},
        {"IDX parser", [] { return idx_parser(); }},
        {"determinism", [&] { return determinism(ctx); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
