#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "quietnet/quietnet.hpp"

namespace quietnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::DivergenceDetected:
    case Errc::GradientMismatch:
    case Errc::NonFiniteInput: return kExitRuntime;
    default: return kExitUsage;
    }
}

std::string utc_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex32(std::uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

std::string fmt6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_short(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(Errc::Io, "cannot write " + path.string());
    return os;
}

struct Manifest {
    json doc;

    Manifest(const std::string& command, const std::string& config_text)
    {
        doc["command"] = command;
        doc["library_version"] = kVersion;
        doc["created_utc"] = utc_now();
        doc["config"] = config_text;
        doc["seeds"] = json::object();
        doc["datasets"] = json::array();
        doc["artifacts"] = json::array();
    }

    void dataset(const fs::path& path, const ArchiveContents& c)
    {
        doc["datasets"].push_back({{"path", path.string()}, {"name", c.name}, {"count", c.images.count},
                                   {"crc32", hex32(c.checksum)}});
    }

    void artifact(const fs::path& path) { doc["artifacts"].push_back(path.string()); }

    void write(const fs::path& path)
    {
        doc["finished_utc"] = utc_now();
        auto os = open_out(path);
        os << doc.dump(2) << "\n";
    }
};

Dataset load_archive(const fs::path& path, Manifest& manifest)
{
    ArchiveContents c = read_dataset_archive(path);
    manifest.dataset(path, c);
    return to_dataset(c.images, c.labels, c.name);
}

std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw Error(Errc::ConfigParse, "not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string images, labels, out, name;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out)
{
    const auto image_bytes = read_file_bytes(a.images);
    const auto label_bytes = read_file_bytes(a.labels);
    RawImages images;
    std::vector<std::uint8_t> labels;
    try {
        images = parse_idx_images(image_bytes);
    } catch (const Error& e) {
        throw Error(e.code(), a.images + ": " + e.message(), e.offset());
    }
    try {
        labels = parse_idx_labels(label_bytes);
    } catch (const Error& e) {
        throw Error(e.code(), a.labels + ": " + e.message(), e.offset());
    }
    const std::string name = a.name.empty() ? fs::path(a.images).stem().string() : a.name;
    // Validates counts, shape and label range before anything is written.
    (void)to_dataset(images, labels, name);
    const std::uint32_t crc = write_dataset_archive(a.out, images, labels, name);
    out << "ingested " << images.count << " samples (" << images.rows << "x" << images.cols << ") into " << a.out
        << " crc32=" << hex32(crc) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string out_dir;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out)
{
    RunConfig cfg = load_config(a.config);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(Errc::ConfigParse, "--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
    cfg.train.validate();
    if (cfg.train_data.empty() || cfg.test_data.empty()) {
        throw Error(Errc::ConfigMismatch, "config must set data.train and data.test");
    }

    const std::string config_text = to_config_text(cfg);
    Manifest manifest("train", config_text);
    manifest.doc["seeds"]["training"] = cfg.train.seed;
    manifest.doc["weight_init"] = "glorot-uniform";
    manifest.doc["penalty_scaling"] = "data loss averaged per sample; weight penalties unscaled by batch size";

    const Dataset full = load_archive(resolve_data_path(cfg.train_data), manifest);
    const Dataset test = load_archive(resolve_data_path(cfg.test_data), manifest);
    Dataset train_set;
    Dataset val_set;
    if (!cfg.val_data.empty()) {
        train_set = full;
        val_set = load_archive(resolve_data_path(cfg.val_data), manifest);
    } else if (cfg.validation_size > 0) {
        std::tie(train_set, val_set) = split_validation(full, cfg.validation_size);
    } else {
        train_set = full;
    }

    auto on_epoch = [&](int epoch, const TrainHistory& h) {
        if (a.quiet) return;
        out << "epoch " << epoch + 1 << "/" << cfg.train.epochs << " loss=" << fmt6(h.train_loss.back())
            << " penalty=" << fmt6(h.penalty.back()) << " val_acc=" << fmt6(h.val_accuracy.back()) << " ("
            << fmt6(h.wall_seconds) << " s)" << std::endl;
    };
    const TrainResult result = train(cfg.train, train_set, val_set, TrainHooks{on_epoch, {}});
    const double test_acc = noiseless_accuracy(result.params, test);

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    const fs::path ckpt = dir / (cfg.tag + ".qnck");
    const fs::path hist = dir / (cfg.tag + "_history.csv");
    const fs::path man = dir / (cfg.tag + "_manifest.json");

    save_checkpoint(ckpt, result.params,
                    CheckpointMeta{cfg.train.seed, std::string(to_string(cfg.train.mode)),
                                   std::string(to_string(cfg.train.loss)), config_text});
    {
        auto os = open_out(hist);
        os << "epoch,train_loss,penalty,val_acc\n";
        for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
            os << e + 1 << "," << fmt6(result.history.train_loss[e]) << "," << fmt6(result.history.penalty[e]) << ","
               << fmt6(result.history.val_accuracy[e]) << "\n";
        }
    }
    manifest.artifact(ckpt);
    manifest.artifact(hist);
    manifest.doc["results"] = {{"test_accuracy", test_acc},
                               {"final_val_accuracy",
                                result.history.val_accuracy.empty() ? 0.0 : result.history.val_accuracy.back()},
                               {"wall_seconds", result.history.wall_seconds}};
    manifest.write(man);

    out << "trained " << cfg.tag << " mode=" << to_string(cfg.train.mode) << " epochs=" << cfg.train.epochs
        << " val_acc=" << fmt6(result.history.val_accuracy.empty() ? 0.0 : result.history.val_accuracy.back())
        << " test_acc=" << fmt6(test_acc) << " checkpoint=" << ckpt.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string checkpoint, data, kind = "uncorrelated", out_dir = ".", tag, variances;
    double grid_min = 1e-3, grid_max = 1.0;
    int points = 30, repeats = 3;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t holdout = 0;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out)
{
    const NoiseKind kind = parse_noise_kind(a.kind);
    if (kind == NoiseKind::none) throw Error(Errc::ConfigParse, "sweep kind must be correlated or uncorrelated");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const std::string tag = a.tag.empty() ? fs::path(a.checkpoint).stem().string() : a.tag;
    const std::vector<double> grid =
        a.variances.empty() ? log_spaced(a.grid_min, a.grid_max, a.points) : parse_double_list(a.variances);

    std::ostringstream snapshot;
    snapshot << "checkpoint = " << a.checkpoint << "\ndata = " << a.data << "\nkind = " << a.kind
             << "\nholdout = " << a.holdout << "\nrepeats = " << a.repeats << "\nseed = " << a.seed
             << "\nvariances = ";
    for (std::size_t i = 0; i < grid.size(); ++i) snapshot << (i ? "," : "") << grid[i];
    snapshot << "\n";
    Manifest manifest("sweep", snapshot.str());
    manifest.doc["seeds"]["sweep"] = a.seed;
    manifest.doc["threads"] = a.threads;

    Dataset data = load_archive(resolve_data_path(a.data), manifest);
    if (a.holdout > 0) {
        data = split_validation(data, a.holdout).second;
        manifest.doc["holdout"] = a.holdout;
    }
    const double clean = noiseless_accuracy(ck.params, data);
    const SweepResult sweep = noise_sweep(ck.params, data, kind, grid, a.repeats, a.seed, tag, a.threads);

    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    const fs::path csv = dir / sweep_file_name(tag, kind);
    const fs::path drop = dir / (tag + "_" + std::string(to_string(kind)) + "_drop.csv");
    {
        auto os = open_out(csv);
        write_sweep_csv(os, sweep);
    }
    {
        auto os = open_out(drop);
        write_drop_csv(os, drop_report(sweep, clean));
    }
    manifest.artifact(csv);
    manifest.artifact(drop);
    manifest.doc["results"] = {{"noiseless_accuracy", clean}};
    manifest.write(dir / (tag + "_" + std::string(to_string(kind)) + "_manifest.json"));

    double lo = 100.0, hi = 0.0;
    for (const auto& p : sweep.points) {
        lo = std::min(lo, p.mean_acc);
        hi = std::max(hi, p.mean_acc);
    }
    out << "sweep " << tag << " kind=" << a.kind << " points=" << grid.size() << " noiseless=" << fmt6(clean)
        << " min=" << fmt6(lo) << " max=" << fmt6(hi) << " spread=" << fmt6(hi - lo)
        << " last_drop=" << fmt6(clean - sweep.points.back().mean_acc) << " csv=" << csv.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct PdfArgs {
    std::string mus = "0,1,2,3,4,5", out_dir = ".";
    double variance = 0.2;
    std::size_t samples = 1000000, bins = 200;
    std::uint64_t seed = 1;
};

int cmd_pdf(const PdfArgs& a, std::ostream& out)
{
    const std::vector<double> mus = parse_double_list(a.mus);
    if (mus.empty()) throw Error(Errc::ConfigParse, "--mu needs at least one value");
    if (a.bins == 0 || a.samples == 0) throw Error(Errc::ConfigParse, "--bins and --samples must be positive");
    std::ostringstream snapshot;
    snapshot << "mu = " << a.mus << "\nvariance = " << a.variance << "\nsamples = " << a.samples
             << "\nbins = " << a.bins << "\nseed = " << a.seed << "\n";
    Manifest manifest("pdf", snapshot.str());
    manifest.doc["seeds"]["monte_carlo"] = a.seed;

    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    auto summary = open_out(dir / "pdf_summary.csv");
    summary << "mu,variance,integral,mean,std,l1_centers,l1_bin_averaged\n";
    for (std::size_t m = 0; m < mus.size(); ++m) {
        const GaussianInput g{mus[m], a.variance};
        const std::string suffix = "mu" + fmt_short(mus[m]);
        const fs::path analytic = dir / ("pdf_analytic_" + suffix + ".csv");
        const fs::path empirical = dir / ("pdf_empirical_" + suffix + ".csv");
        {
            auto os = open_out(analytic);
            os << "a,density\n";
            for (std::size_t k = 1; k < a.bins; ++k) {
                const double x = static_cast<double>(k) / static_cast<double>(a.bins);
                os << fmt6(x) << "," << fmt6(analytic_activation_pdf(g, x)) << "\n";
            }
        }
        Rng rng = Rng::derive(a.seed, {stream::monte_carlo, static_cast<std::uint64_t>(m)});
        const Histogram h = empirical_activation_pdf(g, a.samples, a.bins, rng);
        {
            auto os = open_out(empirical);
            write_histogram_csv(os, h);
        }
        const double integral = adaptive_simpson(
            [&](double x) { return x > 0.0 && x < 1.0 ? analytic_activation_pdf(g, x) : 0.0; }, 0.0, 1.0, 1e-9);
        const auto [mean, sd] = activation_moments(g);
        summary << fmt6(mus[m]) << "," << fmt6(a.variance) << "," << fmt6(integral) << "," << fmt6(mean) << ","
                << fmt6(sd) << "," << fmt6(l1_distance_at_centers(h, g)) << ","
                << fmt6(l1_distance_bin_averaged(h, g)) << "\n";
        manifest.artifact(analytic);
        manifest.artifact(empirical);
        out << "mu=" << fmt6(mus[m]) << " integral=" << fmt6(integral) << " std=" << fmt6(sd)
            << " l1_bin_averaged=" << fmt6(l1_distance_bin_averaged(h, g)) << "\n";
    }
    manifest.artifact(dir / "pdf_summary.csv");
    manifest.write(dir / "pdf_manifest.json");
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
    std::string checkpoint, data, out_dir = ".", tag;
    std::size_t samples = 10000, bins = 200;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out)
{
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const std::string tag = a.tag.empty() ? fs::path(a.checkpoint).stem().string() : a.tag;
    Manifest manifest("inspect", "checkpoint = " + a.checkpoint + "\ndata = " + a.data + "\n");
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);

    for (int l = 1; l <= ck.params.num_layers(); ++l) {
        const fs::path p = dir / (tag + "_rowstats_W" + std::to_string(l) + ".csv");
        auto os = open_out(p);
        os << "row,mean,std\n";
        const auto stats = row_stats(ck.params.W(l));
        double worst = 0.0;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            os << i << "," << fmt6(stats[i].mean) << "," << fmt6(stats[i].stddev) << "\n";
            worst = std::max(worst, std::abs(stats[i].mean) * static_cast<double>(ck.params.W(l).cols()));
        }
        manifest.artifact(p);
        out << "W" << l << " " << ck.params.W(l).rows() << "x" << ck.params.W(l).cols()
            << " max|row sum|=" << fmt6(worst) << "\n";
    }

    if (!a.data.empty()) {
        const Dataset data = load_archive(resolve_data_path(a.data), manifest);
        const NetworkDistributions d = collect_network_distributions(ck.params, data, a.samples, a.bins);
        auto emit = [&](const std::string& name, const Histogram& h) {
            const fs::path p = dir / (tag + "_" + name + ".csv");
            auto os = open_out(p);
            write_histogram_csv(os, h);
            manifest.artifact(p);
        };
        for (std::size_t h = 0; h < d.pre_activations.size(); ++h) {
            emit("preact_layer" + std::to_string(h + 1), d.pre_activations[h]);
            emit("postact_layer" + std::to_string(h + 1), d.post_activations[h]);
        }
        emit("output_weights", d.output_weights);
    }
    manifest.write(dir / (tag + "_inspect_manifest.json"));
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::string layers = "10,8,8,4";
    int probes = 200;
    double tolerance = 1e-5;
    std::uint64_t seed = 7;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out)
{
    std::vector<int> sizes;
    for (double v : parse_double_list(a.layers)) sizes.push_back(static_cast<int>(v));
    const GradCheckReport report = gradient_check_all(sizes, a.probes, a.tolerance, a.seed);
    for (const auto& e : report.entries) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-17s probes=%d max_rel_err=%.3e %s\n", std::string(to_string(e.mode)).c_str(),
                      e.probes, e.max_rel_error, e.passed ? "PASS" : "FAIL");
        out << buf;
    }
    require_passed(report);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Noise-resilient MLP training and analysis", "quietnet"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate an IDX image/label pair and write a dataset archive");
    c_ingest->add_option("--images", ingest.images, "IDX image file (raw or .gz)")->required();
    c_ingest->add_option("--labels", ingest.labels, "IDX label file (raw or .gz)")->required();
    c_ingest->add_option("--out", ingest.out, "Output archive path")->required();
    c_ingest->add_option("--name", ingest.name, "Dataset name tag");

    TrainArgs train_args;
    auto* c_train = app.add_subcommand("train", "Train a model from a key=value config file");
    c_train->add_option("config", train_args.config, "Config file")->required();
    c_train->add_option("--set", train_args.overrides, "Override a config key (key=value)");
    c_train->add_option("--out-dir", train_args.out_dir, "Override output.dir");
    c_train->add_flag("--quiet", train_args.quiet, "Suppress per-epoch progress");

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "Accuracy across a grid of noise variances");
    c_sweep->add_option("--checkpoint", sweep.checkpoint)->required();
    c_sweep->add_option("--data", sweep.data, "Dataset archive to evaluate on")->required();
    c_sweep->add_option("--kind", sweep.kind, "correlated | uncorrelated");
    c_sweep->add_option("--grid-min", sweep.grid_min);
    c_sweep->add_option("--grid-max", sweep.grid_max);
    c_sweep->add_option("--points", sweep.points);
    c_sweep->add_option("--variances", sweep.variances, "Explicit comma-separated variances");
    c_sweep->add_option("--repeats", sweep.repeats);
    c_sweep->add_option("--seed", sweep.seed);
    c_sweep->add_option("--threads", sweep.threads);
    c_sweep->add_option("--out-dir", sweep.out_dir);
    c_sweep->add_option("--tag", sweep.tag, "Model tag used in file names");
    c_sweep->add_option("--holdout", sweep.holdout, "Evaluate on the last N rows only (the training validation split)");

    PdfArgs pdf;
    auto* c_pdf = app.add_subcommand("pdf", "Analytic and Monte Carlo densities of sigmoid(N(mu, variance))");
    c_pdf->add_option("--mu", pdf.mus, "Comma-separated means");
    c_pdf->add_option("--variance", pdf.variance);
    c_pdf->add_option("--samples", pdf.samples);
    c_pdf->add_option("--bins", pdf.bins);
    c_pdf->add_option("--seed", pdf.seed);
    c_pdf->add_option("--out-dir", pdf.out_dir);

    InspectArgs inspect;
    auto* c_inspect = app.add_subcommand("inspect", "Row statistics and activation distributions of a checkpoint");
    c_inspect->add_option("--checkpoint", inspect.checkpoint)->required();
    c_inspect->add_option("--data", inspect.data, "Dataset archive for activation histograms");
    c_inspect->add_option("--samples", inspect.samples);
    c_inspect->add_option("--bins", inspect.bins);
    c_inspect->add_option("--out-dir", inspect.out_dir);
    c_inspect->add_option("--tag", inspect.tag);

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every training objective");
    c_gc->add_option("--layers", gc.layers);
    c_gc->add_option("--probes", gc.probes);
    c_gc->add_option("--tol", gc.tolerance);
    c_gc->add_option("--seed", gc.seed);

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (c_ingest->parsed()) return cmd_ingest(ingest, out);
        if (c_train->parsed()) return cmd_train(train_args, out);
        if (c_sweep->parsed()) return cmd_sweep(sweep, out);
        if (c_pdf->parsed()) return cmd_pdf(pdf, out);
        if (c_inspect->parsed()) return cmd_inspect(inspect, out);
        if (c_gc->parsed()) return cmd_gradcheck(gc, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace quietnet::cli
