#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "quietnet/quietnet.hpp"

namespace py = pybind11;
using namespace quietnet;

namespace {

std::vector<std::uint8_t> to_bytes(const py::bytes& b)
{
    const std::string s = b;
    return {s.begin(), s.end()};
}

Dataset make_dataset(const RowMatrix& features, const std::vector<std::uint8_t>& labels)
{
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw Error(Errc::CountMismatch, "features and labels have different lengths");
    }
    return Dataset{features, labels, "python"};
}

NoiseSpec make_noise(const std::string& kind, double variance)
{
    return NoiseSpec{parse_noise_kind(kind), variance, {}};
}

}  // namespace

PYBIND11_MODULE(_quietnet, m)
{
    m.doc() = "Noise-robust MLP training core";
    m.attr("__version__") = std::string(kVersion);

    static py::exception<Error> error_type(m, "QuietnetError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    // Data
    m.def("parse_idx_images", [](const py::bytes& b) {
        const RawImages img = parse_idx_images(to_bytes(b));
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(img.count,
                                                                                         img.rows * img.cols);
        std::copy(img.pixels.begin(), img.pixels.end(), out.data());
        return py::make_tuple(out, img.rows, img.cols);
    }, "Parse an IDX image file; returns (pixels[count, rows*cols], rows, cols).");
    m.def("parse_idx_labels", [](const py::bytes& b, int num_classes) { return parse_idx_labels(to_bytes(b), num_classes); },
          py::arg("data"), py::arg("num_classes") = kNumClasses);
    m.def("load_dataset", [](const std::filesystem::path& path) {
        Dataset d = load_dataset(path);
        return py::make_tuple(d.features, d.labels, d.name);
    }, "Load a dataset archive; returns (features, labels, name).");

    // Network
    py::class_<MlpParams>(m, "MlpParams")
        .def_static("glorot_uniform", &MlpParams::glorot_uniform, py::arg("layer_sizes"), py::arg("seed"))
        .def_static("zeros", &MlpParams::zeros)
        .def_readonly("layer_sizes", &MlpParams::layer_sizes)
        .def_readwrite("weights", &MlpParams::weights)
        .def_readwrite("biases", &MlpParams::biases)
        .def("validate", &MlpParams::validate)
        .def("__eq__", &MlpParams::operator==);

    m.def("predict", [](const MlpParams& p, const Eigen::MatrixXd& x) { return predict(p, x); });
    m.def("forward", [](const MlpParams& p, const Eigen::MatrixXd& x, const std::string& kind, double variance,
                        std::uint64_t seed) {
        Rng rng(seed);
        const ForwardTrace t = forward(p, x, make_noise(kind, variance), rng);
        py::dict d;
        d["pre_activations"] = t.pre_activations;
        d["activations"] = t.activations;
        d["noise"] = t.noise_draws;
        return d;
    }, py::arg("params"), py::arg("x"), py::arg("kind") = "none", py::arg("variance") = 0.0, py::arg("seed") = 0);
    m.def("sample_layer_noise", [](const std::string& kind, double variance, Eigen::Index width, Eigen::Index batch,
                                   std::uint64_t seed) {
        Rng rng(seed);
        return sample_layer_noise(make_noise(kind, variance), width, batch, rng);
    }, py::arg("kind"), py::arg("variance"), py::arg("width"), py::arg("batch"), py::arg("seed"));
    m.def("sigmoid", py::overload_cast<double>(&sigmoid));
    m.def("sigmoid_prime", py::overload_cast<double>(&sigmoid_prime));

    // Regularizers
    m.def("row_sum_penalty", &row_sum_penalty);
    m.def("row_sum_penalty_grad", &row_sum_penalty_grad);
    m.def("derivative_penalty", &derivative_penalty);
    m.def("derivative_penalty_grad", &derivative_penalty_grad);
    m.def("l2_penalty", &l2_penalty);
    m.def("l2_penalty_grad", &l2_penalty_grad);

    // Densities
    m.def("analytic_activation_pdf", [](double mu, double variance, double a) {
        return analytic_activation_pdf({mu, variance}, a);
    });
    m.def("empirical_activation_pdf", [](double mu, double variance, std::size_t samples, std::size_t bins,
                                         std::uint64_t seed) {
        Rng rng(seed);
        const Histogram h = empirical_activation_pdf({mu, variance}, samples, bins, rng);
        return py::make_tuple(h.edges, h.density);
    }, py::arg("mu"), py::arg("variance"), py::arg("samples"), py::arg("bins") = 200, py::arg("seed") = 1);
    m.def("activation_moments", [](double mu, double variance) { return activation_moments({mu, variance}); });
    m.def("row_stats", [](const Eigen::MatrixXd& w) {
        std::vector<std::pair<double, double>> out;
        for (const RowStat& r : row_stats(w)) out.emplace_back(r.mean, r.stddev);
        return out;
    });

    // Training and evaluation
    m.def("train", [](const std::string& config_text, const RowMatrix& x, const std::vector<std::uint8_t>& y,
                      const RowMatrix& val_x, const std::vector<std::uint8_t>& val_y) {
        const RunConfig cfg = parse_config(config_text);
        TrainResult r;
        {
            py::gil_scoped_release release;
            r = train(cfg.train, make_dataset(x, y), make_dataset(val_x, val_y));
        }
        py::dict history;
        history["train_loss"] = r.history.train_loss;
        history["penalty"] = r.history.penalty;
        history["val_accuracy"] = r.history.val_accuracy;
        history["wall_seconds"] = r.history.wall_seconds;
        return py::make_tuple(r.params, history);
    }, py::arg("config_text"), py::arg("x"), py::arg("y"), py::arg("val_x"), py::arg("val_y"),
       "Train from key=value config text; returns (params, history).");
    m.def("noiseless_accuracy", [](const MlpParams& p, const RowMatrix& x, const std::vector<std::uint8_t>& y) {
        return noiseless_accuracy(p, make_dataset(x, y));
    });
    m.def("evaluate_accuracy", [](const MlpParams& p, const RowMatrix& x, const std::vector<std::uint8_t>& y,
                                  const std::string& kind, double variance, int repeats, std::uint64_t seed) {
        const AccuracyStats s = evaluate_accuracy(p, make_dataset(x, y), make_noise(kind, variance), repeats, seed);
        return py::make_tuple(s.mean, s.std);
    }, py::arg("params"), py::arg("x"), py::arg("y"), py::arg("kind"), py::arg("variance"), py::arg("repeats") = 3,
       py::arg("seed") = 1);
    m.def("noise_sweep", [](const MlpParams& p, const RowMatrix& x, const std::vector<std::uint8_t>& y,
                            const std::string& kind, std::vector<double> variances, int repeats, std::uint64_t seed,
                            unsigned threads) {
        SweepResult s;
        {
            py::gil_scoped_release release;
            s = noise_sweep(p, make_dataset(x, y), parse_noise_kind(kind), variances, repeats, seed, "model", threads);
        }
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& pt : s.points) out.emplace_back(pt.variance, pt.mean_acc, pt.std_acc);
        return out;
    }, py::arg("params"), py::arg("x"), py::arg("y"), py::arg("kind"), py::arg("variances"), py::arg("repeats") = 3,
       py::arg("seed") = 1, py::arg("threads") = 1);
    m.def("default_sweep_grid", &default_sweep_grid);
    m.def("gradient_check", [](const std::vector<int>& sizes, int probes, double tol) {
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& e : gradient_check_all(sizes, probes, tol).entries) {
            out.emplace_back(std::string(to_string(e.mode)), e.max_rel_error, e.passed);
        }
        return out;
    }, py::arg("layer_sizes") = std::vector<int>{10, 8, 8, 4}, py::arg("probes") = 200, py::arg("tol") = 1e-5);

    // Checkpoints
    m.def("save_checkpoint", [](const std::filesystem::path& path, const MlpParams& p, const std::string& config_text) {
        save_checkpoint(path, p, CheckpointMeta{0, "", "", config_text});
    }, py::arg("path"), py::arg("params"), py::arg("config_text") = "");
    m.def("load_checkpoint", [](const std::filesystem::path& path) {
        Checkpoint c = load_checkpoint(path);
        return py::make_tuple(c.params, c.meta.config_text);
    });
}
