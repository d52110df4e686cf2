#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tabssl/harness.hpp"

namespace py = pybind11;
using namespace tabssl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    const auto info = a.request();
    Shape shape(info.shape.begin(), info.shape.end());
    const auto* data = static_cast<const double*>(info.ptr);
    return Tensor(shape, std::vector<double>(data, data + shape_numel(shape)));
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

py::dict metrics_dict(const MetricsReport& m) {
    py::dict d;
    d["accuracy"] = m.accuracy;
    d["f1"] = m.macro_f1;
    d["recall"] = m.macro_recall;
    d["precision"] = m.macro_precision;
    d["classes"] = m.classes;
    d["confusion"] = m.confusion;
    return d;
}

py::list curve_list(const LossCurve& curve) {
    py::list out;
    for (const auto& e : curve.entries) {
        py::dict d;
        d["step"] = e.step;
        d["train_loss"] = e.train_loss;
        d["val_loss"] = e.val_loss;
        d["nce"] = e.nce;
        d["recon_nll"] = e.recon_nll;
        d["kl"] = e.kl;
        out.append(d);
    }
    return out;
}

SweepOptions sweep_options(const std::vector<std::uint64_t>& seeds, std::size_t jobs, const std::optional<std::string>& out) {
    SweepOptions o;
    o.seeds = seeds;
    o.jobs = jobs;
    if (out) o.out_dir = *out;
    return o;
}

}  // namespace

PYBIND11_MODULE(_tabssl, m) {
    m.doc() = "Contrastive plus variational self-supervised learning for tabular data";

    // Leaked on purpose: the type must outlive interpreter teardown.
    static py::handle error = py::exception<Error>(m, "Error").release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = error(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    // losses
    m.def("cosine_similarity", [](std::vector<double> a, std::vector<double> b) { return cosine_similarity(a, b); });
    m.def("info_nce", [](const Array& v1, const Array& v2, double tau) { return info_nce(to_tensor(v1), to_tensor(v2), tau).item(); },
          py::arg("view1"), py::arg("view2"), py::arg("tau") = 0.5);
    m.def("info_nce_from_similarities", [](const Array& s, double tau) { return info_nce_from_similarities(to_tensor(s), tau).item(); },
          py::arg("similarities"), py::arg("tau") = 0.5);
    m.def("gaussian_kl", [](const Array& mu, const Array& lv) { return gaussian_kl(to_tensor(mu), to_tensor(lv)).item(); });
    m.def("recon_nll", [](const Array& x, const Array& xh) { return recon_nll(to_tensor(x), to_tensor(xh)).item(); });
    m.def("elbo_loss", [](const Array& x, const Array& xh, const Array& mu, const Array& lv) {
        return elbo_loss(to_tensor(x), to_tensor(xh), to_tensor(mu), to_tensor(lv)).item();
    });
    m.def("log_sum_exp", [](const Array& x, std::size_t axis) { return to_array(log_sum_exp(to_tensor(x), axis)); });

    m.def("gradcheck", [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : run_gradcheck_suite(seed)) out.append(py::make_tuple(r.name, r.max_rel_error, r.passed));
        return out;
    }, py::arg("seed") = 0);

    // data
    m.def("make_blobs", [](std::size_t rows, std::size_t features, std::size_t classes, std::uint64_t seed) {
        const DataTable t = make_blobs({rows, features, classes, 10.0, 1.0}, seed);
        Array x({static_cast<py::ssize_t>(t.n_rows), static_cast<py::ssize_t>(t.columns.size())});
        auto w = x.mutable_unchecked<2>();
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            for (std::size_t r = 0; r < t.n_rows; ++r) w(r, c) = *t.columns[c].numbers[r];
        return py::make_tuple(x, encode_labels(t.labels).codes);
    }, py::arg("rows") = 600, py::arg("features") = 16, py::arg("classes") = 3, py::arg("seed") = 0);
    m.def("split_indices", [](std::size_t n, double fraction, std::uint64_t seed) {
        const SplitIndices s = split_indices(n, fraction, seed);
        return py::make_tuple(s.train, s.test);
    });
    m.def("kfold", [](std::size_t n, std::size_t k, std::uint64_t seed) {
        py::list out;
        for (const Fold& f : kfold(n, k, seed)) out.append(py::make_tuple(f.train, f.val));
        return out;
    });
    m.def("smote", [](const Array& x, const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
        const SmoteResult r = smote(to_tensor(x), labels, k, seed);
        return py::make_tuple(to_array(r.features), r.labels);
    }, py::arg("features"), py::arg("labels"), py::arg("k_neighbors") = 5, py::arg("seed") = 0);

    // config
    py::class_<ExperimentConfig>(m, "Config")
        .def(py::init<>())
        .def_static("parse", &parse_config)
        .def_static("load", [](const std::string& path) { return load_config(path); })
        .def("set", [](ExperimentConfig& c, const std::string& key, const std::string& value) { set_config_value(c, key, value); })
        .def("to_text", &to_text)
        .def("fingerprint", [](const ExperimentConfig& c) { return fingerprint(c); })
        .def_property("seed", [](const ExperimentConfig& c) { return c.seed; }, [](ExperimentConfig& c, std::uint64_t s) { c.seed = s; })
        .def("__repr__", [](const ExperimentConfig& c) { return "<Config " + fingerprint(c) + ">"; });

    // models and training
    py::class_<ModelBundle>(m, "Model")
        .def_static("init", [](std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t latent, std::size_t projection,
                               std::uint64_t seed) { return init_model({input_dim, std::move(hidden), latent, projection}, seed); },
                    py::arg("input_dim"), py::arg("hidden_dims") = std::vector<std::size_t>{128, 64}, py::arg("latent_dim") = 16,
                    py::arg("projection_dim") = 32, py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
        .def("save", [](const ModelBundle& b, const std::string& path) { save_checkpoint(b, path); })
        .def("features", [](const ModelBundle& b, const Array& x) { return to_array(extract_features(b, to_tensor(x))); })
        .def("parameter_names", [](const ModelBundle& b) {
            std::vector<std::string> names;
            for (const auto& [name, t] : b.named_parameters()) names.push_back(name);
            return names;
        });

    m.def("pretrain", [](const ExperimentConfig& c, const Array& train, const Array& val) {
        PretrainResult r;
        {
            py::gil_scoped_release release;
            r = pretrain(c, to_tensor(train), to_tensor(val));
        }
        return py::make_tuple(r.model, curve_list(r.curve));
    });
    m.def("evaluate", [](const std::vector<int>& pred, const std::vector<int>& labels) { return metrics_dict(evaluate(pred, labels)); });
    m.def("run_pipeline", [](const ExperimentConfig& c, bool untrained) {
        RunResult r;
        {
            py::gil_scoped_release release;
            r = run_pipeline(c, untrained ? EncoderMode::Untrained : EncoderMode::Pretrained);
        }
        py::dict d = metrics_dict(r.metrics);
        d["curve"] = curve_list(r.curve);
        d["fingerprint"] = r.fingerprint;
        return d;
    }, py::arg("config"), py::arg("untrained") = false);

    // sweeps
    m.def("run_sweep", [](const ExperimentConfig& c, const std::string& axis, std::vector<std::string> values,
                          std::vector<std::uint64_t> seeds, std::size_t jobs, std::optional<std::string> out) {
        SweepResult r;
        {
            py::gil_scoped_release release;
            r = run_sweep(c, parse_axis(axis), values, sweep_options(seeds, jobs, out));
            if (out) emit_table(r, *out);
        }
        return table_csv(r);
    }, py::arg("config"), py::arg("axis"), py::arg("values") = std::vector<std::string>{},
          py::arg("seeds") = std::vector<std::uint64_t>{0}, py::arg("jobs") = 1, py::arg("out") = std::nullopt);
    m.def("run_ablation", [](const ExperimentConfig& c, std::vector<std::uint64_t> seeds, std::size_t jobs, std::optional<std::string> out) {
        SweepResult r;
        {
            py::gil_scoped_release release;
            r = run_ablation(c, sweep_options(seeds, jobs, out));
            if (out) emit_table(r, *out);
        }
        return table_csv(r);
    }, py::arg("config"), py::arg("seeds") = std::vector<std::uint64_t>{0}, py::arg("jobs") = 1, py::arg("out") = std::nullopt);
}
