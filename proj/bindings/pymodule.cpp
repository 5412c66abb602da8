#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "adaloc/adaptation.hpp"
#include "adaloc/bounds.hpp"
#include "adaloc/data.hpp"
#include "adaloc/keying.hpp"
#include "adaloc/locking.hpp"
#include "adaloc/model_io.hpp"
#include "adaloc/pipeline.hpp"

namespace py = pybind11;
using namespace adaloc;

namespace {

NetworkSpec spec_from_json_str(const std::string& text) {
    return NetworkSpec::from_json(nlohmann::json::parse(text));
}

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    std::vector<size_t> shape(arr.ndim());
    for (ssize_t i = 0; i < arr.ndim(); ++i) shape[size_t(i)] = size_t(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> out(shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

Dataset dataset_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& X,
    const std::vector<size_t>& labels, size_t class_count) {
    if (X.ndim() != 2) throw DimensionError("dataset X must be 2-D [n, dim]");
    const size_t n = size_t(X.shape(0)), dim = size_t(X.shape(1));
    if (labels.size() != n) throw DimensionError("one label per row");
    Dataset ds;
    ds.class_count = class_count;
    ds.split = "python";
    ds.samples.reserve(n);
    for (size_t r = 0; r < n; ++r) {
        Tensor x({dim});
        std::copy(X.data() + r * dim, X.data() + (r + 1) * dim, x.data.begin());
        ds.samples.push_back({std::move(x), labels[r]});
    }
    return ds;
}

TrainConfig train_config_from_kwargs(double eta, size_t epochs, size_t batch_size, uint64_t seed,
                                     const std::string& strategy, double momentum) {
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.strategy = train_strategy_from_name(strategy);
    cfg.momentum = momentum;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_adaloc, m) {
    m.doc() = "Key-based model usage control: locking, key-only adaptation, bounds";

    py::register_exception<ValidationError>(m, "ValidationError");
    py::register_exception<IoError>(m, "IoError");

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def_static("from_json", &spec_from_json_str, py::arg("json_text"))
        .def("to_json", [](const NetworkSpec& s) { return s.to_json().dump(); })
        .def_property_readonly("param_count", &NetworkSpec::param_count);

    py::class_<ParameterStore>(m, "ParameterStore")
        .def_property_readonly("dim", &ParameterStore::dim)
        .def_property_readonly("tag", [](const ParameterStore& s) { return tag_name(s.tag); })
        .def("flatten",
             [](const ParameterStore& s) {
                 const std::vector<double> flat = s.flatten();
                 py::array_t<double> out(ssize_t(flat.size()));
                 std::copy(flat.begin(), flat.end(), out.mutable_data());
                 return out;
             })
        .def("forward", [](const ParameterStore& s, const py::array_t<double>& x) {
            return array_from_tensor(forward(s, tensor_from_array(x)));
        });

    py::class_<Key>(m, "Key")
        .def_property_readonly("entry_count", [](const Key& k) { return k.entries.size(); })
        .def_property_readonly("indices", &Key::indices)
        .def("encode", &key_encode)
        .def_static("decode", &key_decode);

    py::class_<LockedModel>(m, "LockedModel")
        .def_property_readonly("params", [](const LockedModel& l) { return l.params; })
        .def_property_readonly("fingerprint", [](const LockedModel& l) {
            return hash_to_hex(l.fingerprint);
        });

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("accuracy", &EvalReport::accuracy)
        .def_readonly("metric_m", &EvalReport::metric_m)
        .def_readonly("per_class_accuracy", &EvalReport::per_class_accuracy)
        .def_readonly("sample_count", &EvalReport::sample_count);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("size", &Dataset::size)
        .def_property_readonly("class_count", [](const Dataset& d) { return d.class_count; })
        .def_static("from_arrays", &dataset_from_arrays, py::arg("X"), py::arg("labels"),
                    py::arg("class_count"));

    m.def("init_network", &init_network, py::arg("spec"), py::arg("seed"));
    m.def("gen_blobs",
          [](size_t classes, size_t dim, size_t per_class, double spread, uint64_t seed,
             const std::string& split) {
              BlobsConfig cfg;
              cfg.class_count = classes;
              cfg.dim = dim;
              cfg.per_class = per_class;
              cfg.spread = spread;
              cfg.seed = seed;
              cfg.split = split;
              return gen_blobs(cfg);
          },
          py::arg("classes"), py::arg("dim"), py::arg("per_class"), py::arg("spread"),
          py::arg("seed"), py::arg("split") = "train");
    m.def("evaluate", &evaluate, py::arg("params"), py::arg("dataset"));

    m.def("localize_key",
          [](const ParameterStore& params, double rho) {
              KeySpec ks;
              ks.rho = rho;
              return localize_key(params, ks);
          },
          py::arg("params"), py::arg("rho") = 0.05);
    m.def("sample_key_pool",
          [](const ParameterStore& params, double rho, double pool_fraction, uint64_t seed) {
              KeySpec ks;
              ks.rho = rho;
              ks.pool_fraction = pool_fraction;
              ks.strategy = KeyStrategy::PoolSample;
              ks.seed = seed;
              return sample_key_pool(params, ks);
          },
          py::arg("params"), py::arg("rho"), py::arg("pool_fraction"), py::arg("seed"));
    m.def("baseline_key",
          [](const ParameterStore& params, double rho, const std::string& strategy, uint64_t seed) {
              KeySpec ks;
              ks.rho = rho;
              ks.strategy = strategy_from_name(strategy);
              ks.seed = seed;
              return baseline_key(params, ks);
          },
          py::arg("params"), py::arg("rho"), py::arg("strategy"), py::arg("seed") = 0);

    m.def("lock", &lock, py::arg("params"), py::arg("key"));
    m.def("unlock", &unlock, py::arg("locked"), py::arg("key"));
    m.def("reference_model", &reference_model, py::arg("params"));
    m.def("refresh_key", &refresh_key, py::arg("adapted"), py::arg("old_key"));

    m.def("finetune",
          [](const ParameterStore& params, const Dataset& train, double eta, size_t epochs,
             size_t batch_size, uint64_t seed, const std::string& strategy, double momentum,
             const Key* key) {
              const TrainConfig cfg =
                  train_config_from_kwargs(eta, epochs, batch_size, seed, strategy, momentum);
              FinetuneResult r = finetune(params, train, nullptr, cfg, key);
              py::list metrics;
              for (const EpochMetric& em : r.metrics) {
                  metrics.append(py::make_tuple(em.epoch, em.split, em.loss, em.accuracy));
              }
              return py::make_tuple(r.params, metrics);
          },
          py::arg("params"), py::arg("train"), py::arg("eta") = 0.1, py::arg("epochs") = 10,
          py::arg("batch_size") = 32, py::arg("seed") = 0, py::arg("strategy") = "full",
          py::arg("momentum") = 0.0, py::arg("key") = nullptr);

    m.def("param_distance", &param_distance, py::arg("a"), py::arg("b"),
          py::arg("exclude") = std::vector<size_t>{});

    m.def("variance_bound",
          [](size_t depth, size_t width, double lipschitz, const std::vector<double>& weight_var,
             const std::vector<double>& bias_var, double x_norm) {
              VarianceProfile p;
              p.depth = depth;
              p.width = width;
              p.lipschitz = lipschitz;
              p.weight_var = weight_var;
              p.bias_var = bias_var;
              return variance_bound(p, x_norm);
          },
          py::arg("depth"), py::arg("width"), py::arg("lipschitz"), py::arg("weight_var"),
          py::arg("bias_var"), py::arg("x_norm"));

    m.def("distance_threshold",
          [](size_t depth, double b_sigma, double b_theta, double b_x, double t, double epsilon) {
              BoundConstants c;
              c.depth = depth;
              c.b_sigma = b_sigma;
              c.b_theta = b_theta;
              c.b_x = b_x;
              c.t = t;
              c.epsilon = epsilon;
              const DistanceThreshold dt = distance_threshold(c);
              return py::make_tuple(dt.threshold, dt.success_probability, dt.success_probability_std,
                                    dt.vacuous);
          },
          py::arg("depth"), py::arg("b_sigma") = 1.0, py::arg("b_theta") = 1.0,
          py::arg("b_x") = 1.0, py::arg("t") = 2.0, py::arg("epsilon") = 1.0);

    m.def("spectral_norm",
          [](const py::array_t<double>& matrix, size_t iterations) {
              return spectral_norm(tensor_from_array(matrix), iterations);
          },
          py::arg("matrix"), py::arg("iterations") = 10000);

    m.def("read_model", [](const std::string& path) { return read_model(path).store; },
          py::arg("path"));
    m.def("write_model",
          [](const std::string& path, const ParameterStore& store) { write_model(path, store); },
          py::arg("path"), py::arg("store"));
    m.def("read_key", &read_key, py::arg("path"));
    m.def("write_key", &write_key, py::arg("path"), py::arg("key"));

    m.def("run_pipeline",
          [](const std::string& manifest_path) {
              const Manifest manifest = read_manifest(manifest_path);
              return run_pipeline(manifest).report.dump();
          },
          py::arg("manifest_path"));
}
