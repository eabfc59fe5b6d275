// Python bindings: FFT, SVD, models, verification, gradient checks and the
// train/eval pipeline. Arrays cross the boundary as float64 numpy arrays.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tlnet/config.hpp"
#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"
#include "tlnet/gradcheck.hpp"
#include "tlnet/linalg.hpp"
#include "tlnet/metrics.hpp"
#include "tlnet/pipeline.hpp"
#include "tlnet/trainer.hpp"
#include "tlnet/verify.hpp"
#include "tlnet/version.hpp"

namespace py = pybind11;
using namespace tlnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::array_t<std::complex<double>> spectrum_to_array(const fft::ComplexSpectrum& s) {
  py::array_t<std::complex<double>> out({py::ssize_t(s.channels), py::ssize_t(s.n_freq)});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < s.re.size(); ++i) p[i] = {s.re[i], s.im[i]};
  return out;
}

fft::ComplexSpectrum array_to_spectrum(const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("spectrum must be (channels, n_freq)");
  fft::ComplexSpectrum s(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    s.re[std::size_t(i)] = a.data()[i].real();
    s.im[std::size_t(i)] = a.data()[i].imag();
  }
  return s;
}

config::RunConfig run_config(const py::object& cfg) {
  if (py::isinstance<py::str>(cfg)) return config::run_from_json(config::Json::parse(cfg.cast<std::string>()));
  const std::string text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
  return config::run_from_json(config::Json::parse(text));
}

py::dict report_dict(const metrics::MetricsReport& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["arch"] = r.arch;
  d["input_len"] = r.input_len;
  d["pred_len"] = r.pred_len;
  d["split"] = r.split;
  d["scale"] = r.scale;
  d["n_windows"] = r.n_windows;
  d["mse"] = r.mse;
  d["mae"] = r.mae;
  d["corr"] = r.corr;
  d["excluded_channels"] = r.excluded_channels;
  d["seed"] = r.seed;
  d["config_hash"] = r.config_hash;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Transform-block forecasting networks";
  m.attr("code_version") = std::string(code_version());

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("rfft", [](const Array& x) { return spectrum_to_array(fft::rfft(to_tensor(x))); }, py::arg("x"),
        "Real FFT of each row of a (channels, n) array.");
  m.def("irfft", [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& s,
                    std::size_t n) { return to_array(fft::irfft(array_to_spectrum(s), n)); },
        py::arg("spectrum"), py::arg("n"), "Inverse of rfft for output length n.");
  m.def("svd", [](const Array& x) {
          const auto f = linalg::svd(to_tensor(x));
          return py::make_tuple(to_array(f.u), to_array(f.s), to_array(f.v));
        },
        py::arg("x"), "Thin SVD (u, s, v) of a (k, n) array with k <= n, x = u @ diag(s) @ v.");

  m.def("archs", [] {
    std::vector<std::string> names;
    for (Arch a : all_archs()) names.emplace_back(to_string(a));
    return names;
  });

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& arch, std::size_t channels, std::size_t input_len, std::size_t pred_len,
                       std::size_t layers, std::uint64_t seed) {
             ModelConfig c;
             c.arch = parse_arch(arch);
             c.channels = channels;
             c.input_len = input_len;
             c.pred_len = pred_len;
             c.layers = layers;
             c.seed = seed;
             return Model(c);
           }),
           py::arg("arch") = "ft_svd", py::arg("channels") = 7, py::arg("input_len") = 96,
           py::arg("pred_len") = 24, py::arg("layers") = 2, py::arg("seed") = 0)
      .def_property_readonly("arch", [](const Model& self) { return std::string(to_string(self.config().arch)); })
      .def("predict", [](const Model& self, const Array& x) { return to_array(self.predict(to_tensor(x))); },
           py::arg("x"), "(B, d, T) -> (B, d, tau)")
      .def("parameters", [](const Model& self) {
        py::dict d;
        for (std::size_t i = 0; i < self.params().size(); ++i) d[py::str(self.params().name(i))] = to_array(self.params()[i]);
        return d;
      })
      .def("set_parameter", [](Model& self, const std::string& name, const Array& value) {
        Tensor& p = self.params().at(name);
        Tensor v = to_tensor(value);
        if (v.shape() != p.shape()) throw DimensionError(name + ": expected shape " + shape_str(p.shape()));
        p = std::move(v);
      });

  m.def("load_model", [](const std::filesystem::path& path) {
          return restore_model(load_checkpoint(path));
        },
        py::arg("path"), "Model stored in a training checkpoint.");

  m.def("verify", [](std::size_t seeds) {
          py::list out;
          for (const auto& r : verify::run_all(seeds)) {
            py::dict d;
            d["name"] = r.name;
            d["instance"] = r.instance;
            d["max_abs_error"] = r.max_abs_error;
            d["tolerance"] = r.tolerance;
            d["pass"] = r.pass;
            d["gated"] = r.gated;
            out.append(d);
          }
          return out;
        },
        py::arg("seeds") = 5, "Identity checks; informational entries have gated=False.");

  m.def("gradcheck", [](const std::string& arch, std::uint64_t seed) {
          py::list out;
          auto add = [&](const gradcheck::Result& r) {
            py::dict d;
            d["name"] = r.name;
            d["max_rel_error"] = r.max_rel_error;
            d["checked"] = r.checked;
            d["pass"] = r.pass;
            out.append(d);
          };
          if (arch == "ops" || arch == "all")
            for (const auto& r : gradcheck::op_suite(seed)) add(r);
          if (arch == "blocks" || arch == "all")
            for (const auto& r : gradcheck::block_suite(seed)) add(r);
          if (arch == "all") {
            for (Arch a : all_archs()) add(gradcheck::model_check(a, seed));
          } else if (arch != "ops" && arch != "blocks") {
            add(gradcheck::model_check(parse_arch(arch), seed));
          }
          return out;
        },
        py::arg("arch") = "all", py::arg("seed") = 0,
        "Finite-difference gradient checks: 'ops', 'blocks', 'all' or one arch name.");

  m.def("score", [](const Array& pred, const Array& target) {
          const auto s = metrics::score(to_tensor(pred), to_tensor(target));
          py::dict d;
          d["mse"] = s.mse;
          d["mae"] = s.mae;
          d["corr"] = s.corr;
          d["excluded_channels"] = s.excluded_channels;
          return d;
        },
        py::arg("pred"), py::arg("target"));

  m.def("train", [](const py::object& cfg, const std::optional<std::filesystem::path>& checkpoint,
                    const std::function<void(py::dict)>& on_epoch) {
          const config::RunConfig r = run_config(cfg);
          TrainHooks hooks;
          if (on_epoch) {
            hooks.on_epoch = [&](const EpochRecord& e) {
              py::dict d;
              d["epoch"] = e.epoch;
              d["train_loss"] = e.train_loss;
              d["val_loss"] = e.val_loss;
              d["lr"] = e.lr;
              on_epoch(d);
            };
          }
          const pipeline::TrainRun run = pipeline::train_run(r, hooks);
          if (checkpoint) save_checkpoint(*checkpoint, run.result.best);
          py::dict d;
          d["stop_reason"] = run.result.stop_reason;
          d["best_val"] = run.result.best.best_val;
          d["epochs"] = run.result.epochs.size();
          d["step_losses"] = run.result.step_losses;
          const pipeline::EvalRun ev = pipeline::eval_run(r, run.result.best);
          d["test"] = report_dict(ev.reports[0]);
          d["naive"] = report_dict(ev.reports[1]);
          return d;
        },
        py::arg("config"), py::arg("checkpoint") = py::none(), py::arg("on_epoch") = nullptr,
        "Trains from a config (dict or JSON string) and scores the best model on the test split.");

  m.def("evaluate", [](const py::object& cfg, const std::filesystem::path& checkpoint) {
          const pipeline::EvalRun ev = pipeline::eval_run(run_config(cfg), load_checkpoint(checkpoint));
          py::dict d;
          d["val_loss"] = ev.val_loss;
          d["test"] = report_dict(ev.reports[0]);
          d["naive"] = report_dict(ev.reports[1]);
          d["pred"] = to_array(ev.forecast.pred);
          d["target"] = to_array(ev.forecast.target);
          return d;
        },
        py::arg("config"), py::arg("checkpoint"));
}
