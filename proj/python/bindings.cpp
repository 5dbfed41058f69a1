#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "flexens/calibration.hpp"
#include "flexens/cascade.hpp"
#include "flexens/dataset.hpp"
#include "flexens/ensemble_core.hpp"
#include "flexens/error.hpp"
#include "flexens/metrics.hpp"
#include "flexens/synthgen.hpp"

namespace py = pybind11;
using namespace flexens;

namespace {

ThresholdSchedule to_schedule(const std::vector<double>& thresholds) { return {thresholds}; }

EnsembleDataset dataset_from_arrays(py::array_t<float, py::array::c_style | py::array::forcecast> logits,
                                    py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast> labels,
                                    std::vector<double> costs) {
  if (logits.ndim() != 3) throw Error(ErrorKind::DimensionMismatch, "logits must have shape (N, M, C)");
  if (labels.ndim() != 1) throw Error(ErrorKind::DimensionMismatch, "labels must be 1-D");
  const auto n = static_cast<std::size_t>(logits.shape(0));
  const auto m = static_cast<std::size_t>(logits.shape(1));
  const auto c = static_cast<std::size_t>(logits.shape(2));
  std::vector<float> flat(logits.data(), logits.data() + logits.size());
  std::vector<std::uint32_t> y(labels.data(), labels.data() + labels.size());
  return EnsembleDataset(n, m, c, std::move(flat), std::move(y), std::move(costs));
}

py::array_t<float> logits_array(const EnsembleDataset& d) {
  py::array_t<float> out({d.num_models(), d.num_samples(), d.num_classes()});
  std::memcpy(out.mutable_data(), d.all_logits().data(), d.all_logits().size() * sizeof(float));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Flexible (early-exit) ensemble classification";

  static py::exception<Error> error_type(m, "FlexensError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type.ptr())(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<EnsembleDataset>(m, "EnsembleDataset")
      .def(py::init(&dataset_from_arrays), py::arg("logits"), py::arg("labels"), py::arg("costs_ms"))
      .def_property_readonly("num_models", &EnsembleDataset::num_models)
      .def_property_readonly("num_samples", &EnsembleDataset::num_samples)
      .def_property_readonly("num_classes", &EnsembleDataset::num_classes)
      .def_property_readonly("logits", &logits_array)
      .def_property_readonly("labels", [](const EnsembleDataset& d) {
        return py::array_t<std::uint32_t>(d.labels().size(), d.labels().data());
      })
      .def_property_readonly("costs_ms", [](const EnsembleDataset& d) {
        return std::vector<double>(d.costs_ms().begin(), d.costs_ms().end());
      })
      .def("head", &EnsembleDataset::head)
      .def("fingerprint", &EnsembleDataset::fingerprint)
      .def("__eq__", [](const EnsembleDataset& a, const EnsembleDataset& b) { return a == b; });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("num_models", &SynthConfig::num_models)
      .def_readwrite("num_samples", &SynthConfig::num_samples)
      .def_readwrite("num_classes", &SynthConfig::num_classes)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("signal_scale", &SynthConfig::signal_scale)
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("cost_per_model", &SynthConfig::cost_per_model);

  m.def("generate", &generate, py::arg("config"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", [](const EnsembleDataset& d, const std::filesystem::path& dir) {
    save_dataset(d, dir);
  }, py::arg("dataset"), py::arg("dir"));
  m.def("import_csv", [](const std::vector<std::filesystem::path>& logits,
                         const std::filesystem::path& labels, std::vector<double> costs) {
    return import_csv(logits, labels, std::move(costs));
  }, py::arg("logits_csvs"), py::arg("labels_csv"), py::arg("costs_ms"));

  m.def("softmax", [](const std::vector<double>& z) { return softmax(z).values; }, py::arg("z"));
  m.def("average_logits", [](const std::vector<std::vector<double>>& v) {
    return average_logits(v).values;
  }, py::arg("vectors"));
  m.def("predict", [](const std::vector<double>& p) { return predict(p); }, py::arg("p"));
  m.def("score_margin", [](const std::vector<double>& p) { return score_margin(p); }, py::arg("p"));

  py::class_<CascadeTrace>(m, "CascadeTrace")
      .def_readonly("models_used", &CascadeTrace::models_used)
      .def_readonly("margins", &CascadeTrace::margins)
      .def_readonly("prediction", &CascadeTrace::prediction)
      .def_readonly("cost_ms", &CascadeTrace::cost_ms);

  m.def("run_sample", [](const std::vector<std::vector<double>>& logits,
                         const std::vector<double>& thresholds, const std::vector<double>& costs) {
    return run_sample(logits, to_schedule(thresholds), costs);
  }, py::arg("logits_per_model"), py::arg("thresholds"), py::arg("costs_ms"));
  m.def("run_dataset", [](const EnsembleDataset& d, const std::vector<double>& thresholds) {
    return run_dataset(d, to_schedule(thresholds));
  }, py::arg("dataset"), py::arg("thresholds"));

  py::class_<EvaluationReport>(m, "EvaluationReport")
      .def_readonly("accuracy", &EvaluationReport::accuracy)
      .def_readonly("avg_cost_ms", &EvaluationReport::avg_cost_ms)
      .def_readonly("avg_models", &EvaluationReport::avg_models)
      .def_readonly("R", &EvaluationReport::R)
      .def_readonly("E", &EvaluationReport::E)
      .def_readonly("per_stage_exit_counts", &EvaluationReport::per_stage_exit_counts);
  m.def("report", [](const EnsembleDataset& d, const std::vector<CascadeTrace>& traces) {
    return report(d, traces);
  }, py::arg("dataset"), py::arg("traces"));

  py::class_<CalibrationObjective>(m, "CalibrationObjective")
      .def_readonly("alpha", &CalibrationObjective::alpha)
      .def_readonly("R", &CalibrationObjective::R)
      .def_readonly("E", &CalibrationObjective::E)
      .def_readonly("M", &CalibrationObjective::M);
  m.def("evaluate_objective", [](const EnsembleDataset& d, const std::vector<double>& thresholds,
                                 double alpha) {
    return evaluate_objective(d, to_schedule(thresholds), alpha);
  }, py::arg("dataset"), py::arg("thresholds"), py::arg("alpha") = kDefaultAlpha);
  m.def("calibrate", [](const EnsembleDataset& d, double alpha, double step) {
    return calibrate(d, alpha, GridSpec(step)).thresholds;
  }, py::arg("dataset"), py::arg("alpha") = kDefaultAlpha, py::arg("grid_step") = kDefaultGridStep);

  py::class_<MarginHistogram>(m, "MarginHistogram")
      .def_readonly("bin_edges", &MarginHistogram::bin_edges)
      .def_readonly("correct_counts", &MarginHistogram::correct_counts)
      .def_readonly("wrong_counts", &MarginHistogram::wrong_counts)
      .def_readonly("mean_margin_correct", &MarginHistogram::mean_margin_correct)
      .def_readonly("mean_margin_wrong", &MarginHistogram::mean_margin_wrong);
  m.def("margin_histogram", &margin_histogram, py::arg("dataset"), py::arg("ensemble_size"),
        py::arg("bins") = kDefaultHistogramBins);

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("config", &SweepRow::config)
      .def_readonly("accuracy", &SweepRow::accuracy)
      .def_readonly("avg_cost_ms", &SweepRow::avg_cost_ms)
      .def_readonly("R", &SweepRow::R)
      .def_readonly("E", &SweepRow::E)
      .def_readonly("avg_models", &SweepRow::avg_models);
  m.def("ensemble_size_sweep", &ensemble_size_sweep, py::arg("dataset"));
}
