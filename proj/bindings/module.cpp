#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fairreg/common.hpp"
#include "fairreg/config.hpp"
#include "fairreg/model.hpp"
#include "fairreg/regularization.hpp"
#include "fairreg/report_io.hpp"
#include "fairreg/synthgen.hpp"
#include "fairreg/trainer.hpp"

namespace py = pybind11;
using namespace fairreg;

namespace {

TrainConfig train_config_for(const std::string& config_text, const Dataset& train_set) {
  TrainConfig cfg = parse_train_config(parse_config_text(config_text));
  if (cfg.arch.input_dim == 0) cfg.arch.input_dim = train_set.dim;
  cfg.validate();
  return cfg;
}

py::tuple train_py(const std::string& config_text, const Dataset& train_set,
                   const Dataset& eval_set) {
  const TrainConfig cfg = train_config_for(config_text, train_set);
  ExperimentResult res;
  {
    py::gil_scoped_release release;
    res = run_experiment(cfg, train_set, eval_set);
  }
  return py::make_tuple(report_to_json(res.aggregate), params_to_json(res.runs.front().params));
}

std::string evaluate_py(const std::string& params_json, const Dataset& eval_set,
                        const std::string& settings_text) {
  const TrainConfig cfg = parse_train_config(parse_config_text(settings_text));
  const ModelParams params = params_from_json(params_json);
  MetricsReport report;
  {
    py::gil_scoped_release release;
    report = evaluate(params, eval_set, cfg.tau, cfg.rating_bin_spec(),
                      cfg.calibration_bin_spec(), cfg.priors, cfg.min_cell);
  }
  return report_to_json(report);
}

std::string study_py(const std::string& protocol_text, const Dataset& train_set,
                     const Dataset& eval_set) {
  std::vector<StudyEntry> protocol = parse_protocol(parse_config_text(protocol_text));
  for (StudyEntry& entry : protocol) {
    if (entry.config.arch.input_dim == 0) entry.config.arch.input_dim = train_set.dim;
  }
  StudyResult result;
  {
    py::gil_scoped_release release;
    result = study(protocol, train_set, eval_set);
  }
  return study_to_json(result);
}

std::string render_py(const std::string& text) {
  try {
    return render_report(report_from_json(text));
  } catch (const ParseError&) {
    return render_study(study_from_json(text));
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "group fairness measurement and training-time mitigation";

  py::register_exception<Error>(m, "FairregError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("dim", [](const Dataset& ds) { return ds.dim; })
      .def_property_readonly("group_names",
                             [](const Dataset& ds) { return ds.group_names; })
      .def_property_readonly("rater_count",
                             [](const Dataset& ds) { return ds.rater_count; })
      .def("__len__", [](const Dataset& ds) { return ds.size(); })
      .def("label", [](const Dataset& ds, std::size_t i) { return ds.examples.at(i).label; })
      .def("features",
           [](const Dataset& ds, std::size_t i) { return ds.examples.at(i).features; })
      .def("groups", [](const Dataset& ds, std::size_t i) { return ds.examples.at(i).groups; })
      .def_static(
          "load",
          [](const std::string& path) {
            const FileFormat f =
                path.ends_with(".json") ? FileFormat::Json : FileFormat::Csv;
            return load_dataset(path, f);
          },
          py::arg("path"), "Load a dataset; .json means the JSON schema, anything else CSV.")
      .def(
          "save",
          [](const Dataset& ds, const std::string& path) {
            const FileFormat f =
                path.ends_with(".json") ? FileFormat::Json : FileFormat::Csv;
            save_dataset(ds, path, f);
          },
          py::arg("path"));

  m.def(
      "generate",
      [](const std::string& config_text) {
        const GenConfig cfg = parse_gen_config(parse_config_text(config_text));
        py::gil_scoped_release release;
        return generate(cfg);
      },
      py::arg("config"), "Sample a synthetic dataset from flat key=value config text.");

  m.def(
      "describe",
      [](const Dataset& ds, double tau, int bins) {
        return render_summary(describe(ds, tau, BinSpec{bins, 0.0, tau}));
      },
      py::arg("dataset"), py::arg("tau") = 0.5, py::arg("bins") = 4,
      "Per-group distribution tables, rendered.");

  m.def("train", &train_py, py::arg("config"), py::arg("train_set"), py::arg("eval_set"),
        "Run the configured experiment; returns (report_json, params_json).");

  m.def("evaluate", &evaluate_py, py::arg("params_json"), py::arg("eval_set"),
        py::arg("settings") = std::string(),
        "Evaluate saved parameters; settings is trainer-schema config text.");

  m.def("study", &study_py, py::arg("protocol"), py::arg("train_set"), py::arg("eval_set"),
        "Run a multi-config comparison; returns study JSON.");

  m.def("render", &render_py, py::arg("json_text"),
        "Render report or study JSON into the terminal format.");

  m.def(
      "pearson",
      [](const std::vector<double>& preds, const std::vector<int>& flags) {
        return pearson_corr(preds, flags).corr;
      },
      py::arg("predictions"), py::arg("flags"),
      "Pearson correlation between predictions and binary membership flags.");
}
