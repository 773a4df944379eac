#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "causerl/conrt.hpp"
#include "causerl/corpus.hpp"
#include "causerl/error.hpp"
#include "causerl/harness.hpp"
#include "causerl/metrics.hpp"
#include "causerl/ops.hpp"
#include "causerl/selfrl.hpp"

namespace py = pybind11;
using namespace causerl;
using nlohmann::json;

namespace {

// Structured results cross the boundary as JSON text; the Python side parses it.
RunConfig config_from(const std::string& text) {
  return RunConfig::from_json(text.empty() ? json::object() : json::parse(text));
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      throw Error(ErrorKind::kShapeMismatch, "rows must have equal length");
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor::matrix(rows.size(), rows.front().size(), flat);
}

std::string corpus_json(const std::string& config_text) {
  const auto config = config_from(config_text);
  const auto corpus = generate_synthetic(config.synthetic);
  json out{{"external", json::array()}, {"examples", json::array()}};
  for (const auto& s : corpus.external) out["external"].push_back(statement_to_json(s));
  for (const auto& e : corpus.examples) out["examples"].push_back(example_to_json(e));
  out["folds"] = make_folds(corpus.examples, config.folds, config.synthetic.seed,
                            config.dev_topics)
                     .to_json();
  return out.dump();
}

std::string selfrl_json(const std::string& config_text) {
  const auto config = config_from(config_text);
  const auto data = prepare_dataset(config);
  SelfRLConfig sc = config.selfrl;
  sc.seed = config.seeds.front();
  const auto result = train_selfrl(data.external_tokens(), data.vocab.size(), sc);
  json steps = json::array();
  for (const auto& s : result.stats.steps) {
    steps.push_back({{"step", s.step},
                     {"loss", s.loss},
                     {"proj_std", s.proj_std},
                     {"theta_delta_dist", s.theta_delta_dist}});
  }
  return steps.dump();
}

std::string report_json(const std::string& config_text, const std::string& variant, bool ablate) {
  auto config = config_from(config_text);
  if (!variant.empty()) config.variant = variant_from_string(variant);
  config.mode = ablate ? Mode::kAblate : Mode::kEvaluate;
  const auto data = prepare_dataset(config);
  const auto report = run_configured(config, data);
  json out = report.to_json();
  out["manifest"] = make_manifest(config, data, report);
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_causerl, m) {
  m.doc() = "Causal-statement transfer for event causality identification";

  static py::exception<Error> error(m, "CauserlError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "convert_statement",
      [](const std::string& original, const std::string& resource) {
        return convert_statement(original, resource_from_string(resource));
      },
      py::arg("original"), py::arg("resource"));

  m.def(
      "normalized_mse",
      [](const std::vector<double>& y, const std::vector<double>& z) {
        return normalized_mse(Tensor::vector(y), Tensor::vector(z)).item();
      },
      py::arg("y"), py::arg("z"));

  m.def(
      "contrastive_loss",
      [](const std::vector<std::vector<double>>& positives,
         const std::vector<std::vector<double>>& all, const std::vector<double>& anchor,
         double temperature, const std::string& form) {
        const auto f = form == "infonce" ? ContrastiveForm::kInfoNce : ContrastiveForm::kLiteral;
        if (form != "infonce" && form != "literal") {
          throw Error(ErrorKind::kInvalidConfig, "form must be 'literal' or 'infonce'");
        }
        return contrastive_loss(rows_to_tensor(positives), rows_to_tensor(all),
                                Tensor::vector(anchor), temperature, f)
            .item();
      },
      py::arg("positives"), py::arg("all"), py::arg("anchor"), py::arg("temperature") = 0.1,
      py::arg("form") = "literal");

  m.def(
      "prf1",
      [](std::size_t tp, std::size_t fp, std::size_t fn) {
        const auto p = prf1(tp, fp, fn);
        return py::make_tuple(p.precision, p.recall, p.f1);
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"));

  m.def(
      "gradcheck_json",
      [](std::size_t seeds, bool mutation) { return run_gradcheck(seeds, mutation).to_json().dump(); },
      py::arg("seeds") = 20, py::arg("mutation") = false);

  m.def("default_config_json", [] { return RunConfig{}.to_json().dump(); });
  m.def("desk_config_json", [] { return desk_config().to_json().dump(); });
  m.def("synthetic_corpus_json", &corpus_json, py::arg("config"));
  m.def("train_selfrl_json", &selfrl_json, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "evaluate_json",
      [](const std::string& config, const std::string& variant) {
        return report_json(config, variant, false);
      },
      py::arg("config"), py::arg("variant") = "", py::call_guard<py::gil_scoped_release>());
  m.def(
      "ablate_json", [](const std::string& config) { return report_json(config, "", true); },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());
}
