#include "gbs/config.hpp"
#include "gbs/errors.hpp"
#include "gbs/grad_ledger.hpp"
#include "gbs/loss.hpp"
#include "gbs/rebalance.hpp"
#include "gbs/sim/harness.hpp"
#include "gbs/sim/records.hpp"
#include "gbs/split/split_builder.hpp"
#include "gbs/thresholds.hpp"
#include "gbs/weight_solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <random>

namespace py = pybind11;
using namespace gbs;

namespace {

// JSON crosses the boundary as text; the Python wrapper does the (de)coding.
std::string simulate_json(const std::string& config_text) {
  const auto cfg = harness_config_from_json(json::parse(config_text));
  sim::RunResult run;
  {
    py::gil_scoped_release release;
    run = sim::run_generations(cfg);
  }
  json out = json::array();
  for (const auto& r : run.records) out.push_back(sim::record_to_json(r, cfg.task.n_majority));
  return out.dump();
}

std::string effective_config_json(const std::string& preset_name, const std::string& patch_text) {
  json cfg = default_config();
  if (!preset_name.empty()) merge_config(cfg, preset(preset_name));
  merge_config(cfg, json::parse(patch_text));
  harness_config_from_json(cfg);  // validates
  return cfg.dump();
}

py::dict split_dataset(const std::filesystem::path& annotations, std::vector<split::CategoryId> majority,
                       std::vector<split::CategoryId> minority, double fraction, std::size_t min_instances,
                       std::uint64_t seed, bool lvis_mode, std::optional<std::filesystem::path> out_dir) {
  const auto index = split::load_annotations(annotations);
  split::SplitConfig cfg;
  cfg.majority = std::move(majority);
  cfg.minority = std::move(minority);
  cfg.fraction = fraction;
  cfg.min_instances = min_instances;
  cfg.seed = seed;
  cfg.lvis_mode = lvis_mode;
  cfg.validate(index);
  const auto s = split::build_splits(index, cfg);
  if (out_dir) split::write_splits(index, s, cfg, *out_dir);
  py::dict d;
  d["labeled"] = s.labeled;
  d["unlabeled"] = s.unlabeled;
  d["majority_pick"] = s.majority_pick;
  d["minority_pick"] = s.minority_pick;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gradient-based class weighting, thresholds and rebalancing sampler";
  m.attr("__version__") = GBS_VERSION;

  static py::exception<SolverError> solver_error(m, "SolverError", PyExc_ArithmeticError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SolverError& e) {
      PyErr_SetString(py::handle(solver_error).ptr(), e.what());
    } catch (const NumericError& e) {
      PyErr_SetString(py::handle(numeric_error).ptr(), e.what());
    } catch (const ParseError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "loss_and_grad",
      [](const Vector& logits, int label, const std::string& kind, double gamma) {
        LossSpec spec{parse_loss_kind(kind), gamma};
        auto r = loss_and_grad(logits, label, spec);
        return py::make_tuple(r.loss, r.grad);
      },
      py::arg("logits"), py::arg("label"), py::arg("kind") = "softmax-focal", py::arg("gamma") = 2.0,
      "Loss over n+1 logits (background last) and its gradient.");

  py::class_<GradientLedger>(m, "GradientLedger")
      .def(py::init<std::size_t, double>(), py::arg("num_classes"), py::arg("eta_g") = 0.9995)
      .def("add", &GradientLedger::add, py::arg("label"), py::arg("grad"))
      .def(
          "accumulate",
          [](GradientLedger& l, const std::vector<ClassIndex>& labels, const Matrix& grads) {
            l.accumulate(labels, grads);
          },
          py::arg("labels"), py::arg("grads"))
      .def("ema_update", &GradientLedger::ema_update)
      .def("set_ema", &GradientLedger::set_ema)
      .def("reset", &GradientLedger::reset)
      .def_property_readonly("raw", &GradientLedger::raw)
      .def_property_readonly("ema", &GradientLedger::ema)
      .def_property_readonly("num_classes", &GradientLedger::num_classes);

  m.def("weights_from_logits", &weights_from_logits, py::arg("a"));
  m.def(
      "jacobi_target",
      [](const Matrix& ema, const Vector& w, double diag_floor) {
        SolverOptions o;
        o.diag_floor = diag_floor;
        auto t = jacobi_target(ema, w, o);
        return py::make_tuple(t.w_hat, t.unclamped);
      },
      py::arg("ema"), py::arg("w"), py::arg("diag_floor") = 1e-8, "Returns (clamped, unclamped) targets.");
  m.def("solve_direct", &solve_direct, py::arg("ema"));
  m.def("balance_residuals", &balance_residuals, py::arg("ema"), py::arg("w"));
  m.def(
      "solve_iterative",
      [](const Matrix& ema, std::size_t max_steps, double lr_align, double beta, double tol) {
        SolverOptions o;
        o.lr_align = lr_align;
        o.beta = beta;
        const auto s = solve_iterative(ema, max_steps, o, tol);
        py::dict d;
        d["w"] = s.weights.w;
        d["w_labeled"] = s.weights.w_labeled;
        d["a"] = s.weights.a;
        d["steps"] = s.steps;
        d["converged"] = s.converged;
        d["cold_start"] = s.cold_start;
        return d;
      },
      py::arg("ema"), py::arg("max_steps") = 10000, py::arg("lr_align") = 0.01, py::arg("beta") = 0.5,
      py::arg("tol") = 0.0);

  m.def("gbt_thresholds", &gbt_thresholds, py::arg("foreground_weights"), py::arg("theta_base") = 0.9,
        py::arg("theta_min") = 0.05);
  m.def("epsilon_schedule", &epsilon_schedule, py::arg("gamma"), py::arg("generation"), py::arg("total_generations"));
  m.def(
      "class_repeat_rates",
      [](const std::vector<std::size_t>& counts, double epsilon, std::size_t n_total, double s_cap) {
        return class_repeat_rates(counts, epsilon, n_total, s_cap);
      },
      py::arg("image_counts"), py::arg("epsilon"), py::arg("n_total"), py::arg("s_cap") = 20.0);
  m.def(
      "realize_repeats",
      [](double rate, std::size_t draws, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> out(draws);
        for (auto& r : out) r = realize_repeats(rate, rng);
        return out;
      },
      py::arg("rate"), py::arg("draws"), py::arg("seed") = 0, "Repeat counts for `draws` independent images.");

  m.def("_simulate_json", &simulate_json, py::arg("config"));
  m.def("_effective_config_json", &effective_config_json, py::arg("preset"), py::arg("patch"));
  m.def("_default_config_json", [] { return default_config().dump(); });
  m.def("_config_schema_json", [] { return config_schema().dump(); });
  m.def("preset_names", &preset_names);
  m.def("split_dataset", &split_dataset, py::arg("annotations"), py::arg("majority"), py::arg("minority"),
        py::arg("fraction") = 0.10, py::arg("min_instances") = 10, py::arg("seed") = 0, py::arg("lvis_mode") = false,
        py::arg("out_dir") = std::nullopt);
  m.def(
      "render_report",
      [](const std::filesystem::path& metrics, const std::filesystem::path& out_dir) {
        std::ifstream in(metrics);
        if (!in) throw InputError("cannot open " + metrics.string());
        sim::render_report(in, out_dir);
      },
      py::arg("metrics"), py::arg("out_dir"));
}
