#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bdconv/diagnostics.hpp"
#include "bdconv/error.hpp"
#include "bdconv/harness.hpp"
#include "bdconv/subspace.hpp"

namespace py = pybind11;
using namespace bdconv;

namespace {

py::dict chain_dict(const ChainSummary& c) {
  py::dict d;
  d["seed"] = c.seed;
  d["ok"] = c.ok;
  d["failed_step"] = c.failed_step;
  d["x_mean"] = c.x_mean;
  d["h_estimate"] = c.h_estimate;
  d["gamma_mean"] = c.gamma_mean;
  d["sigma_v_sq_mean"] = c.sigma_v_sq_mean;
  d["nmse_x"] = c.nmse.x;
  d["nmse_h"] = c.nmse.h;
  d["mean_iteration_seconds"] = c.mean_iteration_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_bdconv, m) {
  m.doc() = "Bayesian sparse blind deconvolution samplers";
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);
  py::register_exception<DiagnosticUndefined>(m, "DiagnosticUndefined", PyExc_ArithmeticError);
  py::register_exception<StepFailure>(m, "StepFailure", PyExc_RuntimeError);

  m.def("canonical_spec", [](const std::string& text) { return spec_to_json(spec_from_json(text)); },
        py::arg("spec_json"));
  m.def("spec_hash", [](const std::string& text) { return spec_hash(spec_from_json(text)); }, py::arg("spec_json"));

  m.def(
      "simulate",
      [](const std::string& text) {
        const ExperimentData d = make_experiment_data(spec_from_json(text));
        py::dict out;
        out["x"] = d.x;
        out["h"] = d.h;
        out["y"] = d.measurement.y;
        out["sigma_v_sq"] = d.sigma_v_sq;
        return out;
      },
      py::arg("spec_json"));

  m.def(
      "run",
      [](const std::string& text, int jobs) {
        const ExperimentSpec spec = spec_from_json(text);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(spec, jobs);
        }
        py::dict out;
        out["record_json"] = record_to_json(r.record);
        out["ok"] = r.record.ok;
        out["nmse_x"] = r.record.nmse.x;
        out["nmse_h"] = r.record.nmse.h;
        py::list chains;
        for (const ChainSummary& c : r.record.chains) chains.append(chain_dict(c));
        out["chains"] = chains;
        py::list mp;
        for (const MpsrfRecord& p : r.record.mpsrf) mp.append(py::make_tuple(p.iter, p.target, p.rhat));
        out["mpsrf"] = mp;
        out["x_true"] = r.data.x;
        out["h_true"] = r.data.h;
        out["y"] = r.data.measurement.y;
        return out;
      },
      py::arg("spec_json"), py::arg("jobs") = 1);

  m.def(
      "sweep",
      [](const std::string& grid_json, const std::vector<double>& taus, int jobs) {
        const SweepGrid g = grid_from_json(grid_json);
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep_scenarios(g, taus, jobs);
        }
        py::list out;
        for (const SweepRow& r : rows) {
          py::dict d;
          d["snr_db"] = r.snr_db;
          d["n_spikes"] = r.n_spikes;
          d["sampler"] = to_string(r.sampler);
          d["tau"] = r.tau;
          d["rate_x"] = r.rate_x;
          d["rate_h"] = r.rate_h;
          d["failures"] = r.failures;
          out.append(d);
        }
        return out;
      },
      py::arg("grid_json"), py::arg("taus") = kDefaultTaus, py::arg("jobs") = 1);

  m.def(
      "mpsrf",
      [](const std::vector<Matrix>& chains, double fraction) {
        ChainSet set;
        set.chains = chains;
        for (Index k = 0; k < (chains.empty() ? 0 : chains.front().cols()); ++k)
          set.monitored.push_back("c" + std::to_string(k));
        return bdconv::mpsrf(set, fraction);
      },
      py::arg("chains"), py::arg("use_last_fraction") = 0.5);
  m.def("nmse", &nmse, py::arg("truth"), py::arg("estimate"));
  m.def("dps_basis", [](Index T, double W, Index L) { return dps_basis(T, W, L).matrix; }, py::arg("T"), py::arg("W"),
        py::arg("L"));
  m.def("pulse_cosine_decay", &pulse_cosine_decay, py::arg("n_count") = 21);
  m.def("pulse_gaussian_derivative", &pulse_gaussian_derivative, py::arg("f_c") = 2.0, py::arg("f_s") = 36.0,
        py::arg("n_count") = 23);
  m.def("convolve", &convolve, py::arg("a"), py::arg("b"));
}
