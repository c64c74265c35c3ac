#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "olfc/analysis.hpp"
#include "olfc/error.hpp"
#include "olfc/report.hpp"
#include "olfc/scenario_io.hpp"

namespace py = pybind11;

namespace {

std::vector<olfc::CostFunction> make_costs(const std::vector<double>& q, const std::vector<double>& r,
                                           const std::vector<double>& s) {
  if (q.size() != r.size() || (!s.empty() && s.size() != q.size())) {
    throw olfc::ValidationError("cost coefficient lists differ in length");
  }
  std::vector<olfc::CostFunction> costs;
  for (std::size_t i = 0; i < q.size(); ++i) costs.push_back({q[i], r[i], s.empty() ? 0.0 : s[i]});
  return costs;
}

py::dict dispatch_dict(const olfc::DispatchResult& d) {
  py::dict out;
  out["P_m"] = d.mechanical_power;
  out["lambda"] = d.lambda;
  out["total_cost"] = d.total_cost;
  return out;
}

}  // namespace

PYBIND11_MODULE(_olfc, m) {
  m.doc() = "Frequency control simulation core";

  py::register_exception<olfc::ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<olfc::LoadedScenario>(m, "LoadedScenario")
      .def_property_readonly("name", [](const olfc::LoadedScenario& s) { return s.scenario.name; })
      .def_readonly("digest", &olfc::LoadedScenario::digest)
      .def_readonly("warnings", &olfc::LoadedScenario::warnings)
      .def_readonly("notices", &olfc::LoadedScenario::notices)
      .def_property_readonly("family", [](const olfc::LoadedScenario& s) {
        return std::string(olfc::to_string(s.scenario.family));
      })
      .def_property_readonly("document", [](const olfc::LoadedScenario& s) { return s.document.dump(); });

  m.def("load_scenario",
        [](const std::filesystem::path& path, bool strict, std::optional<double> dt,
           std::optional<double> horizon) {
          return olfc::load_scenario(path, {strict, dt, horizon});
        },
        py::arg("path"), py::arg("strict") = false, py::arg("dt") = py::none(),
        py::arg("horizon") = py::none());

  m.def("certify_json", [](const olfc::LoadedScenario& s) { return olfc::certify_report(s).dump(); });

  m.def("run_json",
        [](const olfc::LoadedScenario& s, const std::filesystem::path& out_dir, bool certify_only,
           bool write_files) {
          py::gil_scoped_release release;
          olfc::RunOptions opts;
          opts.certify_only = certify_only;
          opts.write_files = write_files;
          return olfc::run_scenario(s, out_dir, opts).report.dump();
        },
        py::arg("scenario"), py::arg("out_dir") = std::filesystem::path("out"),
        py::arg("certify_only") = false, py::arg("write_files") = true);

  m.def("simulate",
        [](const olfc::LoadedScenario& s) {
          olfc::Trajectory traj;
          {
            py::gil_scoped_release release;
            traj = olfc::simulate(s.scenario);
          }
          py::dict out;
          out["time"] = traj.time;
          out["states"] = traj.states;
          out["loads"] = traj.loads;
          out["diverged"] = traj.diverged;
          out["divergence_time"] = traj.divergence_time;
          py::dict slices;
          for (const auto& [name, slice] : traj.layout.named()) {
            slices[py::str(name)] = py::make_tuple(slice.offset, slice.offset + slice.length);
          }
          out["slices"] = slices;
          return out;
        },
        py::arg("scenario"));

  m.def("optimal_dispatch",
        [](const std::vector<double>& q, const std::vector<double>& r, const std::vector<double>& s,
           double total_load) { return dispatch_dict(olfc::optimal_dispatch(make_costs(q, r, s), total_load)); },
        py::arg("q"), py::arg("r"), py::arg("s") = std::vector<double>{}, py::arg("total_load"));

  m.def("brute_force_dispatch",
        [](const std::vector<double>& q, const std::vector<double>& r, const std::vector<double>& s,
           double total_load, double resolution) {
          return dispatch_dict(olfc::brute_force_dispatch(make_costs(q, r, s), total_load, resolution));
        },
        py::arg("q"), py::arg("r"), py::arg("s") = std::vector<double>{}, py::arg("total_load"),
        py::arg("resolution") = 1e-2);

  m.def("droop_certificate",
        [](double governor_time, double turbine_time, double damping, double droop_inverse) {
          const auto c = olfc::droop_certificate(governor_time, turbine_time, damping, droop_inverse);
          py::dict out;
          out["interval"] = c.interval_nonempty ? py::object(py::make_tuple(c.lower, c.upper)) : py::none();
          out["alpha"] = c.alpha;
          out["prerequisites_hold"] = c.prerequisites_hold;
          out["inside_interval"] = c.inside_interval;
          out["W"] = Eigen::MatrixXd(c.W);
          out["W_eigenvalues"] = c.W_eigenvalues;
          out["W_negative_definite"] = c.W_negdef;
          return out;
        },
        py::arg("T_s"), py::arg("T_m"), py::arg("D"), py::arg("K_inv"));

  m.def("synchronous_frequency",
        [](const olfc::Vector& pm, const olfc::Vector& pl, const olfc::Vector& dg, const olfc::Vector& dl) {
          return olfc::synchronous_frequency(pm, pl, dg, dl);
        },
        py::arg("P_m"), py::arg("P_l"), py::arg("D_g"), py::arg("D_l"));
}
