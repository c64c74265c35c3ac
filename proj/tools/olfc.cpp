// olfc: run, batch, certify and dispatch over JSON scenario files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "olfc/error.hpp"
#include "olfc/report.hpp"
#include "olfc/scenario_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kDiverged = 2;

struct Common {
  std::optional<double> dt;
  std::optional<double> horizon;
  bool strict = false;

  olfc::LoadOptions load_options() const { return {strict, dt, horizon}; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--dt", c.dt, "Integration step (s)")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", c.horizon, "Simulated time span (s)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--strict", c.strict, "Treat assumption warnings as errors");
}

void print_diagnostics(const olfc::LoadedScenario& s) {
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& n : s.notices) std::cerr << "notice: " << n << "\n";
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void print_certificates(const json& cert) {
  std::cout << "droop certificates (admissible K^-1 interval per unit)\n";
  for (const auto& u : cert["droop_certificates"]) {
    std::cout << "  unit " << u["unit"].get<int>() << " (order " << u["order"].get<int>()
              << ", tabulated " << fmt(u["tabulated"].get<double>()) << ", reading in force "
              << u["reading_in_force"].get<std::string>() << ")\n";
    if (u["readings"].is_null()) {
      std::cout << "    first order: K^-1 = " << fmt(u["droop_inverse"].get<double>())
                << (u["passes"].get<bool>() ? "  PASS\n" : "  FAIL\n");
      continue;
    }
    for (const char* reading : {"K_inv", "K"}) {
      const auto& r = u["readings"][reading];
      std::cout << "    read as " << reading << ": ";
      if (r["droop_inverse"].is_null()) {
        std::cout << "undefined\n";
        continue;
      }
      std::cout << "K^-1 = " << fmt(r["droop_inverse"].get<double>()) << ", interval ";
      if (r["interval"].is_null()) {
        std::cout << "empty";
      } else {
        std::cout << "(" << fmt(r["interval"][0].get<double>()) << ", "
                  << fmt(r["interval"][1].get<double>()) << ")";
      }
      std::cout << (r["inside_interval"].get<bool>() ? "  inside" : "  outside")
                << ", W negative definite: " << (r["W_negative_definite"].get<bool>() ? "yes" : "no")
                << "\n";
    }
  }
  std::cout << "units pass under the reading in force: "
            << (cert["all_units_pass"].get<bool>() ? "all" : "not all") << "\n";
}

void print_dispatch(const json& d, const char* label) {
  std::cout << label << ": total load " << fmt(d["total_load"].get<double>(), 10) << ", lambda "
            << fmt(d["lambda"].get<double>(), 10) << ", P_m =";
  for (const auto& p : d["P_m"]) std::cout << " " << fmt(p.get<double>(), 10);
  std::cout << "\n";
}

int cmd_run(const std::string& path, const std::string& out, const Common& c,
            bool certify_only, bool expect_stable) {
  const auto loaded = olfc::load_scenario(path, c.load_options());
  print_diagnostics(loaded);
  olfc::RunOptions opts;
  opts.certify_only = certify_only;
  const auto result = olfc::run_scenario(loaded, out, opts);
  const auto& rep = result.report;
  if (certify_only) {
    print_certificates(rep);
    print_dispatch(rep["dispatch"]["final"], "optimal dispatch (final loads)");
    std::cout << "report: " << (fs::path(out) / "report.json").string() << "\n";
    return kOk;
  }
  const auto& m = rep["metrics"];
  std::cout << loaded.scenario.name << ": " << (result.diverged ? "diverged" : "completed");
  if (result.diverged) std::cout << " at t = " << fmt(rep["divergence_time"].get<double>());
  std::cout << "\n";
  if (!result.diverged) {
    std::cout << "  settling time: "
              << (m["settling_time"].is_null() ? std::string("none") : fmt(m["settling_time"].get<double>()))
              << "\n";
    if (!m["dispatch_error"].is_null()) {
      std::cout << "  dispatch error: " << fmt(m["dispatch_error"].get<double>()) << "\n";
    }
    std::cout << "  terminal marginal spread: " << fmt(m["terminal_marginal_spread"].get<double>()) << "\n";
  }
  const auto& st = rep["storage"];
  std::cout << "  max storage rate: "
            << (st["max_rate"].is_null() ? std::string("n/a") : fmt(st["max_rate"].get<double>()))
            << (st["monotone"].get<bool>() ? " (nonincreasing)" : " (increase detected)") << "\n";
  std::cout << "  output: " << out << "\n";
  return expect_stable && result.diverged ? kDiverged : kOk;
}

int cmd_batch(const std::vector<std::string>& paths, const std::string& out, const Common& c,
              std::size_t jobs, bool certify_only, bool expect_stable) {
  std::vector<fs::path> p(paths.begin(), paths.end());
  olfc::RunOptions opts;
  opts.certify_only = certify_only;
  const auto entries = olfc::run_batch(p, out, jobs, c.load_options(), opts);
  bool any_error = false;
  bool any_diverged = false;
  std::cout << "scenario                          status    result\n";
  for (const auto& e : entries) {
    std::string name = e.name;
    name.resize(std::max<std::size_t>(name.size(), 32), ' ');
    std::cout << name << "  ";
    if (!e.ok) {
      any_error = true;
      std::cout << "error     " << e.error << "\n";
      continue;
    }
    any_diverged = any_diverged || e.result->diverged;
    std::cout << "ok        ";
    if (certify_only) {
      std::cout << "certified\n";
    } else if (e.result->diverged) {
      std::cout << "diverged at t = " << fmt(e.result->report["divergence_time"].get<double>()) << "\n";
    } else {
      std::cout << "converged\n";
    }
  }
  std::cout << "summary: " << (fs::path(out) / "summary.csv").string() << "\n";
  if (any_error) return kInvalid;
  return expect_stable && any_diverged ? kDiverged : kOk;
}

int cmd_certify(const std::string& path, const std::optional<std::string>& out, const Common& c) {
  const auto loaded = olfc::load_scenario(path, c.load_options());
  print_diagnostics(loaded);
  const json cert = olfc::certify_report(loaded);
  print_certificates(cert);
  if (out) {
    fs::create_directories(*out);
    std::ofstream f(fs::path(*out) / "certificates.json");
    f << cert.dump(2) << "\n";
  }
  return kOk;
}

int cmd_dispatch(const std::string& path, std::optional<double> total_load, double resolution,
                 const Common& c) {
  const auto loaded = olfc::load_scenario(path, c.load_options());
  print_diagnostics(loaded);
  const auto& sc = loaded.scenario;
  const auto costs = sc.costs();
  const double load = total_load ? *total_load : sc.final_loads().sum();
  const auto closed = olfc::optimal_dispatch(costs, load);
  std::cout << "closed form: lambda " << fmt(closed.lambda, 10) << ", P_m =";
  for (Eigen::Index i = 0; i < closed.mechanical_power.size(); ++i) {
    std::cout << " " << fmt(closed.mechanical_power[i], 10);
  }
  std::cout << ", cost " << fmt(closed.total_cost, 10) << "\n";
  if (costs.size() <= 4) {
    const auto brute = olfc::brute_force_dispatch(costs, load, resolution);
    std::cout << "brute force: P_m =";
    for (Eigen::Index i = 0; i < brute.mechanical_power.size(); ++i) {
      std::cout << " " << fmt(brute.mechanical_power[i], 10);
    }
    const double diff = (brute.mechanical_power - closed.mechanical_power).lpNorm<Eigen::Infinity>();
    std::cout << ", cost " << fmt(brute.total_cost, 10) << "\n";
    std::cout << "max |difference|: " << fmt(diff, 3) << "\n";
  } else {
    std::cout << "brute force skipped (more than 4 generators)\n";
  }
  if (!sc.controllable_loads.empty()) {
    const auto w = olfc::social_welfare_dispatch(costs, sc.benefits(), load);
    std::cout << "social welfare: lambda " << fmt(w.lambda, 10) << ", P_m =";
    for (Eigen::Index i = 0; i < w.mechanical_power.size(); ++i) std::cout << " " << fmt(w.mechanical_power[i], 10);
    std::cout << ", u =";
    for (Eigen::Index j = 0; j < w.controllable_load.size(); ++j) std::cout << " " << fmt(w.controllable_load[j], 10);
    std::cout << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency control simulation for power networks"};
  app.require_subcommand(1);

  Common run_common;
  std::string run_path, run_out = "out";
  bool certify_only = false, expect_stable = false;
  auto* run = app.add_subcommand("run", "Simulate one scenario");
  run->add_option("scenario", run_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory");
  add_common(run, run_common);
  run->add_flag("--certify-only", certify_only, "Write certificates and dispatch without simulating");
  run->add_flag("--expect-stable", expect_stable, "Exit with status 2 if the run diverges");

  Common batch_common;
  std::vector<std::string> batch_paths;
  std::string batch_out = "out";
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool batch_certify_only = false, batch_expect_stable = false;
  auto* batch = app.add_subcommand("batch", "Simulate several scenarios concurrently");
  batch->add_option("scenarios", batch_paths, "Scenario JSON files")->required();
  batch->add_option("--out", batch_out, "Output directory (one subdirectory per scenario)");
  batch->add_option("-j,--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  add_common(batch, batch_common);
  batch->add_flag("--certify-only", batch_certify_only, "Certificates and dispatch only");
  batch->add_flag("--expect-stable", batch_expect_stable, "Exit with status 2 if any run diverges");

  Common cert_common;
  std::string cert_path;
  std::optional<std::string> cert_out;
  auto* certify = app.add_subcommand("certify", "Droop-interval certificates under both K readings");
  certify->add_option("scenario", cert_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  certify->add_option("--out", cert_out, "Also write certificates.json here");
  add_common(certify, cert_common);

  Common disp_common;
  std::string disp_path;
  std::optional<double> total_load;
  double resolution = 1e-2;
  auto* dispatch = app.add_subcommand("dispatch", "Closed-form optimal dispatch vs brute-force search");
  dispatch->add_option("scenario", disp_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  dispatch->add_option("--total-load", total_load, "Total load (default: final scheduled load)");
  dispatch->add_option("--resolution", resolution, "Brute-force grid spacing")->check(CLI::PositiveNumber);
  add_common(dispatch, disp_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(run_path, run_out, run_common, certify_only, expect_stable);
    if (*batch) return cmd_batch(batch_paths, batch_out, batch_common, jobs, batch_certify_only, batch_expect_stable);
    if (*certify) return cmd_certify(cert_path, cert_out, cert_common);
    if (*dispatch) return cmd_dispatch(disp_path, total_load, resolution, disp_common);
  } catch (const olfc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
