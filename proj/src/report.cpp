#include "olfc/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "olfc/error.hpp"

namespace olfc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

// Non-finite values have no JSON encoding.
json finite_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json certificate_json(const DroopCertificate& c) {
  json j;
  j["prerequisites_hold"] = c.prerequisites_hold;
  j["governor_ratio"] = c.governor_ratio;
  j["damping_ratio"] = c.damping_ratio;
  j["alpha"] = c.alpha;
  j["interval"] = c.interval_nonempty ? json::array({c.lower, c.upper}) : json(nullptr);
  j["inside_interval"] = c.inside_interval;
  j["W_eigenvalues"] = json::array({c.W_eigenvalues[0], c.W_eigenvalues[1], c.W_eigenvalues[2]});
  j["W_negative_definite"] = c.W_negdef;
  return j;
}

json dispatch_json(const Scenario& sc, const Vector& loads) {
  json j;
  j["total_load"] = loads.sum();
  const auto costs = sc.costs();
  if (sc.controllable_loads.empty()) {
    const auto d = optimal_dispatch(costs, loads.sum());
    j["lambda"] = d.lambda;
    j["P_m"] = to_json(d.mechanical_power);
    j["total_cost"] = d.total_cost;
  } else {
    const auto w = social_welfare_dispatch(costs, sc.benefits(), loads.sum());
    j["lambda"] = w.lambda;
    j["P_m"] = to_json(w.mechanical_power);
    j["controllable_load"] = to_json(w.controllable_load);
    j["welfare"] = w.welfare;
  }
  return j;
}

json brute_force_json(const Scenario& sc, const Vector& loads) {
  const auto costs = sc.costs();
  if (costs.size() > 4 || !sc.controllable_loads.empty()) return nullptr;
  const double resolution = 1e-2;
  const auto closed = optimal_dispatch(costs, loads.sum());
  const auto brute = brute_force_dispatch(costs, loads.sum(), resolution);
  json j;
  j["grid_resolution"] = resolution;
  j["P_m"] = to_json(brute.mechanical_power);
  j["max_abs_difference"] = (brute.mechanical_power - closed.mechanical_power).lpNorm<Eigen::Infinity>();
  return j;
}

std::vector<std::size_t> sample_rows(std::size_t rows, std::size_t max_points) {
  std::vector<std::size_t> out;
  if (rows == 0) return out;
  const std::size_t stride = rows - 1 <= max_points ? 1 : (rows - 1 + max_points - 1) / max_points;
  for (std::size_t k = 0; k < rows; k += stride) out.push_back(k);
  if (out.back() != rows - 1) out.push_back(rows - 1);
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::vector<std::string> trajectory_columns(const ClosedLoopSystem& system) {
  const auto& sc = system.scenario();
  const auto& L = system.layout();
  std::vector<std::string> h{"t"};
  auto add = [&](const std::string& prefix, std::size_t n) {
    for (std::size_t i = 1; i <= n; ++i) h.push_back(prefix + std::to_string(i));
  };
  add("eta_", sc.network.n_line());
  add("omega_g", sc.network.n_gen());
  add("omega_l", sc.network.n_load());
  add("P_m", sc.network.n_gen());
  for (std::size_t i = 0; i < L.steam_index.size(); ++i) {
    if (L.steam_index[i] >= 0) h.push_back("P_s" + std::to_string(i + 1));
  }
  if (L.theta.length > 0) add("theta", sc.network.n_gen());
  add("marginal_", sc.units.size() + sc.controllable_loads.size());
  add("P_l", sc.network.n_load());
  add("v_", static_cast<std::size_t>(L.flow.length));
  add("lambda_", static_cast<std::size_t>(L.lambda.length));
  add("theta_l", sc.controllable_loads.size());
  return h;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const ClosedLoopSystem& system) {
  const auto& L = traj.layout;
  const auto header = trajectory_columns(system);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  std::string line;
  auto put = [&](double v) {
    line += ',';
    line += format_double(v);
  };
  auto put_all = [&](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v[i]);
  };
  for (std::size_t k = 0; k < traj.rows(); ++k) {
    const Vector x = traj.state(k);
    const Vector pl = traj.load(k);
    line = format_double(traj.time[k]);
    put_all(segment(x, L.eta));
    put_all(segment(x, L.omega_g));
    put_all(system.load_frequency(x, pl));
    put_all(segment(x, L.mechanical_power));
    put_all(segment(x, L.steam_power));
    put_all(segment(x, L.theta));
    put_all(system.marginal_signal(x));
    put_all(pl);
    put_all(segment(x, L.flow));
    put_all(segment(x, L.lambda));
    put_all(segment(x, L.theta_load));
    out << line << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("no column named " + name);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw Error("CSV line " + std::to_string(lineno) + ": bad number");
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != table.header.size()) {
      throw Error("CSV line " + std::to_string(lineno) + ": expected " +
                  std::to_string(table.header.size()) + " values");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

json certify_report(const LoadedScenario& loaded) {
  const auto& sc = loaded.scenario;
  json j;
  json units = json::array();
  bool all_pass = true;
  for (const auto& d : loaded.droop) {
    json u;
    u["unit"] = d.unit + 1;
    u["order"] = d.order;
    u["tabulated"] = d.tabulated;
    u["reading_in_force"] = to_string(d.reading);
    u["droop_inverse"] = d.droop_inverse;
    if (d.order == 2) {
      const auto& gov = sc.units[d.unit].governor;
      const double damping = sc.network.damping_gen()[static_cast<Eigen::Index>(d.unit)];
      json readings;
      for (auto reading : {DroopReading::inverse, DroopReading::gain}) {
        json r;
        if (reading == DroopReading::gain && d.tabulated == 0.0) {
          r["droop_inverse"] = nullptr;
          r["inside_interval"] = false;
        } else {
          const double k_inv = droop_inverse_from(d.tabulated, reading);
          r = certificate_json(droop_certificate(gov.governor_time, gov.turbine_time, damping, k_inv));
          r["droop_inverse"] = k_inv;
        }
        readings[to_string(reading)] = r;
      }
      u["readings"] = readings;
      u["passes"] = readings[to_string(d.reading)]["inside_interval"];
      all_pass = all_pass && u["passes"].get<bool>();
    } else {
      u["readings"] = nullptr;
      u["passes"] = d.droop_inverse > 0.0;
      all_pass = all_pass && d.droop_inverse > 0.0;
    }
    units.push_back(u);
  }
  j["droop_certificates"] = units;
  j["all_units_pass"] = all_pass;
  j["dispatch"]["initial"] = dispatch_json(sc, sc.initial_loads);
  j["dispatch"]["final"] = dispatch_json(sc, sc.final_loads());
  j["dispatch"]["brute_force_final"] = brute_force_json(sc, sc.final_loads());
  return j;
}

RunResult run_scenario(const LoadedScenario& loaded, const fs::path& out_dir,
                       const RunOptions& options) {
  RunResult result;
  result.directory = out_dir;
  json& rep = result.report;
  const auto& sc = loaded.scenario;
  rep["scenario"]["name"] = sc.name;
  rep["scenario"]["digest"] = loaded.digest;
  rep["scenario"]["family"] = to_string(sc.family);
  rep["scenario"]["inputs"] = loaded.document;
  rep["scenario"]["warnings"] = loaded.warnings;
  rep["scenario"]["notices"] = loaded.notices;
  const json cert = certify_report(loaded);
  rep["droop_certificates"] = cert["droop_certificates"];
  rep["all_units_pass"] = cert["all_units_pass"];
  rep["dispatch"] = cert["dispatch"];

  const ClosedLoopSystem system(sc);
  const auto eq0 = equilibrium(sc, sc.initial_loads);
  const auto eq1 = equilibrium(sc, sc.final_loads());
  auto eq_json = [](const Equilibrium& eq) {
    json e;
    e["omega_star"] = eq.omega_star;
    e["secure"] = eq.secure;
    e["max_abs_eta"] = eq.eta.size() ? eq.eta.cwiseAbs().maxCoeff() : 0.0;
    e["P_m"] = to_json(eq.mechanical_power);
    e["marginal"] = eq.marginal;
    e["residual"] = eq.residual;
    return e;
  };
  rep["equilibrium"]["initial"] = eq_json(eq0);
  rep["equilibrium"]["final"] = eq_json(eq1);

  if (options.certify_only) {
    rep["simulated"] = false;
    if (options.write_files) write_atomic(out_dir / "report.json", rep.dump(2) + "\n");
    return result;
  }

  const Trajectory traj = simulate(system, system.pack(eq0).values);
  result.diverged = traj.diverged;
  rep["simulated"] = true;
  rep["integrator"] = {{"method", "rk4"},
                       {"dt", sc.integrator.dt},
                       {"horizon", sc.integrator.horizon},
                       {"divergence_bound", sc.integrator.divergence_bound},
                       {"rows", traj.rows()}};
  rep["diverged"] = traj.diverged;
  rep["divergence_time"] = optional_json(traj.divergence_time);

  const auto metrics = run_metrics(traj, system);
  const Vector last = traj.state(traj.rows() - 1);
  const auto& L = traj.layout;
  rep["metrics"] = {
      {"settling_time", optional_json(metrics.settling_time)},
      {"settling_threshold", sc.analysis.settling_threshold},
      {"terminal_frequency", finite_or_null(metrics.terminal_frequency)},
      {"terminal_marginal_spread", finite_or_null(metrics.terminal_marginal_spread)},
      {"dispatch_error", optional_json(metrics.terminal_dispatch_error)},
      {"diverged", metrics.diverged},
      {"divergence_time", optional_json(metrics.divergence_time)},
      {"security_violations", metrics.security_violations},
      {"terminal_omega_g", to_json(segment(last, L.omega_g))},
      {"terminal_P_m", to_json(segment(last, L.mechanical_power))},
  };

  const auto storage = dissipation_check(traj, system, eq1);
  json st;
  st["reference"] = "final loads";
  st["tolerance"] = storage.tolerance;
  st["slack"] = sc.analysis.dissipation_slack;
  st["difference_constant"] = calibrate_difference_constant(sc.integrator.dt);
  st["max_rate"] = finite_or_null(storage.max_rate);
  st["first_violation"] = optional_json(storage.first_violation);
  st["monotone"] = storage.monotone;
  st["min_V"] = finite_or_null(storage.min_V);
  st["V_initial"] = finite_or_null(storage.V.front());
  st["V_final"] = finite_or_null(storage.V.back());
  st["decomposition_residual"] = storage.max_decomposition_residual;
  st["decomposition_samples"] = storage.decomposition_samples;
  rep["storage"] = st;

  if (!options.write_files) return result;

  json files;
  {
    std::ostringstream csv;
    write_trajectory_csv(csv, traj, system);
    write_atomic(out_dir / "trajectory.csv", csv.str());
    files["trajectory"] = "trajectory.csv";
  }

  // Plot data, thinned to at most ~4000 points per channel.
  const auto rows = sample_rows(traj.rows(), 4000);
  std::map<std::string, std::string> plots;
  auto channel = [&](const std::string& name, auto value_at) {
    std::string body;
    for (std::size_t k : rows) {
      body += format_double(traj.time[k]);
      body += ' ';
      body += format_double(value_at(k));
      body += '\n';
    }
    plots[name] = body;
  };
  const auto ng = static_cast<Eigen::Index>(sc.network.n_gen());
  const auto nl = static_cast<Eigen::Index>(sc.network.n_load());
  for (Eigen::Index i = 0; i < ng; ++i) {
    const std::string id = std::to_string(i + 1);
    channel("frequency_omega_g" + id, [&](std::size_t k) { return traj.states(static_cast<Eigen::Index>(k), L.omega_g.offset + i); });
    channel("power_P_m" + id, [&](std::size_t k) { return traj.states(static_cast<Eigen::Index>(k), L.mechanical_power.offset + i); });
  }
  for (Eigen::Index j = 0; j < nl; ++j) {
    channel("frequency_omega_l" + std::to_string(j + 1), [&](std::size_t k) {
      return system.load_frequency(traj.state(k), traj.load(k))[j];
    });
  }
  // Dashed optimum lines: the optimal dispatch for the loads in force.
  auto optimum = [&](const Vector& loads) {
    return sc.controllable_loads.empty()
               ? optimal_dispatch(sc.costs(), loads.sum()).mechanical_power
               : social_welfare_dispatch(sc.costs(), sc.benefits(), loads.sum()).mechanical_power;
  };
  std::vector<Vector> optimum_at{optimum(sc.initial_loads)};
  std::vector<double> change_times{0.0};
  for (const auto& e : sc.events) {
    change_times.push_back(e.time);
    optimum_at.push_back(optimum(e.loads));
  }
  for (Eigen::Index i = 0; i < ng; ++i) {
    channel("power_P_m" + std::to_string(i + 1) + "_optimum", [&](std::size_t k) {
      std::size_t s = 0;
      while (s + 1 < change_times.size() && change_times[s + 1] <= traj.time[k] + 1e-9) ++s;
      return optimum_at[s][i];
    });
  }
  json plot_files = json::array();
  for (const auto& [name, body] : plots) {
    const std::string file = "plots/" + name + ".dat";
    write_atomic(out_dir / file, body);
    plot_files.push_back(file);
  }
  files["plots"] = plot_files;
  files["report"] = "report.json";
  rep["files"] = files;
  write_atomic(out_dir / "report.json", rep.dump(2) + "\n");
  return result;
}

std::vector<BatchEntry> run_batch(const std::vector<fs::path>& paths, const fs::path& out_dir,
                                  std::size_t parallelism, const LoadOptions& load_options,
                                  const RunOptions& run_options) {
  std::vector<BatchEntry> entries(paths.size());
  std::map<std::string, int> used;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    entries[k].path = paths[k].string();
    std::string base = paths[k].stem().string();
    const int n = used[base]++;
    entries[k].name = n == 0 ? base : base + "_" + std::to_string(n + 1);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < entries.size(); k = next++) {
      auto& e = entries[k];
      try {
        const auto loaded = load_scenario(paths[k], load_options);
        e.result = run_scenario(loaded, out_dir / e.name, run_options);
        e.ok = true;
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(parallelism, entries.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = "scenario,status,diverged,divergence_time,settling_time,dispatch_error,terminal_marginal_spread,max_storage_rate\n";
  json summary = json::array();
  auto cell = [](const json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
  for (const auto& e : entries) {
    json s;
    s["scenario"] = e.name;
    s["path"] = e.path;
    s["status"] = e.ok ? "ok" : "error";
    if (!e.ok) {
      s["error"] = e.error;
      csv += e.name + ",error,,,,,,\n";
    } else {
      const json& r = e.result->report;
      const bool simulated = r.value("simulated", false);
      s["diverged"] = e.result->diverged;
      if (simulated) {
        s["divergence_time"] = r["divergence_time"];
        s["settling_time"] = r["metrics"]["settling_time"];
        s["dispatch_error"] = r["metrics"]["dispatch_error"];
        s["terminal_marginal_spread"] = r["metrics"]["terminal_marginal_spread"];
        s["max_storage_rate"] = r["storage"]["max_rate"];
        csv += e.name + ",ok," + (e.result->diverged ? "true" : "false") + "," +
               cell(r["divergence_time"]) + "," + cell(r["metrics"]["settling_time"]) + "," +
               cell(r["metrics"]["dispatch_error"]) + "," +
               cell(r["metrics"]["terminal_marginal_spread"]) + "," +
               cell(r["storage"]["max_rate"]) + "\n";
      } else {
        csv += e.name + ",ok,false,,,,,\n";
      }
    }
    summary.push_back(s);
  }
  if (run_options.write_files) {
    write_atomic(out_dir / "summary.csv", csv);
    write_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
  }
  return entries;
}

}  // namespace olfc
