#pragma once

// Run artifacts: trajectory CSV, report.json, plot-data files, and batches.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "olfc/analysis.hpp"
#include "olfc/scenario_io.hpp"

namespace olfc {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

std::vector<std::string> trajectory_columns(const ClosedLoopSystem& system);

/// Header plus one row per sample. Columns: t, eta_*, omega_g*, omega_l*,
/// P_m*, P_s*, theta*, marginal_*, then P_l*, v_*, lambda_*, theta_l*.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const ClosedLoopSystem& system);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name; throws Error if absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Droop certificates under both readings of every tabulated value, and the
/// optimal dispatch for the initial and final loads.
nlohmann::json certify_report(const LoadedScenario& loaded);

struct RunOptions {
  bool certify_only = false;
  bool write_files = true;
};

struct RunResult {
  nlohmann::json report;
  bool diverged = false;
  std::filesystem::path directory;
};

/// Simulates, analyses and (optionally) writes trajectory.csv, report.json
/// and plots/*.dat into `out_dir`. Each file is written to a temporary name
/// and renamed into place.
RunResult run_scenario(const LoadedScenario& loaded, const std::filesystem::path& out_dir,
                       const RunOptions& options = {});

struct BatchEntry {
  std::string path;
  std::string name;
  bool ok = false;
  std::string error;
  std::optional<RunResult> result;
};

/// Runs every scenario into its own subdirectory of `out_dir` (named after
/// the scenario, suffixed on collision) using up to `parallelism` threads.
/// A failing scenario is recorded and does not stop the others. Writes
/// summary.csv and summary.json into `out_dir`.
std::vector<BatchEntry> run_batch(const std::vector<std::filesystem::path>& paths,
                                  const std::filesystem::path& out_dir,
                                  std::size_t parallelism,
                                  const LoadOptions& load_options = {},
                                  const RunOptions& run_options = {});

}  // namespace olfc
