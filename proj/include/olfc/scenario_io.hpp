#pragma once

// JSON scenario files: parsing, schema validation with field paths, and the
// load-time assumption checks.
//
// Bus ids, unit indices and communication-edge endpoints are 1-based in the
// file and 0-based in memory. Communication nodes are numbered generators
// first (unit i is node i), then controllable loads in file order.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "olfc/sim.hpp"

namespace olfc {

struct LoadOptions {
  bool strict = false;  // security and droop-interval warnings become errors
  std::optional<double> dt;
  std::optional<double> horizon;
};

/// How a tabulated droop value is turned into K^{-1}.
enum class DroopReading { inverse, gain };  // value is K^{-1} / value is K

const char* to_string(DroopReading reading);
double droop_inverse_from(double tabulated, DroopReading reading);

struct DroopEntry {
  std::size_t unit = 0;
  int order = 2;
  double tabulated = 0.0;
  DroopReading reading = DroopReading::inverse;  // the one in force
  double droop_inverse = 0.0;
};

struct LoadedScenario {
  Scenario scenario;
  nlohmann::json document;  // effective inputs (command-line overrides applied)
  std::string digest;       // FNV-1a 64 of the compact effective document
  std::vector<DroopEntry> droop;
  std::vector<std::string> warnings;
  std::vector<std::string> notices;
};

/// Parses and validates; throws ValidationError with the offending path.
LoadedScenario parse_scenario(const nlohmann::json& document,
                              const LoadOptions& options = {});
LoadedScenario load_scenario(const std::filesystem::path& path,
                             const LoadOptions& options = {});

/// Hex FNV-1a 64-bit hash.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace olfc
