#include "olfc/scenario_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "olfc/error.hpp"

namespace olfc {

using nlohmann::json;

namespace {

std::string at(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

void only_keys(const json& j, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("expected an object", path.empty() ? "$" : path);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("unknown field", at(path, key));
  }
}

const json& required(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ValidationError("missing required field", at(path, key));
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("expected a number", path);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError("expected a finite number", path);
  return v;
}

double number(const json& j, const std::string& path, const char* key) {
  return number(required(j, path, key), at(path, key));
}

double number_or(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), at(path, key)) : fallback;
}

double positive(const json& j, const std::string& path, const char* key) {
  const double v = number(j, path, key);
  if (!(v > 0.0)) throw ValidationError("must be positive", at(path, key));
  return v;
}

std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError("expected an integer", path);
  return j.get<std::int64_t>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("expected an array", path);
  return j;
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError("expected a string", path);
  return j.get<std::string>();
}

Vector vector_of(const json& j, const std::string& path) {
  array(j, path);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = number(j[k], at(path, k));
  return v;
}

CostFunction cost_of(const json& j, const std::string& path) {
  only_keys(j, path, {"q", "r", "s"});
  return {positive(j, path, "q"), number(j, path, "r"), number_or(j, path, "s", 0.0)};
}

BenefitFunction benefit_of(const json& j, const std::string& path) {
  only_keys(j, path, {"q", "r", "s"});
  return {positive(j, path, "q"), number(j, path, "r"), number_or(j, path, "s", 0.0)};
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

const char* to_string(DroopReading reading) {
  return reading == DroopReading::inverse ? "K_inv" : "K";
}

double droop_inverse_from(double tabulated, DroopReading reading) {
  if (reading == DroopReading::inverse) return tabulated;
  if (tabulated == 0.0) throw ValidationError("droop gain K must be nonzero");
  return 1.0 / tabulated;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedScenario parse_scenario(const json& input, const LoadOptions& options) {
  LoadedScenario out;
  json doc = input;
  only_keys(doc, "", {"name", "description", "base_mva", "frequency_base_hz", "network", "units",
                      "controllable_loads", "controllers", "schedule", "integrator", "analysis"});
  if (options.dt) doc["integrator"]["dt"] = *options.dt;
  if (options.horizon) doc["integrator"]["horizon"] = *options.horizon;

  Scenario& sc = out.scenario;
  sc.name = doc.contains("name") ? text(doc["name"], "name") : "scenario";
  sc.base_mva = doc.contains("base_mva") ? positive(doc, "", "base_mva") : 100.0;
  sc.frequency_base_hz = doc.contains("frequency_base_hz") ? positive(doc, "", "frequency_base_hz") : 50.0;

  // network
  const json& net = required(doc, "", "network");
  only_keys(net, "network", {"buses", "lines"});
  const json& jbuses = array(required(net, "network", "buses"), "network.buses");
  std::vector<BusParams> buses;
  std::size_t n_gen = 0;
  for (std::size_t k = 0; k < jbuses.size(); ++k) {
    const std::string p = at("network.buses", k);
    const json& b = jbuses[k];
    only_keys(b, p, {"id", "kind", "inertia", "damping", "voltage", "name"});
    const auto id = integer(required(b, p, "id"), at(p, "id"));
    if (id != static_cast<std::int64_t>(k + 1)) {
      throw ValidationError("bus ids must be 1, 2, ... in listing order", at(p, "id"));
    }
    const std::string kind = text(required(b, p, "kind"), at(p, "kind"));
    BusParams bp;
    if (kind == "generator") {
      if (n_gen != k) throw ValidationError("generator buses must precede load buses", at(p, "kind"));
      bp.kind = BusKind::generator;
      bp.inertia = positive(b, p, "inertia");
      ++n_gen;
    } else if (kind == "load") {
      bp.kind = BusKind::load;
      if (b.contains("inertia")) throw ValidationError("load buses carry no inertia", at(p, "inertia"));
    } else {
      throw ValidationError("kind must be \"generator\" or \"load\"", at(p, "kind"));
    }
    bp.damping = positive(b, p, "damping");
    bp.voltage = positive(b, p, "voltage");
    buses.push_back(bp);
  }
  const std::size_t n_bus = buses.size();
  const json& jlines = array(required(net, "network", "lines"), "network.lines");
  std::vector<LineParams> lines;
  for (std::size_t k = 0; k < jlines.size(); ++k) {
    const std::string p = at("network.lines", k);
    const json& l = jlines[k];
    only_keys(l, p, {"from", "to", "susceptance"});
    const auto from = integer(required(l, p, "from"), at(p, "from"));
    const auto to = integer(required(l, p, "to"), at(p, "to"));
    if (from < 1 || from > static_cast<std::int64_t>(n_bus)) throw ValidationError("unknown bus", at(p, "from"));
    if (to < 1 || to > static_cast<std::int64_t>(n_bus)) throw ValidationError("unknown bus", at(p, "to"));
    if (from == to) throw ValidationError("line connects a bus to itself", at(p, "to"));
    const double b = number(l, p, "susceptance");
    if (b == 0.0) throw ValidationError("susceptance must be nonzero", at(p, "susceptance"));
    lines.push_back({static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1), b});
  }
  try {
    sc.network = NetworkModel(buses, lines);
  } catch (const DisconnectedGraphError& e) {
    throw DisconnectedGraphError(e.what(), "network.lines");
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "network");
  }

  // units
  const json& junits = array(required(doc, "", "units"), "units");
  std::vector<std::optional<GeneratorUnit>> slots(n_gen);
  std::vector<DroopEntry> droop(n_gen);
  for (std::size_t k = 0; k < junits.size(); ++k) {
    const std::string p = at("units", k);
    const json& u = junits[k];
    only_keys(u, p, {"bus", "order", "T_m", "T_s", "T_theta", "droop", "cost"});
    const auto bus = integer(required(u, p, "bus"), at(p, "bus"));
    if (bus < 1 || bus > static_cast<std::int64_t>(n_gen)) {
      throw ValidationError("unit must sit on a generator bus", at(p, "bus"));
    }
    const auto slot = static_cast<std::size_t>(bus - 1);
    if (slots[slot]) throw ValidationError("generator bus already has a unit", at(p, "bus"));
    GeneratorUnit gu;
    gu.governor.order = static_cast<int>(integer(required(u, p, "order"), at(p, "order")));
    if (gu.governor.order != 1 && gu.governor.order != 2) {
      throw ValidationError("order must be 1 or 2", at(p, "order"));
    }
    gu.governor.turbine_time = positive(u, p, "T_m");
    if (gu.governor.order == 2) {
      gu.governor.governor_time = positive(u, p, "T_s");
    } else if (u.contains("T_s")) {
      throw ValidationError("first-order units have no T_s", at(p, "T_s"));
    }
    gu.governor.control_time = positive(u, p, "T_theta");

    const std::string dp = at(p, "droop");
    const json& d = required(u, p, "droop");
    DroopEntry entry;
    entry.unit = slot;
    entry.order = gu.governor.order;
    if (d.is_number()) {
      entry.tabulated = number(d, dp);
    } else {
      only_keys(d, dp, {"value", "read_as"});
      entry.tabulated = number(d, dp, "value");
      if (d.contains("read_as")) {
        const std::string r = text(d["read_as"], at(dp, "read_as"));
        if (r == "K") {
          entry.reading = DroopReading::gain;
        } else if (r != "K_inv") {
          throw ValidationError("read_as must be \"K_inv\" or \"K\"", at(dp, "read_as"));
        }
      }
    }
    try {
      entry.droop_inverse = droop_inverse_from(entry.tabulated, entry.reading);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), dp);
    }
    if (entry.droop_inverse < 0.0 && gu.governor.order == 1) {
      throw ValidationError("first-order units need a positive droop", dp);
    }
    gu.governor.droop_inverse = entry.droop_inverse;
    gu.cost = cost_of(required(u, p, "cost"), at(p, "cost"));
    slots[slot] = gu;
    droop[slot] = entry;
  }
  for (std::size_t i = 0; i < n_gen; ++i) {
    if (!slots[i]) throw ValidationError("generator bus " + std::to_string(i + 1) + " has no unit", "units");
    sc.units.push_back(*slots[i]);
  }
  out.droop = droop;

  // controllable loads
  if (doc.contains("controllable_loads")) {
    const json& jc = array(doc["controllable_loads"], "controllable_loads");
    for (std::size_t k = 0; k < jc.size(); ++k) {
      const std::string p = at("controllable_loads", k);
      only_keys(jc[k], p, {"bus", "T_theta", "benefit"});
      const auto bus = integer(required(jc[k], p, "bus"), at(p, "bus"));
      if (bus <= static_cast<std::int64_t>(n_gen) || bus > static_cast<std::int64_t>(n_bus)) {
        throw ValidationError("controllable load must sit on a load bus", at(p, "bus"));
      }
      ControllableLoad cl;
      cl.load_index = static_cast<std::size_t>(bus - 1) - n_gen;
      cl.control_time = positive(jc[k], p, "T_theta");
      cl.benefit = benefit_of(required(jc[k], p, "benefit"), at(p, "benefit"));
      sc.controllable_loads.push_back(cl);
    }
  }

  // controllers
  const json& jc = required(doc, "", "controllers");
  only_keys(jc, "controllers", {"family", "comm_edges", "overrides", "primal_dual_gains"});
  const std::string family = text(required(jc, "controllers", "family"), "controllers.family");
  if (family == "none") {
    sc.family = ControllerFamily::none;
  } else if (family == "consensus") {
    sc.family = ControllerFamily::consensus;
  } else if (family == "primal_dual") {
    sc.family = ControllerFamily::primal_dual;
  } else {
    throw ValidationError("family must be \"none\", \"consensus\" or \"primal_dual\"", "controllers.family");
  }
  const std::size_t nodes = n_gen + sc.controllable_loads.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (jc.contains("comm_edges")) {
    const json& je = array(jc["comm_edges"], "controllers.comm_edges");
    for (std::size_t k = 0; k < je.size(); ++k) {
      const std::string p = at("controllers.comm_edges", k);
      if (!je[k].is_array() || je[k].size() != 2) throw ValidationError("expected a pair [a, b]", p);
      const auto a = integer(je[k][0], at(p, 0));
      const auto b = integer(je[k][1], at(p, 1));
      if (a < 1 || a > static_cast<std::int64_t>(nodes)) throw ValidationError("unknown controller", at(p, 0));
      if (b < 1 || b > static_cast<std::int64_t>(nodes)) throw ValidationError("unknown controller", at(p, 1));
      edges.emplace_back(static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1));
    }
  } else if (sc.family == ControllerFamily::consensus && nodes > 1) {
    throw ValidationError("missing required field", "controllers.comm_edges");
  }
  try {
    sc.comm = CommGraph(sc.family == ControllerFamily::consensus ? nodes : (edges.empty() ? 0 : nodes),
                        edges);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "controllers.comm_edges");
  }
  if (jc.contains("overrides")) {
    const json& jo = array(jc["overrides"], "controllers.overrides");
    for (std::size_t k = 0; k < jo.size(); ++k) {
      const std::string p = at("controllers.overrides", k);
      only_keys(jo[k], p, {"unit", "gain_multiplier", "active_from"});
      const auto unit = integer(required(jo[k], p, "unit"), at(p, "unit"));
      if (unit < 1 || unit > static_cast<std::int64_t>(n_gen)) throw ValidationError("unknown unit", at(p, "unit"));
      GainOverride o;
      o.unit = static_cast<std::size_t>(unit - 1);
      o.gain_multiplier = number(jo[k], p, "gain_multiplier");
      o.active_from = number_or(jo[k], p, "active_from", 0.0);
      if (o.active_from < 0.0) throw ValidationError("must be nonnegative", at(p, "active_from"));
      sc.overrides.push_back(o);
    }
  }
  if (jc.contains("primal_dual_gains")) {
    const json& g = jc["primal_dual_gains"];
    only_keys(g, "controllers.primal_dual_gains", {"flow", "multiplier"});
    sc.primal_dual_gains.flow = number_or(g, "controllers.primal_dual_gains", "flow", 1.0);
    sc.primal_dual_gains.multiplier = number_or(g, "controllers.primal_dual_gains", "multiplier", 1.0);
  }

  // schedule
  const json& js = required(doc, "", "schedule");
  only_keys(js, "schedule", {"initial_loads", "events"});
  sc.initial_loads = vector_of(required(js, "schedule", "initial_loads"), "schedule.initial_loads");
  if (js.contains("events")) {
    const json& je = array(js["events"], "schedule.events");
    for (std::size_t k = 0; k < je.size(); ++k) {
      const std::string p = at("schedule.events", k);
      only_keys(je[k], p, {"time", "loads"});
      sc.events.push_back({number(je[k], p, "time"), vector_of(required(je[k], p, "loads"), at(p, "loads"))});
    }
  }

  if (doc.contains("integrator")) {
    const json& ji = doc["integrator"];
    only_keys(ji, "integrator", {"dt", "horizon", "divergence_bound"});
    sc.integrator.dt = number_or(ji, "integrator", "dt", sc.integrator.dt);
    sc.integrator.horizon = number_or(ji, "integrator", "horizon", sc.integrator.horizon);
    sc.integrator.divergence_bound =
        number_or(ji, "integrator", "divergence_bound", sc.integrator.divergence_bound);
  }
  if (doc.contains("analysis")) {
    const json& ja = doc["analysis"];
    only_keys(ja, "analysis", {"settling_threshold", "dissipation_slack", "neighborhood_radius"});
    sc.analysis.settling_threshold = number_or(ja, "analysis", "settling_threshold", sc.analysis.settling_threshold);
    sc.analysis.dissipation_slack = number_or(ja, "analysis", "dissipation_slack", sc.analysis.dissipation_slack);
    sc.analysis.neighborhood_radius = number_or(ja, "analysis", "neighborhood_radius", sc.analysis.neighborhood_radius);
    if (!(sc.analysis.settling_threshold > 0.0)) throw ValidationError("must be positive", "analysis.settling_threshold");
    if (sc.analysis.dissipation_slack < 0.0) throw ValidationError("must be nonnegative", "analysis.dissipation_slack");
    if (!(sc.analysis.neighborhood_radius > 0.0)) throw ValidationError("must be positive", "analysis.neighborhood_radius");
  }

  sc.validate();

  // Assumption 1 and 2: every scheduled operating point has a steady state,
  // and it should be secure.
  auto check_point = [&](const Vector& loads, const std::string& path) {
    Equilibrium eq;
    try {
      eq = equilibrium(sc, loads);
    } catch (const InfeasibleError& e) {
      throw ValidationError(std::string("no steady state: ") + e.what(), path);
    }
    if (!eq.secure) {
      const std::string msg = "steady state is not secure (some |eta| >= pi/2)";
      if (options.strict) throw ValidationError(msg, path);
      out.warnings.push_back(path + ": " + msg);
    }
  };
  check_point(sc.initial_loads, "schedule.initial_loads");
  for (std::size_t k = 0; k < sc.events.size(); ++k) {
    check_point(sc.events[k].loads, at(at("schedule.events", k), "loads"));
  }

  // Assumption 3 for second-order units under active control.
  if (sc.family != ControllerFamily::none) {
    for (std::size_t i = 0; i < n_gen; ++i) {
      const auto& gov = sc.units[i].governor;
      if (gov.order != 2) continue;
      const auto cert = droop_certificate(gov.governor_time, gov.turbine_time,
                                          sc.network.damping_gen()[static_cast<Eigen::Index>(i)],
                                          gov.droop_inverse);
      if (!cert.inside_interval) {
        std::string msg = "K^-1 = " + format_number(gov.droop_inverse) + " is outside the admissible interval";
        if (cert.interval_nonempty) {
          msg += " (" + format_number(cert.lower) + ", " + format_number(cert.upper) + ")";
        } else {
          msg += " (interval empty)";
        }
        const std::string path = at(at("units", i), "droop");
        if (options.strict) throw ValidationError(msg, path);
        out.warnings.push_back(path + ": " + msg);
      }
    }
  }

  for (const auto& o : sc.overrides) {
    if (o.gain_multiplier != 1.0) {
      out.notices.push_back("destabilization override: unit " + std::to_string(o.unit + 1) +
                            " frequency gain multiplied by " + format_number(o.gain_multiplier) +
                            " from t = " + format_number(o.active_from));
    }
  }

  out.document = doc;
  out.digest = fnv1a_hex(doc.dump());
  return out;
}

LoadedScenario load_scenario(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what(), "$");
  }
  return parse_scenario(doc, options);
}

}  // namespace olfc
