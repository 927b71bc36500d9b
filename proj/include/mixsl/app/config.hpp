#pragma once

// Scenario configuration: INI text with sections, full or desk presets,
// unknown keys rejected, resolved configuration echoed back as INI.

#include <charconv>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mixsl/diagnostics.hpp"
#include "mixsl/errors.hpp"
#include "mixsl/models.hpp"
#include "mixsl/transport.hpp"

namespace mixsl::app {

enum class Scenario { kSteady, kGcPersist, kGcPerturb, kDkItg };
enum class MethodChoice { kSl, kFd, kMixed };

inline Scenario parse_scenario(const std::string& s) {
  if (s == "steady") return Scenario::kSteady;
  if (s == "gc-persist") return Scenario::kGcPersist;
  if (s == "gc-perturb") return Scenario::kGcPerturb;
  if (s == "dk-itg") return Scenario::kDkItg;
  throw ConfigError("unknown scenario '" + s + "' (expected steady, gc-persist, gc-perturb, dk-itg)");
}

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kSteady: return "steady";
    case Scenario::kGcPersist: return "gc-persist";
    case Scenario::kGcPerturb: return "gc-perturb";
    case Scenario::kDkItg: return "dk-itg";
  }
  return "?";
}

struct ScenarioConfig {
  Scenario scenario = Scenario::kSteady;
  std::string preset = "full";

  // [run]
  double t_end = 0.0;
  double dt = 0.001;  // FD step; SL steps use dt * dt_sl_factor
  double dt_sl_factor = 4.0;
  MethodChoice method = MethodChoice::kFd;
  double cfl = 0.5;
  FluxForm flux_form = FluxForm::kInterfaceSpeed;
  std::size_t diag_interval = 1;
  std::size_t snapshot_interval = 0;  // steps; 0 writes only the final state
  int threads = 1;
  std::string output_dir = "output";
  std::string resume;

  // [mesh]
  std::size_t nx = 240, ny = 440, nz = 32, nv = 65;

  // [steady]
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  std::string phi0_file;  // steady potential snapshot; empty recomputes it

  // [perturb]
  PerturbParams perturb;

  // [itg]
  ItgParams itg;
  ProfileParams profiles;

  double dt_sl() const { return dt * dt_sl_factor; }
};

namespace detail {

inline std::string method_name(MethodChoice m) {
  switch (m) {
    case MethodChoice::kSl: return "sl";
    case MethodChoice::kFd: return "fd";
    case MethodChoice::kMixed: return "mixed";
  }
  return "?";
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

// Shortest text that reads back to the same double.
inline std::string real_text(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct KeySpec {
  std::string section;
  std::string name;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
KeySpec real_key(std::string section, std::string name, T ScenarioConfig::*member) {
  const std::string full = section + "." + name;
  return {section, name,
          [member, full](ScenarioConfig& c, const std::string& v) { c.*member = to_real(full, v); },
          [member](const ScenarioConfig& c) { return real_text(c.*member); }};
}

template <class T>
KeySpec count_key(std::string section, std::string name, T ScenarioConfig::*member, long long min) {
  const std::string full = section + "." + name;
  return {section, name,
          [member, full, min](ScenarioConfig& c, const std::string& v) {
            const long long n = to_integer(full, v);
            if (n < min) throw ConfigError("key '" + full + "' must be >= " + std::to_string(min));
            c.*member = static_cast<T>(n);
          },
          [member](const ScenarioConfig& c) { return std::to_string(c.*member); }};
}

using RealRef = double& (*)(ScenarioConfig&);

inline KeySpec real_ref(std::string section, std::string name, RealRef ref) {
  const std::string full = section + "." + name;
  return {section, name, [ref, full](ScenarioConfig& c, const std::string& v) { ref(c) = to_real(full, v); },
          [ref](const ScenarioConfig& c) { return real_text(ref(const_cast<ScenarioConfig&>(c))); }};
}

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    t.push_back({"run", "preset", [](ScenarioConfig&, const std::string&) {},
                 [](const ScenarioConfig& c) { return c.preset; }});
    t.push_back(real_key("run", "t_end", &ScenarioConfig::t_end));
    t.push_back(real_key("run", "dt", &ScenarioConfig::dt));
    t.push_back(real_key("run", "dt_sl_factor", &ScenarioConfig::dt_sl_factor));
    t.push_back({"run", "method",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "sl") c.method = MethodChoice::kSl;
                   else if (v == "fd") c.method = MethodChoice::kFd;
                   else if (v == "mixed") c.method = MethodChoice::kMixed;
                   else throw ConfigError("key 'run.method': expected sl, fd or mixed, got '" + v + "'");
                 },
                 [](const ScenarioConfig& c) { return method_name(c.method); }});
    t.push_back(real_key("run", "cfl", &ScenarioConfig::cfl));
    t.push_back({"run", "flux_form",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "interface-speed") c.flux_form = FluxForm::kInterfaceSpeed;
                   else if (v == "upwind-product") c.flux_form = FluxForm::kUpwindProduct;
                   else if (v == "lax-friedrichs") c.flux_form = FluxForm::kLaxFriedrichs;
                   else throw ConfigError("key 'run.flux_form': expected interface-speed, upwind-product or lax-friedrichs");
                 },
                 [](const ScenarioConfig& c) { return std::string(to_string(c.flux_form)); }});
    t.push_back(count_key("run", "diag_interval", &ScenarioConfig::diag_interval, 1));
    t.push_back(count_key("run", "snapshot_interval", &ScenarioConfig::snapshot_interval, 0));
    t.push_back(count_key("run", "threads", &ScenarioConfig::threads, 1));
    t.push_back({"run", "output_dir", [](ScenarioConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const ScenarioConfig& c) { return c.output_dir; }});
    t.push_back({"run", "resume", [](ScenarioConfig& c, const std::string& v) { c.resume = v; },
                 [](const ScenarioConfig& c) { return c.resume; }});
    t.push_back(count_key("mesh", "nx", &ScenarioConfig::nx, 5));
    t.push_back(count_key("mesh", "ny", &ScenarioConfig::ny, 5));
    t.push_back(count_key("mesh", "nz", &ScenarioConfig::nz, 5));
    t.push_back(count_key("mesh", "nv", &ScenarioConfig::nv, 7));
    t.push_back(real_key("steady", "newton_tol", &ScenarioConfig::newton_tol));
    t.push_back(count_key("steady", "newton_max_iter", &ScenarioConfig::newton_max_iter, 1));
    t.push_back({"steady", "phi0_file", [](ScenarioConfig& c, const std::string& v) { c.phi0_file = v; },
                 [](const ScenarioConfig& c) { return c.phi0_file; }});
    t.push_back(real_ref("perturb", "epsilon", [](ScenarioConfig& c) -> double& { return c.perturb.epsilon; }));
    t.push_back({"perturb", "k",
                 [](ScenarioConfig& c, const std::string& v) { c.perturb.k = static_cast<int>(to_integer("perturb.k", v)); },
                 [](const ScenarioConfig& c) { return std::to_string(c.perturb.k); }});
    t.push_back(real_ref("perturb", "phi_p", [](ScenarioConfig& c) -> double& { return c.perturb.phi_p; }));
    t.push_back(real_ref("itg", "epsilon", [](ScenarioConfig& c) -> double& { return c.itg.epsilon; }));
    t.push_back({"itg", "m",
                 [](ScenarioConfig& c, const std::string& v) { c.itg.m = static_cast<int>(to_integer("itg.m", v)); },
                 [](const ScenarioConfig& c) { return std::to_string(c.itg.m); }});
    t.push_back({"itg", "n",
                 [](ScenarioConfig& c, const std::string& v) { c.itg.n = static_cast<int>(to_integer("itg.n", v)); },
                 [](const ScenarioConfig& c) { return std::to_string(c.itg.n); }});
    t.push_back(real_ref("itg", "length", [](ScenarioConfig& c) -> double& { return c.itg.length; }));
    t.push_back(real_ref("itg", "v_max", [](ScenarioConfig& c) -> double& { return c.itg.v_max; }));
    t.push_back(real_ref("itg", "box_half_width", [](ScenarioConfig& c) -> double& { return c.itg.box_half_width; }));
    t.push_back(real_ref("itg", "r_min", [](ScenarioConfig& c) -> double& { return c.profiles.r_min; }));
    t.push_back(real_ref("itg", "r_max", [](ScenarioConfig& c) -> double& { return c.profiles.r_max; }));
    t.push_back(real_ref("itg", "kappa_n0", [](ScenarioConfig& c) -> double& { return c.profiles.kappa_n0; }));
    t.push_back(real_ref("itg", "kappa_ti", [](ScenarioConfig& c) -> double& { return c.profiles.kappa_ti; }));
    t.push_back(real_ref("itg", "kappa_te", [](ScenarioConfig& c) -> double& { return c.profiles.kappa_te; }));
    t.push_back(real_ref("itg", "delta_r_n0", [](ScenarioConfig& c) -> double& { return c.profiles.delta_r_n0; }));
    t.push_back(real_ref("itg", "delta_r_ti", [](ScenarioConfig& c) -> double& { return c.profiles.delta_r_ti; }));
    t.push_back(real_ref("itg", "delta_r_te", [](ScenarioConfig& c) -> double& { return c.profiles.delta_r_te; }));
    return t;
  }();
  return table;
}

/// Sections consulted for bare (section-less) keys.
inline std::vector<std::string> scenario_sections(Scenario s) {
  switch (s) {
    case Scenario::kSteady:
    case Scenario::kGcPersist: return {"run", "mesh", "steady"};
    case Scenario::kGcPerturb: return {"run", "mesh", "steady", "perturb"};
    case Scenario::kDkItg: return {"run", "mesh", "itg"};
  }
  return {};
}

}  // namespace detail

/// Full-scale or desk-scale defaults for a scenario.
inline ScenarioConfig defaults(Scenario s, const std::string& preset) {
  if (preset != "full" && preset != "desk")
    throw ConfigError("key 'run.preset': expected full or desk, got '" + preset + "'");
  ScenarioConfig c;
  c.scenario = s;
  c.preset = preset;
  const bool desk = preset == "desk";
  switch (s) {
    case Scenario::kSteady:
      c.nx = desk ? 60 : 240;
      c.ny = desk ? 110 : 440;
      break;
    case Scenario::kGcPersist:
    case Scenario::kGcPerturb:
      c.nx = desk ? 60 : 240;
      c.ny = desk ? 110 : 440;
      c.dt = desk ? 0.005 : 0.001;
      c.method = MethodChoice::kFd;
      c.t_end = desk ? 10.0 : (s == Scenario::kGcPersist ? 100.0 : 300.0);
      c.diag_interval = desk ? 1 : 10;
      break;
    case Scenario::kDkItg:
      c.nx = desk ? 32 : 128;
      c.ny = desk ? 32 : 128;
      c.nz = desk ? 8 : 32;
      c.nv = desk ? 17 : 65;
      c.dt = 1.0;
      c.method = MethodChoice::kMixed;
      c.t_end = desk ? 2000.0 : 8000.0;
      c.diag_interval = desk ? 1 : 4;
      break;
  }
  return c;
}

/// Parses INI text for `scenario`. Throws ConfigError naming the line for
/// malformed input and the key for unknown or invalid entries.
inline ScenarioConfig parse_config(const std::string& text, Scenario scenario) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config parse error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto& table = detail::key_table();
  // (section, key) -> value, with bare keys resolved against the scenario.
  std::map<std::pair<std::string, std::string>, std::string> entries;
  auto known = [&](const std::string& sec, const std::string& key) {
    for (const auto& k : table)
      if (k.section == sec && k.name == key) return true;
    return false;
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      std::vector<std::string> hits;
      for (const auto& sec : detail::scenario_sections(scenario))
        if (known(sec, name)) hits.push_back(sec);
      if (hits.empty()) throw ConfigError("unknown config key '" + name + "'");
      if (hits.size() > 1) throw ConfigError("ambiguous config key '" + name + "'; put it in a section");
      entries[{hits.front(), name}] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!known(name, key)) throw ConfigError("unknown config key '" + name + "." + key + "'");
      entries[{name, key}] = leaf.data();
    }
  }
  std::string preset = "full";
  if (const auto it = entries.find({"run", "preset"}); it != entries.end()) preset = it->second;
  ScenarioConfig c = defaults(scenario, preset);
  for (const auto& k : table) {
    const auto it = entries.find({k.section, k.name});
    if (it != entries.end()) k.set(c, it->second);
  }
  if (!(c.dt > 0.0)) throw ConfigError("key 'run.dt' must be positive");
  if (!(c.dt_sl_factor > 0.0)) throw ConfigError("key 'run.dt_sl_factor' must be positive");
  if (!(c.cfl > 0.0)) throw ConfigError("key 'run.cfl' must be positive");
  if (c.t_end < 0.0) throw ConfigError("key 'run.t_end' must be nonnegative");
  return c;
}

/// Fully resolved configuration as INI text.
inline std::string echo_config(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "# scenario = " << to_string(c.scenario) << '\n';
  std::string section;
  for (const auto& k : detail::key_table()) {
    if (k.section != section) {
      section = k.section;
      out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(c) << '\n';
  }
  return out.str();
}

}  // namespace mixsl::app
