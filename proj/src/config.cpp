#include "rhflow/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rhflow {

ConfigError::ConfigError(const std::string& field, int line,
                         const std::string& what)
    : std::runtime_error(
          (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
          "field '" + field + "': " + what),
      field_(field),
      line_(line) {}

namespace {

struct Entry {
  std::string value;
  int line;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Fields {
 public:
  explicit Fields(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(line, lineno, "expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("", lineno, "empty key");
      if (value.empty()) throw ConfigError(key, lineno, "empty value");
      if (entries_.count(key)) throw ConfigError(key, lineno, "duplicate key");
      entries_[key] = Entry{value, lineno};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const Entry& require(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(key, 0, "missing required field");
    used_.insert(key);
    return it->second;
  }

  std::string str(const std::string& key) { return require(key).value; }

  double real(const std::string& key) {
    const Entry& e = require(key);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (errno == ERANGE || end == e.value.c_str() || *end != '\0' ||
        !std::isfinite(v)) {
      throw ConfigError(key, e.line, "not a finite number: '" + e.value + "'");
    }
    return v;
  }

  long integer(const std::string& key) {
    const Entry& e = require(key);
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(e.value.c_str(), &end, 10);
    if (errno == ERANGE || end == e.value.c_str() || *end != '\0') {
      throw ConfigError(key, e.line, "not an integer: '" + e.value + "'");
    }
    return v;
  }

  std::size_t count(const std::string& key) {
    const long v = integer(key);
    if (v < 0) throw ConfigError(key, entries_[key].line, "must be >= 0");
    return static_cast<std::size_t>(v);
  }

  int line(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void reject_unknown() const {
    for (const auto& [k, e] : entries_) {
      if (!used_.count(k)) throw ConfigError(k, e.line, "unknown field");
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

MonitorFlags parse_monitors(const std::string& value, int line) {
  MonitorFlags flags{false, false, false, false, false};
  if (value == "all") return MonitorFlags{};
  if (value == "none") return flags;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item == "gradient") flags.gradient = true;
    else if (item == "distortion") flags.distortion = true;
    else if (item == "volume") flags.volume = true;
    else if (item == "norms") flags.norms = true;
    else if (item == "phi") flags.phi = true;
    else throw ConfigError("monitors", line, "unknown monitor '" + item + "'");
  }
  return flags;
}

std::string monitors_text(const MonitorFlags& f) {
  if (f.gradient && f.distortion && f.volume && f.norms && f.phi) return "all";
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(f.gradient, "gradient");
  add(f.distortion, "distortion");
  add(f.volume, "volume");
  add(f.norms, "norms");
  add(f.phi, "phi");
  return out.empty() ? "none" : out;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Fields in(text);
  RunConfig c;
  const std::string name = in.str("scenario");
  try {
    c.scenario = default_scenario(scenario_from_string(name));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", in.line("scenario"), e.what());
  }
  c.flow.scenario = name;
  c.scenario.n = static_cast<int>(in.integer("n"));
  c.scenario.alpha = in.real("alpha");
  c.flow.t_end = in.real("t_end");
  if (!c.scenario.homogeneous() || in.has("m")) c.scenario.m = in.count("m");

  if (in.has("fiber")) {
    const std::string fiber = in.str("fiber");
    if (fiber != to_string(c.scenario.fiber())) {
      throw ConfigError("fiber", in.line("fiber"),
                        "scenario " + name + " uses fiber " +
                            to_string(c.scenario.fiber()));
    }
  }
  if (in.has("a0")) c.scenario.a0 = in.real("a0");
  if (in.has("psi0")) c.scenario.psi0 = in.real("psi0");
  if (in.has("psi_amp")) c.scenario.psi_amp = in.real("psi_amp");
  if (in.has("phi_amp")) c.scenario.phi_amp = in.real("phi_amp");
  if (in.has("winding")) c.scenario.winding = in.integer("winding");
  if (in.has("c_cfl")) c.flow.c_cfl = in.real("c_cfl");
  if (in.has("dt_max")) c.flow.dt_max = in.real("dt_max");
  if (in.has("blowup_threshold")) c.flow.blowup_threshold = in.real("blowup_threshold");
  if (in.has("epsilon0")) c.flow.epsilon0 = in.real("epsilon0");
  if (in.has("record_every")) c.flow.record_every = in.count("record_every");
  if (in.has("snapshot_every")) c.snapshot_every = in.count("snapshot_every");
  if (in.has("max_retries")) c.flow.max_retries = static_cast<int>(in.integer("max_retries"));
  if (in.has("monitors")) {
    c.monitors = parse_monitors(in.str("monitors"), in.line("monitors"));
  }
  in.reject_unknown();

  try {
    c.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", in.line("scenario"), e.what());
  }
  try {
    c.flow.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("flow", 0, e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("path", 0, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  const Scenario& s = c.scenario;
  out << "scenario = " << to_string(s.id) << "\n"
      << "n = " << s.n << "\n"
      << "alpha = " << real_text(s.alpha) << "\n"
      << "t_end = " << real_text(c.flow.t_end) << "\n"
      << "m = " << s.m << "\n"
      << "fiber = " << to_string(s.fiber()) << "\n"
      << "a0 = " << real_text(s.a0) << "\n"
      << "psi0 = " << real_text(s.psi0) << "\n"
      << "psi_amp = " << real_text(s.psi_amp) << "\n"
      << "phi_amp = " << real_text(s.phi_amp) << "\n"
      << "winding = " << s.winding << "\n"
      << "c_cfl = " << real_text(c.flow.c_cfl) << "\n"
      << "dt_max = " << real_text(c.flow.dt_max) << "\n"
      << "blowup_threshold = " << real_text(c.flow.blowup_threshold) << "\n"
      << "epsilon0 = " << real_text(c.flow.epsilon0) << "\n"
      << "record_every = " << c.flow.record_every << "\n"
      << "snapshot_every = " << c.snapshot_every << "\n"
      << "max_retries = " << c.flow.max_retries << "\n"
      << "monitors = " << monitors_text(c.monitors) << "\n";
  return out.str();
}

}  // namespace rhflow
