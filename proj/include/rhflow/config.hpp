#pragma once

// Run configuration: a plain `key = value` text file, one entry per line,
// `#` starts a comment. See docs/config.md for the full key list.

#include <cstddef>
#include <stdexcept>
#include <string>

#include "rhflow/flow.hpp"
#include "rhflow/oracles.hpp"

namespace rhflow {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, int line, const std::string& what);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

struct MonitorFlags {
  bool gradient = true;
  bool distortion = true;
  bool volume = true;
  bool norms = true;
  bool phi = true;
};

struct RunConfig {
  Scenario scenario;
  FlowConfig flow;
  MonitorFlags monitors;
  std::size_t snapshot_every = 0;  // 0: final snapshot only
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const RunConfig& config);

}  // namespace rhflow
