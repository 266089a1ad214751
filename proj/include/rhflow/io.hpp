#pragma once

// On-disk formats: JSON-lines time series, hexfloat text snapshots,
// checksummed checkpoints and the run manifest. docs/formats.md has the
// schemas.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhflow/config.hpp"
#include "rhflow/flow.hpp"
#include "rhflow/monitor.hpp"

namespace rhflow::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json record_to_json(const MonitorRecord& r,
                                      const MonitorFlags& monitors);

/// Exact round trip of every MonitorRecord field (used by checkpoints).
nlohmann::ordered_json record_to_full_json(const MonitorRecord& r);
MonitorRecord record_from_full_json(const nlohmann::ordered_json& j);

std::string hexfloat(double v);
double parse_hexfloat(const std::string& s);

void write_snapshot(std::ostream& out, const WarpedState& state);
WarpedState read_snapshot(std::istream& in);
void save_snapshot(const std::string& path, const WarpedState& state);
WarpedState load_snapshot(const std::string& path);

void write_homogeneous_snapshot(std::ostream& out, const HomogeneousState& state);
void save_homogeneous_snapshot(const std::string& path,
                               const HomogeneousState& state);

struct Checkpoint {
  bool completed = false;
  std::string output_dir;
  std::size_t records = 0;
  std::uint64_t timeseries_bytes = 0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::vector<std::string> snapshots;  // relative to output_dir
  std::string termination;             // empty while running
  std::string config_text;
  WarpedState state;
  MonitorAccumulator accumulator;
  MonitorRecord last_record;
};

std::uint64_t fnv1a64(const std::string& data);

std::string checkpoint_to_text(const Checkpoint& cp);
/// Throws FormatError on a malformed or checksum-mismatched checkpoint.
Checkpoint checkpoint_from_text(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

/// Write `contents` to `path` through a temporary file and rename.
void write_atomic(const std::string& path, const std::string& contents);

}  // namespace rhflow::io
