#include "rhflow/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rhflow::io {

using nlohmann::ordered_json;

namespace {

// Plain numbers in the time series; non-finite values become null.
ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

#define RHFLOW_RECORD_FIELDS(X) \
  X(t) X(dt) X(min_S) X(max_S) X(max_R) X(max_abs_R) X(max_grad_phi_sq) \
  X(max_ric) X(max_rm) X(max_weyl) X(phi_min) X(phi_max) X(length)      \
  X(volume) X(dvdt_integrand) X(dvdt_residual) X(dvdt_rel_residual)     \
  X(c_meas) X(c_vol) X(sup_R) X(min_S0) X(grad_margin) X(rm_ratio)      \
  X(norm_R_raw) X(norm_W_raw)

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) {
    throw FormatError(std::string("unexpected end of data reading ") + what);
  }
  return tok;
}

void expect(std::istream& in, const std::string& word) {
  const std::string tok = next_token(in, word.c_str());
  if (tok != word) {
    throw FormatError("expected '" + word + "', found '" + tok + "'");
  }
}

long parse_long(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0') {
    throw FormatError("not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace

ordered_json record_to_json(const MonitorRecord& r, const MonitorFlags& mon) {
  ordered_json j;
  j["step"] = r.step;
  j["t"] = num(r.t);
  j["dt"] = num(r.dt);
  j["min_S"] = num(r.min_S);
  j["max_S"] = num(r.max_S);
  j["max_R"] = num(r.max_R);
  j["max_rm"] = num(r.max_rm);
  j["max_ric"] = num(r.max_ric);
  j["rm_ratio"] = num(r.rm_ratio);
  j["max_grad_phi_sq"] = num(r.max_grad_phi_sq);
  if (mon.gradient) j["grad_margin"] = num(r.grad_margin);
  if (mon.phi && r.scalar_target) {
    j["phi_min"] = num(r.phi_min);
    j["phi_max"] = num(r.phi_max);
  }
  j["length"] = num(r.length);
  j["volume"] = num(r.volume);
  if (mon.distortion) j["c_meas"] = num(r.c_meas);
  if (mon.volume) {
    j["dvdt_integrand"] = num(r.dvdt_integrand);
    j["dvdt_residual"] = num(r.dvdt_residual);
    j["dvdt_rel_residual"] = num(r.dvdt_rel_residual);
    j["c_vol"] = num(r.c_vol);
  }
  if (mon.norms) {
    j["norm_R_raw"] = num(r.norm_R_raw);
    j["norm_W_raw"] = num(r.norm_W_raw);
  }
  return j;
}

ordered_json record_to_full_json(const MonitorRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["scalar_target"] = r.scalar_target;
#define X(name) j[#name] = hexfloat(r.name);
  RHFLOW_RECORD_FIELDS(X)
#undef X
  return j;
}

MonitorRecord record_from_full_json(const ordered_json& j) {
  MonitorRecord r;
  try {
    r.step = j.at("step").get<std::size_t>();
    r.scalar_target = j.at("scalar_target").get<bool>();
#define X(name) r.name = parse_hexfloat(j.at(#name).get<std::string>());
    RHFLOW_RECORD_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad monitor record: ") + e.what());
  }
  return r;
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw FormatError("not a number: '" + s + "'");
  }
  return v;
}

void write_snapshot(std::ostream& out, const WarpedState& s) {
  out << "rhflow-snapshot 1\n"
      << "n " << s.n << "\n"
      << "fiber " << to_string(s.fiber) << "\n"
      << "alpha " << hexfloat(s.alpha) << "\n"
      << "winding " << s.winding << "\n"
      << "t " << hexfloat(s.t) << "\n"
      << "m " << s.size() << "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << hexfloat(s.f[i]) << ' ' << hexfloat(s.psi[i]) << ' '
        << hexfloat(s.phi_per[i]) << '\n';
  }
}

WarpedState read_snapshot(std::istream& in) {
  expect(in, "rhflow-snapshot");
  if (next_token(in, "version") != "1") {
    throw FormatError("unsupported snapshot version");
  }
  WarpedState s;
  expect(in, "n");
  s.n = static_cast<int>(parse_long(next_token(in, "n")));
  expect(in, "fiber");
  try {
    s.fiber = fiber_kind_from_string(next_token(in, "fiber"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  expect(in, "alpha");
  s.alpha = parse_hexfloat(next_token(in, "alpha"));
  expect(in, "winding");
  s.winding = parse_long(next_token(in, "winding"));
  expect(in, "t");
  s.t = parse_hexfloat(next_token(in, "t"));
  expect(in, "m");
  const long m = parse_long(next_token(in, "m"));
  if (m < 8 || m > (1L << 26)) throw FormatError("bad grid size");
  const auto um = static_cast<std::size_t>(m);
  s.f.resize(um);
  s.psi.resize(um);
  s.phi_per.resize(um);
  for (std::size_t i = 0; i < um; ++i) {
    s.f[i] = parse_hexfloat(next_token(in, "f"));
    s.psi[i] = parse_hexfloat(next_token(in, "psi"));
    s.phi_per[i] = parse_hexfloat(next_token(in, "phi_per"));
  }
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return s;
}

void save_snapshot(const std::string& path, const WarpedState& state) {
  std::ostringstream out;
  write_snapshot(out, state);
  write_atomic(path, out.str());
}

WarpedState load_snapshot(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_snapshot(in);
}

void write_homogeneous_snapshot(std::ostream& out, const HomogeneousState& s) {
  out << "rhflow-homogeneous 1\n"
      << "alpha " << hexfloat(s.alpha) << "\n"
      << "t " << hexfloat(s.t) << "\n"
      << "factors " << s.factors.size() << "\n";
  for (const auto& fac : s.factors) {
    out << (fac.kind == FactorKind::round_sphere ? "round_sphere" : "flat_circle")
        << ' ' << fac.dimension << ' ' << hexfloat(fac.coefficient) << ' '
        << hexfloat(fac.slope) << '\n';
  }
}

void save_homogeneous_snapshot(const std::string& path,
                               const HomogeneousState& state) {
  std::ostringstream out;
  write_homogeneous_snapshot(out, state);
  write_atomic(path, out.str());
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checkpoint_to_text(const Checkpoint& cp) {
  std::ostringstream out;
  out << "rhflow-checkpoint 1\n"
      << "completed " << (cp.completed ? 1 : 0) << "\n"
      << "termination " << (cp.termination.empty() ? "-" : cp.termination) << "\n"
      << "records " << cp.records << "\n"
      << "timeseries_bytes " << cp.timeseries_bytes << "\n"
      << "steps " << cp.steps << "\n"
      << "rejected " << cp.rejected << "\n"
      << "snapshots " << cp.snapshots.size() << "\n";
  for (const auto& s : cp.snapshots) out << s << "\n";
  out << "output_dir " << ordered_json(cp.output_dir).dump() << "\n";
  out << "config_lines " << std::count(cp.config_text.begin(), cp.config_text.end(), '\n')
      << "\n"
      << cp.config_text;
  const MonitorAccumulator& a = cp.accumulator;
  out << "accumulator " << (a.started ? 1 : 0);
  for (double v : {a.epsilon0, a.prev_t, a.prev_volume, a.prev_dvdt, a.prev_R_pow,
                   a.prev_W_pow, a.c_meas, a.c_vol, a.sup_R, a.min_S0,
                   a.norm_R_raw, a.norm_W_raw}) {
    out << ' ' << hexfloat(v);
  }
  out << "\n";
  out << "last_record " << record_to_full_json(cp.last_record).dump() << "\n";
  write_snapshot(out, cp.state);
  std::string body = out.str();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  body += "checksum ";
  body += buf;
  body += "\n";
  return body;
}

Checkpoint checkpoint_from_text(const std::string& text) {
  const std::string tag = "checksum ";
  const auto pos = text.rfind(tag);
  if (pos == std::string::npos || (pos > 0 && text[pos - 1] != '\n')) {
    throw FormatError("checkpoint has no checksum");
  }
  const std::string body = text.substr(0, pos);
  std::string sum = text.substr(pos + tag.size());
  while (!sum.empty() && (sum.back() == '\n' || sum.back() == '\r')) sum.pop_back();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  if (sum != buf) throw FormatError("checkpoint checksum mismatch");

  std::istringstream in(body);
  Checkpoint cp;
  expect(in, "rhflow-checkpoint");
  if (next_token(in, "version") != "1") {
    throw FormatError("unsupported checkpoint version");
  }
  expect(in, "completed");
  cp.completed = parse_long(next_token(in, "completed")) != 0;
  expect(in, "termination");
  cp.termination = next_token(in, "termination");
  if (cp.termination == "-") cp.termination.clear();
  expect(in, "records");
  cp.records = static_cast<std::size_t>(parse_long(next_token(in, "records")));
  expect(in, "timeseries_bytes");
  cp.timeseries_bytes =
      static_cast<std::uint64_t>(parse_long(next_token(in, "timeseries_bytes")));
  expect(in, "steps");
  cp.steps = static_cast<std::size_t>(parse_long(next_token(in, "steps")));
  expect(in, "rejected");
  cp.rejected = static_cast<std::size_t>(parse_long(next_token(in, "rejected")));
  expect(in, "snapshots");
  const long ns = parse_long(next_token(in, "snapshots"));
  for (long k = 0; k < ns; ++k) cp.snapshots.push_back(next_token(in, "snapshot"));
  expect(in, "output_dir");
  {
    std::string rest;
    std::getline(in, rest);
    try {
      cp.output_dir = ordered_json::parse(rest).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError("bad output_dir");
    }
  }
  expect(in, "config_lines");
  const long nl = parse_long(next_token(in, "config_lines"));
  {
    std::string rest;
    std::getline(in, rest);
    for (long k = 0; k < nl; ++k) {
      std::string line;
      if (!std::getline(in, line)) throw FormatError("truncated config block");
      cp.config_text += line + "\n";
    }
  }
  expect(in, "accumulator");
  MonitorAccumulator& a = cp.accumulator;
  a.started = parse_long(next_token(in, "started")) != 0;
  for (double* v : {&a.epsilon0, &a.prev_t, &a.prev_volume, &a.prev_dvdt,
                    &a.prev_R_pow, &a.prev_W_pow, &a.c_meas, &a.c_vol, &a.sup_R,
                    &a.min_S0, &a.norm_R_raw, &a.norm_W_raw}) {
    *v = parse_hexfloat(next_token(in, "accumulator"));
  }
  expect(in, "last_record");
  {
    std::string rest;
    std::getline(in, rest);
    try {
      cp.last_record = record_from_full_json(ordered_json::parse(rest));
    } catch (const nlohmann::json::exception&) {
      throw FormatError("bad last_record");
    }
  }
  cp.state = read_snapshot(in);
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  write_atomic(path, checkpoint_to_text(cp));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_text(read_file(path));
}

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename to '" + path + "': " + ec.message());
}

}  // namespace rhflow::io
