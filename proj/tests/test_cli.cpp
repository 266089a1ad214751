#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rhflow/commands.hpp"
#include "rhflow/config.hpp"
#include "rhflow/io.hpp"
#include "support.hpp"

using namespace rhflow;
using namespace rhflow::cli;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  rhtest::write_file(p, text);
  return p;
}

const char* kFlat =
    "scenario = flat_stationary\nn = 3\nalpha = 0\nt_end = 0.2\nm = 16\n"
    "snapshot_every = 20\n";

const char* kCylinder =
    "scenario = shrinking_cylinder\nn = 4\nalpha = 0\nt_end = 1\nm = 16\n"
    "blowup_threshold = 1e6\nsnapshot_every = 25\n";

const char* kPerturbed =
    "scenario = perturbed_cylinder\nn = 4\nalpha = 1\nt_end = 0.2\nm = 32\n"
    "snapshot_every = 4\nrecord_every = 3\n";

nlohmann::json manifest_of(const fs::path& dir) {
  return nlohmann::json::parse(rhtest::slurp(dir / "manifest.json"));
}

std::set<std::string> files_under(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), dir).generic_string());
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("flat run writes a complete manifest") {
  const auto dir = rhtest::scratch("cli_flat");
  std::ostringstream out, err;
  const int rc = cmd_run(write_config(dir, kFlat).string(), (dir / "out").string(), out, err);
  CHECK(rc == 0);
  const auto m = manifest_of(dir / "out");
  CHECK(m["termination"] == "reached_T_end");
  CHECK(m["version"] == RHFLOW_VERSION);
  CHECK(m["config"]["scenario"] == "flat_stationary");
  std::set<std::string> listed;
  for (const auto& a : m["artifacts"]) listed.insert(a.get<std::string>());
  auto present = files_under(dir / "out");
  present.erase("manifest.json");
  CHECK(listed == present);

  std::istringstream ts(rhtest::slurp(dir / "out" / "timeseries.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(ts, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["min_S"] == 0.0);
    CHECK(j["max_rm"] == 0.0);
    CHECK(j["max_ric"] == 0.0);
    ++n;
  }
  CHECK(n == m["summary"]["records"].get<std::size_t>());
}

TEST_CASE("cylinder run stops at the blow-up threshold near 1/4") {
  const auto dir = rhtest::scratch("cli_cyl");
  std::ostringstream out, err;
  CHECK(cmd_run(write_config(dir, kCylinder).string(), (dir / "out").string(), out, err) == 0);
  const auto m = manifest_of(dir / "out");
  CHECK(m["termination"] == "blowup_threshold");
  CHECK(rhtest::rel(m["summary"]["t_final"].get<double>(), 0.25) <= 0.01);
}

TEST_CASE("config errors exit nonzero and name the field") {
  const auto dir = rhtest::scratch("cli_bad");
  std::ostringstream out, err;
  const auto cfg = write_config(dir, "scenario = torus_list\nn = 2\nt_end = 1\nm = 16\n");
  CHECK(cmd_run(cfg.string(), (dir / "out").string(), out, err) == kExitBadInput);
  CHECK(err.str().find("alpha") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));

  std::ostringstream err2;
  CHECK(cmd_run((dir / "nope.cfg").string(), (dir / "out").string(), out, err2) ==
        kExitBadInput);
}

TEST_CASE("unwritable output exits nonzero") {
  const auto dir = rhtest::scratch("cli_unwritable");
  rhtest::write_file(dir / "blocker", "a file, not a directory\n");
  std::ostringstream out, err;
  CHECK(cmd_run(write_config(dir, kFlat).string(), (dir / "blocker" / "out").string(),
                out, err) == kExitIo);
}

TEST_CASE("reruns are byte-identical") {
  const auto dir = rhtest::scratch("cli_determinism");
  const auto cfg = write_config(dir, kPerturbed);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), (dir / "a").string(), out, err) == 0);
  REQUIRE(cmd_run(cfg.string(), (dir / "b").string(), out, err) == 0);
  CHECK(rhtest::slurp(dir / "a" / "timeseries.jsonl") ==
        rhtest::slurp(dir / "b" / "timeseries.jsonl"));
  CHECK(rhtest::slurp(dir / "a" / "manifest.json") ==
        rhtest::slurp(dir / "b" / "manifest.json"));
}

TEST_CASE("interrupted run resumes to the uninterrupted result") {
  const auto dir = rhtest::scratch("cli_resume");
  const auto cfg = write_config(dir, kPerturbed);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), (dir / "full").string(), out, err) == 0);
  const auto full = manifest_of(dir / "full");
  const auto steps = full["summary"]["steps"].get<std::size_t>();
  REQUIRE(steps > 10);

  REQUIRE(cmd_run(cfg.string(), (dir / "part").string(), out, err, steps / 2) == 0);
  CHECK_FALSE(fs::exists(dir / "part" / "manifest.json"));
  CHECK(fs::exists(dir / "part" / "checkpoint.txt"));
  // Simulate a crash that left extra bytes after the checkpoint.
  {
    std::ofstream junk(dir / "part" / "timeseries.jsonl", std::ios::app);
    junk << "{\"partial\":";
  }
  REQUIRE(cmd_resume((dir / "part" / "checkpoint.txt").string(), out, err) == 0);
  CHECK(rhtest::slurp(dir / "part" / "timeseries.jsonl") ==
        rhtest::slurp(dir / "full" / "timeseries.jsonl"));
  CHECK(files_under(dir / "part") == files_under(dir / "full"));
  for (const auto& a : full["artifacts"]) {
    const std::string name = a.get<std::string>();
    if (name == "checkpoint.txt") continue;
    CHECK_MESSAGE(rhtest::slurp(dir / "part" / name) == rhtest::slurp(dir / "full" / name),
                  name);
  }
  auto mp = manifest_of(dir / "part");
  CHECK(mp["summary"] == full["summary"]);
  CHECK(mp["artifacts"] == full["artifacts"]);

  std::ostringstream out2;
  CHECK(cmd_resume((dir / "part" / "checkpoint.txt").string(), out2, err) == 0);
  CHECK(out2.str().find("already complete") != std::string::npos);
}

TEST_CASE("corrupt checkpoint exits nonzero") {
  const auto dir = rhtest::scratch("cli_corrupt");
  const auto cfg = write_config(dir, kPerturbed);
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg.string(), (dir / "run").string(), out, err, 5) == 0);
  std::string text = rhtest::slurp(dir / "run" / "checkpoint.txt");
  text[text.size() / 3] = text[text.size() / 3] == '1' ? '2' : '1';
  rhtest::write_file(dir / "run" / "checkpoint.txt", text);
  CHECK(cmd_resume((dir / "run" / "checkpoint.txt").string(), out, err) == kExitBadInput);
  CHECK(cmd_resume((dir / "missing.txt").string(), out, err) == kExitBadInput);
}

TEST_CASE("homogeneous run") {
  const auto dir = rhtest::scratch("cli_sphere");
  const auto cfg = write_config(dir, "scenario = shrinking_sphere\nn = 3\nalpha = 0\nt_end = 1\n");
  std::ostringstream out, err;
  CHECK(cmd_run(cfg.string(), (dir / "out").string(), out, err) == 0);
  const auto m = manifest_of(dir / "out");
  CHECK(m["termination"] == "blowup_threshold");
  CHECK(rhtest::rel(m["summary"]["t_final"].get<double>(), 0.25) <= 0.01);
  CHECK(cmd_run(cfg.string(), (dir / "out2").string(), out, err, 3) == kExitBadInput);
}

TEST_CASE("verify with an empty scenario set") {
  const auto dir = rhtest::scratch("cli_verify_empty");
  VerifyOptions opt;
  opt.out_dir = (dir / "v").string();
  std::ostringstream out, err;
  CHECK(cmd_verify(opt, out, err) == 0);
  const auto j = nlohmann::json::parse(rhtest::slurp(dir / "v" / "summary.json"));
  CHECK(j["checks"].empty());
  CHECK(j["all_pass"] == true);
}

TEST_CASE("default suite passes") {
  const auto dir = rhtest::scratch("cli_verify");
  VerifyOptions opt;
  opt.scenarios = all_scenarios();
  opt.out_dir = (dir / "v").string();
  std::ostringstream out, err;
  CHECK(cmd_verify(opt, out, err) == 0);
  INFO(out.str());
  for (auto id : all_scenarios()) {
    CHECK(fs::exists(dir / "v" / to_string(id) / "checks.json"));
  }
}

TEST_CASE("injected alpha sign error is caught by the volume check") {
  VerifyOptions opt;
  opt.scenarios = {ScenarioId::torus_list, ScenarioId::perturbed_torus};
  opt.flip_alpha_sign = true;
  const auto checks = verify_suite(opt);
  bool volume_failed = false;
  for (const auto& c : checks) {
    if (c.check == "volume_derivative_rel" && !c.pass) volume_failed = true;
  }
  CHECK(volume_failed);
  std::ostringstream out, err;
  CHECK(cmd_verify(opt, out, err) != 0);
}

TEST_CASE("convergence studies") {
  ConvergeOptions co;
  co.scenario = ScenarioId::shrinking_cylinder;
  co.m = 8;
  auto rep = converge_study(co);
  CHECK(rep.temporal.min_order() >= 3.8);
  CHECK(rep.spatial.exact);

  co.scenario = ScenarioId::perturbed_cylinder;
  co.m = 0;
  rep = converge_study(co);
  CHECK(rep.spatial.min_order() >= 1.9);
  CHECK(rep.s_residual.min_order() >= 1.9);

  for (auto id : {ScenarioId::torus_list, ScenarioId::perturbed_torus}) {
    co.scenario = id;
    rep = converge_study(co);
    CHECK(rep.temporal.orders.size() == 2);
    CHECK(rep.temporal.min_order() >= 3.8);
  }

  co.scenario = ScenarioId::flat_stationary;
  rep = converge_study(co);
  CHECK(rep.temporal.exact);
  CHECK(rep.spatial.exact);
  CHECK(rep.s_residual.exact);

  co.scenario = ScenarioId::shrinking_sphere;
  rep = converge_study(co);
  CHECK_FALSE(rep.spatial.applicable);

  co.scenario = ScenarioId::shrinking_cylinder;
  co.t_end = 0.3;
  std::ostringstream out, err;
  CHECK(cmd_converge(co, "", out, err) == kExitBadInput);
}

TEST_CASE("scenario lists") {
  CHECK(parse_scenario_list("").empty());
  CHECK(parse_scenario_list("all").size() == all_scenarios().size());
  const auto two = parse_scenario_list("torus_list, flat_stationary");
  REQUIRE(two.size() == 2);
  CHECK(two[1] == ScenarioId::flat_stationary);
  CHECK_THROWS(parse_scenario_list("torus_list,nope"));
}

}  // TEST_SUITE
