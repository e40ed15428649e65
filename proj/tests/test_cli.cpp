#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "async_lab/commands.hpp"
#include "async_lab/errors.hpp"
#include "async_lab/examples.hpp"
#include "async_lab/scenario_io.hpp"

using namespace async_lab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("async_lab_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

json integrator_doc() {
  return json::parse(R"({
    "name": "integrators",
    "mode": "broadcast",
    "model": {"A": [[0]], "B": [[1]]},
    "graph": {"n": 3, "edges": [[1, 2], [2, 3]]},
    "gain": [[1]],
    "schedule": {"h_min": 0.02, "h_max": 0.04, "tau_max": 0.01},
    "error_model": {"kind": "none"},
    "x0": [1, 2, 3],
    "horizon": 2,
    "seed": 5
  })");
}

}  // namespace

TEST(ScenarioIo, RoundTripIsIdentity) {
  std::vector<json> docs = {builtin_example_json(1), builtin_example_json(2),
                            builtin_example_json(3), integrator_doc()};
  json abstract = integrator_doc();
  abstract["mode"] = "abstract_coupled";
  abstract.erase("graph");
  abstract["coupling"] = {{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}};
  abstract["error_model"] = {{"kind", "multiplicative"}, {"omega", 0.02}};
  docs.push_back(abstract);
  json explicit_sched = integrator_doc();
  explicit_sched.erase("schedule");
  explicit_sched["schedules"] = json::array();
  for (int c = 0; c < 3; ++c) {
    explicit_sched["schedules"].push_back({{"instants", {0.0, 0.03, 0.06}}, {"delays", {0.0, 0.01, 0.0}}});
  }
  explicit_sched["input_delay"] = 0.002;
  explicit_sched["saturation"] = {{"rho_s", 2.0}};
  docs.push_back(explicit_sched);
  for (const json& d : docs) {
    const ScenarioFile f = parse_scenario(d);
    const json once = to_json(f);
    const json twice = to_json(parse_scenario(once));
    EXPECT_EQ(once, twice) << d.dump();
  }
}

TEST(ScenarioIo, UnknownKeyIsRejectedWithPath) {
  json d = integrator_doc();
  d["schedule"]["h_mn"] = 0.1;
  try {
    parse_scenario(d);
    FAIL() << "expected ScenarioError";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("h_mn"), std::string::npos);
  }
}

TEST(ScenarioIo, GainAndDesignAreExclusive) {
  json d = integrator_doc();
  d["design"] = {{"lambda", 1.0}, {"mu", 1.0}};
  EXPECT_THROW(parse_scenario(d), ScenarioError);
  d.erase("gain");
  EXPECT_NO_THROW(parse_scenario(d));
}

TEST(ScenarioIo, SeedMustBeNonNegativeInteger) {
  json d = integrator_doc();
  d["seed"] = -1;
  EXPECT_THROW(parse_scenario(d), ScenarioError);
  d["seed"] = 1.5;
  EXPECT_THROW(parse_scenario(d), ScenarioError);
}

TEST(ScenarioIo, ShippedScenariosMatchBuiltins) {
  for (int k = 1; k <= 3; ++k) {
    const fs::path p = fs::path(ASYNC_LAB_SOURCE_DIR) / "scenarios" / ("example" + std::to_string(k) + ".json");
    EXPECT_EQ(to_json(load_scenario(p)), to_json(builtin_example(k))) << p;
  }
}

TEST(Commands, DesignExampleOne) {
  const fs::path dir = scratch("design");
  const fs::path p = write_json(dir, "ex1.json", builtin_example_json(1));
  std::ostringstream out, err;
  ASSERT_EQ(cmd_design(p, out, err), exit_code::ok) << err.str();
  const json j = json::parse(out.str());
  EXPECT_NEAR(j["K"][0][0].get<double>(), 0.5626, 1e-3);
  EXPECT_NEAR(j["K"][0][1].get<double>(), 1.0633, 1e-3);
  EXPECT_TRUE(j.contains("P"));
  EXPECT_TRUE(j.contains("residual"));
}

TEST(Commands, DesignScalarIntegrator) {
  json d = integrator_doc();
  d.erase("gain");
  d["design"] = {{"lambda", 1.0}, {"mu", 1.0}};
  const fs::path p = write_json(scratch("design_scalar"), "s.json", d);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_design(p, out, err), exit_code::ok);
  EXPECT_NEAR(json::parse(out.str())["K"][0][0].get<double>(), 1.0, 1e-12);
}

TEST(Commands, DesignNotStabilizable) {
  const json d = {{"model", {{"A", {{1}}}, {"B", {{0}}}}}, {"design", {{"lambda", 1}, {"mu", 1}}}};
  const fs::path p = write_json(scratch("design_bad"), "s.json", d);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_design(p, out, err), exit_code::invalid);
  EXPECT_FALSE(err.str().empty());
}

TEST(Commands, BoundGoldens) {
  const fs::path dir = scratch("bound");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_bound(write_json(dir, "e2.json", builtin_example_json(2)), "3", out, err), exit_code::ok);
  EXPECT_NEAR(json::parse(out.str())["budget"].get<double>(), 0.0691, 1e-3);
  out.str("");
  ASSERT_EQ(cmd_bound(write_json(dir, "e1.json", builtin_example_json(1)), "c1", out, err), exit_code::ok);
  EXPECT_NEAR(json::parse(out.str())["budget"].get<double>(), 0.017, 0.002);
  out.str("");
  ASSERT_EQ(cmd_bound(write_json(dir, "e3.json", builtin_example_json(3)), "4", out, err), exit_code::ok);
  EXPECT_NEAR(json::parse(out.str())["budget"].get<double>(), 0.4535, 1e-2);
}

TEST(Commands, BoundReportShape) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_bound(write_json(scratch("shape"), "e1.json", builtin_example_json(1)), "2", out, err),
            exit_code::ok);
  const json j = json::parse(out.str());
  for (const char* k : {"feasible", "budget", "witness", "margin", "diagnostics"}) EXPECT_TRUE(j.contains(k)) << k;
  for (const char* k : {"alpha", "beta", "gamma", "eta", "theta"}) EXPECT_TRUE(j["witness"].contains(k)) << k;
}

TEST(Commands, BoundInfeasibleAndInvalid) {
  const fs::path dir = scratch("bound_exit");
  json d = builtin_example_json(1);
  d["bound"] = {{"mu", 1.0}, {"omega", 2.0}, {"sigma_G", 1.0}, {"sigma_K", 1.0}};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_bound(write_json(dir, "inf.json", d), "1", out, err), exit_code::infeasible);
  json missing = integrator_doc();
  EXPECT_EQ(cmd_bound(write_json(dir, "missing.json", missing), "4", out, err), exit_code::invalid);
  EXPECT_EQ(cmd_bound(write_json(dir, "x.json", integrator_doc()), "7", out, err), exit_code::invalid);
  EXPECT_EQ(cmd_bound(dir / "does_not_exist.json", "3", out, err), exit_code::invalid);
}

TEST(Commands, RunWritesDeclaredFiles) {
  const fs::path dir = scratch("run");
  const fs::path p = write_json(dir, "s.json", integrator_doc());
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(p, dir / "out", {}, out, err), exit_code::ok) << err.str();
  const json report = json::parse(out.str());
  for (const auto& f : report["outputs"]) EXPECT_TRUE(fs::exists(f.get<std::string>())) << f;
  std::ifstream csv(dir / "out" / "trace.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,x_1_1,x_2_1,x_3_1,delta_sq");
  const json events = json::parse(std::ifstream(dir / "out" / "events.json"));
  EXPECT_TRUE(events.contains("events"));
  EXPECT_TRUE(report.contains("scenario_digest"));
  EXPECT_TRUE(report.contains("final_delta_sq"));
}

TEST(Commands, RunEdgeModeHasVColumn) {
  const fs::path dir = scratch("run_edge");
  json d = integrator_doc();
  d["mode"] = "relative_edges";
  d["P"] = {{1}};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_json(dir, "s.json", d), dir / "out", {}, out, err), exit_code::ok) << err.str();
  std::ifstream csv(dir / "out" / "trace.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,x_1_1,x_2_1,x_3_1,delta_sq,V");
}

TEST(Commands, RunZeroHorizon) {
  const fs::path dir = scratch("run_zero");
  json d = integrator_doc();
  d["horizon"] = 0;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_json(dir, "s.json", d), dir / "out", {}, out, err), exit_code::ok);
  std::ifstream csv(dir / "out" / "trace.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2);  // header and the initial state
}

TEST(Commands, RunOversizedPeriodWarns) {
  const fs::path dir = scratch("run_big");
  json d = builtin_example_json(1);
  d["schedule"] = {{"h_min", 0.06}, {"h_max", 0.17}, {"tau_max", 0.05}};
  d["horizon"] = 10;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_json(dir, "s.json", d), dir / "out", {}, out, err), exit_code::ok);
  const json report = json::parse(out.str());
  ASSERT_FALSE(report["warnings"].empty());
  EXPECT_NE(report["warnings"][0].get<std::string>().find("budget exceeded"), std::string::npos);
  EXPECT_TRUE(report["consensus"].is_boolean());
}

TEST(Commands, RunExampleOneReachesConsensus) {
  const fs::path dir = scratch("run_ex1");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(write_json(dir, "s.json", builtin_example_json(1)), dir / "out", {}, out, err),
            exit_code::ok);
  EXPECT_TRUE(json::parse(out.str())["consensus"].get<bool>());
}

TEST(Commands, RunSchemaAndRuntimeErrors) {
  const fs::path dir = scratch("run_err");
  json bad = integrator_doc();
  bad["x0"] = {1, 2};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(write_json(dir, "bad.json", bad), dir / "o1", {}, out, err), exit_code::invalid);
  json violating = integrator_doc();
  violating["schedules"] = json::array();
  for (int c = 0; c < 3; ++c) violating["schedules"].push_back({{"instants", {0.0, 0.5}}, {"delays", {0.0, 0.0}}});
  const fs::path vp = write_json(dir, "viol.json", violating);
  EXPECT_EQ(cmd_run(vp, dir / "o2", {}, out, err), exit_code::runtime);
}

TEST(Commands, SeedOverrideChangesRun) {
  const fs::path dir = scratch("seed");
  const fs::path p = write_json(dir, "s.json", integrator_doc());
  GlobalOptions a, b;
  a.seed = 1;
  b.seed = 2;
  const RunOutcome ra = run_scenario(load_scenario(p), a, std::nullopt);
  const RunOutcome rb = run_scenario(load_scenario(p), b, std::nullopt);
  EXPECT_EQ(ra.report["seed"], 1);
  EXPECT_NE(ra.trace.events.front().time, rb.trace.events.front().time);
}

TEST(Commands, ThreadCapFromEnvironment) {
  ::setenv("ASYNC_LAB_THREADS", "1", 1);
  EXPECT_EQ(thread_cap(), 1u);
  ::setenv("ASYNC_LAB_THREADS", "junk", 1);
  EXPECT_GE(thread_cap(), 1u);
  ::unsetenv("ASYNC_LAB_THREADS");
}

TEST(Commands, ReproduceAllExamplesPass) {
  for (int k = 1; k <= 3; ++k) {
    std::ostringstream out, err;
    EXPECT_EQ(cmd_reproduce(k, {}, out, err), exit_code::ok) << out.str() << err.str();
  }
  std::ostringstream out, err;
  EXPECT_EQ(cmd_reproduce(4, {}, out, err), exit_code::invalid);
}
