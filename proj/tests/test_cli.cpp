#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dpc/io/csv.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kTool = DPC_TOOL_PATH;
const fs::path kScenarios = DPC_SCENARIO_DIR;

int dpc_cli(const std::string& args) {
  const std::string cmd = "\"" + kTool.string() + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpc_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::string scenario(const fs::path& name) { return "--scenario \"" + (kScenarios / name).string() + "\""; }

}  // namespace

TEST(Cli, ValidatesShippedScenarios) {
  for (const auto& e : fs::directory_iterator(kScenarios)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_EQ(dpc_cli("validate --scenario \"" + e.path().string() + "\""), 0) << e.path();
  }
}

TEST(Cli, SingleStepRun) {
  const auto out = scratch("single");
  ASSERT_EQ(dpc_cli("run " + scenario("single_step.json") + " --out \"" + out.string() + "\""), 0);
  const auto t = dpc::io::read_table((out / "metrics.csv").string());
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_LE(dpc::io::parse_number(t.rows[0][t.column("delta_w")], "metrics"), 0.0);
}

TEST(Cli, MalformedScenarioLeavesNoOutput) {
  const auto dir = scratch("malformed");
  fs::create_directories(dir);
  auto doc = nlohmann::json::parse(slurp(kScenarios / "single_step.json"));
  doc["agents"][0].erase("budget");
  std::ofstream(dir / "s.json") << doc.dump(2);
  fs::copy_file(kScenarios / "single_point.csv", dir / "single_point.csv");
  const auto out = dir / "out";
  EXPECT_NE(dpc_cli("run --scenario \"" + (dir / "s.json").string() + "\" --out \"" + out.string() + "\""), 0);
  EXPECT_FALSE(fs::exists(out / "metrics.csv"));
  EXPECT_FALSE(fs::exists(out / "trajectories.csv"));
  EXPECT_FALSE(fs::exists(out / "global_w.csv"));
  EXPECT_NE(dpc_cli("validate --scenario \"" + (dir / "s.json").string() + "\""), 0);
}

TEST(Cli, TableOneFirstOrderRowCount) {
  const auto out = scratch("table1");
  ASSERT_EQ(dpc_cli("run " + scenario("first_order_unconstrained.json") + " --k-interval 1500 --out \"" + out.string() +
                    "\""),
            0);
  const auto t = dpc::io::read_table((out / "trajectories.csv").string());
  EXPECT_EQ(t.rows.size(), 3u * 1500u);
}

TEST(Cli, EllipsePlotWindow) {
  const auto out = scratch("ellipses");
  ASSERT_EQ(dpc_cli("run " + scenario("first_order_constrained.json") + " --k-interval 1500 --out \"" + out.string() +
                    "\""),
            0);
  ASSERT_EQ(dpc_cli("plot --out \"" + out.string() + "\" --kind ellipses --window 821 828"), 0);
  const std::string svg = slurp(out / "ellipses.svg");
  EXPECT_EQ(count(svg, "<polyline fill=\"none\" stroke=\"#8c8c8c\""), 8u);
  EXPECT_EQ(count(svg, "<polyline"), 10u);
}

TEST(Cli, EmptyTrajectoryPlotFails) {
  const auto out = scratch("empty");
  ASSERT_EQ(dpc_cli("run " + scenario("single_step.json") + " --out \"" + out.string() + "\""), 0);
  std::ofstream(out / "trajectories.csv") << "agent,k,y1,y2\n";
  fs::remove(out / "trajectories.svg");
  EXPECT_NE(dpc_cli("plot --out \"" + out.string() + "\" --kind trajectories"), 0);
  EXPECT_FALSE(fs::exists(out / "trajectories.svg"));
  EXPECT_NE(dpc_cli("plot --out \"" + out.string() + "\" --kind trajectories --window 5 9"), 0);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const char* files[] = {"trajectories.csv", "metrics.csv", "global_w.csv", "control.csv", "trajectories.svg",
                         "deltaw.svg",       "ellipses.svg", "globalw.svg"};
  const char* kinds[] = {"trajectories", "deltaw", "ellipses", "globalw"};
  std::string first[std::size(files)];
  int run = 0;
  for (const char* mode : {"false", "false", "true", "true"}) {
    const auto out = scratch("det" + std::to_string(run));
    ASSERT_EQ(dpc_cli("run " + scenario("desk_first_order_constrained.json") + " --k-interval 50 --parallel " + mode +
                      " --out \"" + out.string() + "\""),
              0);
    for (const char* kind : kinds) {
      ASSERT_EQ(dpc_cli("plot --out \"" + out.string() + "\" --kind " + kind), 0);
    }
    for (std::size_t i = 0; i < std::size(files); ++i) {
      const std::string bytes = slurp(out / files[i]);
      ASSERT_FALSE(bytes.empty()) << files[i];
      if (run == 0) {
        first[i] = bytes;
      } else {
        EXPECT_EQ(bytes, first[i]) << files[i] << " differs in run " << run;
      }
    }
    ++run;
  }
}

TEST(Cli, RejectsBadArguments) {
  EXPECT_NE(dpc_cli(""), 0);
  EXPECT_NE(dpc_cli("run --out /tmp/x"), 0);
  EXPECT_NE(dpc_cli("run --scenario /nonexistent.json --out /tmp/x"), 0);
  EXPECT_NE(dpc_cli("plot --out /tmp --kind histogram"), 0);
}
