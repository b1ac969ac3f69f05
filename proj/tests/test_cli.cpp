#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace {

using namespace dcep;

std::string temp_path(const std::string& name) { return ::testing::TempDir() + "dcep_cli_" + name; }

int run(const std::string& args) {
  const std::string cmd = std::string(DCEP_CLI_PATH) + " " + args + " > " + temp_path("stdout.txt") + " 2> " +
                          temp_path("stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

// Default configuration cut down to a few short iterations.
std::string small_config() {
  static const std::string path = [] {
    json j = dcep::testing::default_config();
    j["training"]["n_pol"] = 3;
    j["training"]["t_sim"] = 24;
    j["training"]["heldout_steps"] = 12;
    j["training"]["warmup_iterations"] = 1;
    j["greedy"]["budget"] = 300;
    const std::string p = temp_path("small.json");
    std::ofstream(p) << j.dump(2);
    return p;
  }();
  return path;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --out " + temp_path("x.ckpt")), 2);  // no traces
  EXPECT_NE(slurp(temp_path("stderr.txt")).find("--traces"), std::string::npos);
  EXPECT_EQ(run("simulate --synthetic 1 --traces a.csv"), 2);
  EXPECT_EQ(run("simulate --synthetic 1 --controller fancy"), 2);
  EXPECT_EQ(run("simulate --synthetic 1 --days 0"), 2);
  EXPECT_EQ(run("compare --synthetic 1"), 2);  // rl challenger without a checkpoint
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, RuntimeErrorsExitWithOne) {
  EXPECT_EQ(run("simulate --traces " + temp_path("missing.csv")), 1);
  EXPECT_EQ(run("--config " + temp_path("missing.json") + " simulate --synthetic 1"), 1);
  EXPECT_EQ(run("simulate --synthetic 1 --controller rl --theta " + temp_path("missing.ckpt")), 1);
}

TEST(Cli, BaselineSimulationWritesOneRowPerStep) {
  const std::string csv = temp_path("baseline.csv"), report = temp_path("baseline.json");
  ASSERT_EQ(run("simulate --synthetic 3 --days 2 --out-csv " + csv + " --report " + report), 0);
  const std::string text = slurp(csv);
  EXPECT_EQ(line_count(text), 288u + 1u);
  EXPECT_EQ(text.find("nan"), std::string::npos);
  const json r = json::parse(slurp(report));
  EXPECT_GT(r.at("electricity_cost_usd").get<double>(), 0.0);
  EXPECT_GE(r.at("tracking_rmse_kw").get<double>(), 0.0);
  EXPECT_EQ(r.at("steps").get<int>(), 288);
}

TEST(Cli, UntrainedRlControllerCompletes) {
  const std::string csv = temp_path("rl0.csv");
  ASSERT_EQ(run("simulate --synthetic 3 --days 1 --controller rl --out-csv " + csv), 0);
  const std::string text = slurp(csv);
  EXPECT_EQ(line_count(text), 144u + 1u);
  EXPECT_EQ(text.find("nan"), std::string::npos);
}

TEST(Cli, BaselineAgainstItselfSavesNothing) {
  const std::string out = temp_path("self.json");
  ASSERT_EQ(run("compare --synthetic 4 --days 1 --controller baseline --out " + out), 0);
  const json r = json::parse(slurp(out));
  EXPECT_EQ(r.at("savings_percent").get<double>(), 0.0);
}

TEST(Cli, SavingsArithmetic) { EXPECT_NEAR(savings_percent(2214.0, 2051.0), 7.36, 5e-3); }

TEST(Cli, TrainingIsReproducibleAndFeedsCompare) {
  const std::string a = temp_path("a.ckpt"), b = temp_path("b.ckpt"), log = temp_path("log.csv");
  ASSERT_EQ(run("--config " + small_config() + " train --synthetic 1 --days 1 --seed 7 --out " + a + " --log-csv " +
                log),
            0);
  ASSERT_EQ(run("--config " + small_config() + " train --synthetic 1 --days 1 --seed 7 --out " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(line_count(slurp(log)), 3u + 1u);

  const std::string out = temp_path("cmp.json"), prefix = temp_path("cmp");
  ASSERT_EQ(run("--config " + small_config() + " compare --synthetic 9 --days 1 --theta " + a + " --out " + out +
                " --csv-prefix " + prefix),
            0);
  const json r = json::parse(slurp(out));
  const double bl = r.at("controllers").at("baseline").at("electricity_cost_usd").get<double>();
  const double rl = r.at("controllers").at("rl").at("electricity_cost_usd").get<double>();
  EXPECT_NEAR(r.at("savings_percent").get<double>(), 100.0 * (bl - rl) / bl, 1e-9);
  EXPECT_TRUE(r.at("controllers").at("rl").contains("chiller_switches"));
  EXPECT_EQ(line_count(slurp(prefix + "_baseline.csv")), 145u);
  EXPECT_EQ(line_count(slurp(prefix + "_rl.csv")), 145u);
}

TEST(Cli, TraceFileRoundTrip) {
  const std::string traces = temp_path("traces.csv");
  {
    std::ofstream out(traces);
    write_traces(out, synthesize_traces(5, 1));
  }
  const std::string csv = temp_path("from_file.csv");
  ASSERT_EQ(run("simulate --traces " + traces + " --days 1 --out-csv " + csv), 0);
  EXPECT_EQ(line_count(slurp(csv)), 145u);
}

}  // namespace
