#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = MCCRF_CLI_PATH;

class Cli : public ::testing::Test {
protected:
   void SetUp() override
   {
      dir_ = fs::temp_directory_path() /
             ("mccrf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
      fs::remove_all(dir_);
      fs::create_directories(dir_);
   }
   void TearDown() override { fs::remove_all(dir_); }

   int run(const std::string& args, const std::string& env = "") const
   {
      const std::string cmd = "cd " + dir_.string() + " && " + env + " " + kCli + " " + args + " >/dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
   }

   std::string read(const fs::path& p) const
   {
      std::ifstream in(dir_ / p, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      return s.str();
   }

   fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerationIsReproducible)
{
   ASSERT_EQ(run("gen --count 3 --seed 7 --out a"), 0);
   ASSERT_EQ(run("gen --count 3 --seed 7 --out b"), 0);
   for (const char* f : {"instance_0000.json", "instance_0002.json"}) {
      EXPECT_FALSE(read(fs::path("a") / f).empty());
      EXPECT_EQ(read(fs::path("a") / f), read(fs::path("b") / f));
   }
}

TEST_F(Cli, UsageAndDataErrors)
{
   EXPECT_EQ(run("gen --k 0 --out x"), 1);
   EXPECT_EQ(run("frobnicate"), 1);
   ASSERT_EQ(run("gen --count 1 --out d"), 0);
   EXPECT_EQ(run("gen --count 1 --out d"), 2);
   EXPECT_EQ(run("gen --count 1 --out d --force"), 0);
   EXPECT_EQ(run("train --data d --stage end2end --model-out m.json"), 1);
   EXPECT_EQ(run("train --data missing --model-out m.json"), 2);
   std::ofstream(dir_ / "bad.json") << "{not json";
   EXPECT_EQ(run("solve --data bad.json"), 2);
}

TEST_F(Cli, TrainInferSolve)
{
   ASSERT_EQ(run("gen --count 6 --seed 1 --out d"), 0);
   ASSERT_EQ(run("train --data d --epochs 5 --model-out u.json --curve curve.csv"), 0);
   const auto curve = read("curve.csv");
   EXPECT_EQ(curve.rfind("epoch,train_loss", 0), 0u);
   EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 7);  // header + epochs 0..5
   ASSERT_EQ(run("train --data d --stage end2end --epochs 2 --model-in u.json --model-out e.json"), 0);
   EXPECT_EQ(json::parse(read("e.json"))["stage"], "end2end");

   ASSERT_EQ(run("infer --data d --model e.json --iterations 0 --report r/infer.json --trace r/trace"), 0);
   const auto report = json::parse(read("r/infer.json"));
   EXPECT_EQ(report["instances"].size(), 6u);
   EXPECT_EQ(report["instances"][0]["marginal_join_mean"].size(), 1u);
   EXPECT_TRUE(fs::exists(dir_ / "r/trace/instance_0000.trace.csv"));
   EXPECT_TRUE(fs::exists(dir_ / "r/infer.marginals.csv"));

   EXPECT_EQ(run("eval --data d/instance_0000.json --model e.json --exact --report r/x.json"), 2);  // 15 nodes
   EXPECT_EQ(run("eval --data d --model e.json --heuristic nope"), 1);
   EXPECT_EQ(run("eval --data d --model e.json", "MCCRF_OUT_DIR=out"), 0);
   EXPECT_TRUE(fs::exists(dir_ / "out/eval_report.json"));
}

TEST_F(Cli, SolveWithInstanceCosts)
{
   json doc = {{"nodes", json::array()}, {"edges", json::array()}};
   for (int i = 0; i < 4; ++i) doc["nodes"].push_back({{"id", i}, {"feature", {0.0}}});
   const double costs[] = {2.0, -1.0, -1.0, -1.0, -1.0, 2.0};  // optimum {0,1}{2,3}
   int e = 0;
   for (int u = 0; u < 4; ++u)
      for (int v = u + 1; v < 4; ++v) doc["edges"].push_back({{"u", u}, {"v", v}, {"cost", costs[e++]}});
   std::ofstream(dir_ / "k4.json") << doc.dump();
   ASSERT_EQ(run("solve --data k4.json --exact --report s.json"), 0);
   const auto report = json::parse(read("s.json"));
   for (const auto& s : report["instances"][0]["solvers"]) EXPECT_EQ(s["objective"], -4.0) << s.dump();
   EXPECT_FALSE(report["instances"][0]["solvers"][0].contains("elapsed_seconds"));
}
