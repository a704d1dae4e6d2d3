#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cgkqi/cli.hpp"
#include "json.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "cgkqi");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(slurp(p)); }

TEST(Cli, SynthThenMeasureRecoversTruth) {
  TempDir dir;
  const auto s = dir / "s";
  auto r = run({"synth", "--out-dir", s.string(), "--duration-ms", "12000", "--freeze-schedule",
                R"([{"start_ms": 3000, "length_ms": 600}])", "--action-delays",
                R"([{"action_ms": 1000, "response_delay_ms": 90}, {"action_ms": 6000, "response_delay_ms": 60}])",
                "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (auto f : {"trace.csv", "actions.csv", "ground_truth.json", "meta.json"}) {
    EXPECT_TRUE(std::filesystem::exists(s / f)) << f;
  }
  r = run({"measure", "--trace", (s / "trace.csv").string(), "--actions", (s / "actions.csv").string(),
           "--capture-fps", "144", "--session-fps", "60", "--duration-ms", "12000", "--out",
           (dir / "kqi.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto truth = read_json(s / "ground_truth.json");
  const auto report = read_json(dir / "kqi.json");
  EXPECT_NEAR(report["efps"].get<double>(), truth["true_efps"].get<double>(), 1.0);
  EXPECT_NEAR(report["freeze_percent"].get<double>(), truth["true_freeze_percent"].get<double>(), 0.5);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(report["per_action_latencies"][i]["latency_ms"].get<double>(),
                truth["true_latencies_ms"][i].get<double>(), 1000.0 / 144.0);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "kqi.json.meta.json"));
}

TEST(Cli, MeasureWithoutActionsPrintsNullLatency) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string()}).code, 0);
  const auto r = run({"measure", "--trace", (dir / "trace.csv").string(), "--capture-fps", "144",
                      "--session-fps", "60"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["cg_latency_p50_ms"].is_null());
}

TEST(Cli, TrainPredictEvaluate) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--dataset-rows", "300"}).code, 0);
  const std::string ds = (dir / "dataset.csv").string();
  auto r = run({"train", "--dataset", ds, "--target", "EFPS", "--technique", "knr", "--k", "4", "--out",
                (dir / "m.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto trained = nlohmann::json::parse(r.out);
  r = run({"evaluate", "--model", (dir / "m.json").string(), "--dataset", ds});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["mase"], trained["mase"]);
  r = run({"predict", "--model", (dir / "m.json").string(), "--dataset", ds});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("prediction\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 301);

  // Replaying the recorded configuration reproduces the model byte for byte.
  r = run({"train", "--config", (dir / "m.json.meta.json").string(), "--out", (dir / "m2.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "m.json"), slurp(dir / "m2.json"));
}

TEST(Cli, SeedPrecedence) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--dataset-rows", "200"}).code, 0);
  const std::string ds = (dir / "dataset.csv").string();
  const auto meta_seed = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"train", "--dataset", ds, "--target", "CGlatency", "--technique", "lr",
                                  "--k", "3", "--out", (dir / "m.json").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return read_json(dir / "m.json.meta.json")["seed"].get<std::uint64_t>();
  };
  ::setenv("CGKQI_SEED", "17", 1);
  EXPECT_EQ(meta_seed({}), 17u);
  EXPECT_EQ(meta_seed({"--seed", "5"}), 5u);
  ::unsetenv("CGKQI_SEED");
  EXPECT_EQ(meta_seed({}), 0u);
}

TEST(Cli, SweepRowCount) {
  TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--dataset-rows", "200"}).code, 0);
  const std::string ds = (dir / "dataset.csv").string();
  const auto r = run({"sweep", "--dataset", ds, "--techniques", "lr,knr", "--targets", "EFPS", "--groups",
                      "bs", "--out", (dir / "sweep.csv").string(), "--svg-dir", (dir / "svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir / "sweep.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 6);
  EXPECT_TRUE(std::filesystem::exists(dir / "svg" / "sweep_EFPS_bs.svg") ||
              std::filesystem::exists(dir / "svg" / "sweep_EFPS_BS.svg"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"measure", "--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  const auto bad = run({"measure", "--trace", "/nonexistent.csv", "--capture-fps", "144", "--session-fps", "60"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(run({"measure", "--trace", "x", "--capture-fps", "fast", "--session-fps", "60"}).code, 1);
}

TEST(Cli, BinaryExitCode) {
  const char* tool = std::getenv("CGKQI_TOOL");
  if (tool == nullptr) GTEST_SKIP() << "tool path not provided";
  EXPECT_EQ(std::system((std::string(tool) + " --version > /dev/null").c_str()), 0);
  EXPECT_NE(std::system((std::string(tool) + " measure > /dev/null 2>&1").c_str()), 0);
}

}  // namespace
}  // namespace cgkqi
