#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cgkqi/kqi.hpp"
#include "cgkqi/synth.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;
using testing::error_kind_of;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(GroundTruth, SteadySixtyFps) {
  SynthConfig c;
  const auto t = ground_truth(c);
  EXPECT_DOUBLE_EQ(t.true_efps, 60.0);
  EXPECT_EQ(t.true_freeze_percent, 0.0);
}

TEST(GroundTruth, FiveHundredMsFreeze) {
  SynthConfig c;
  c.freezes = {{2000, 500}};
  const auto t = ground_truth(c);
  EXPECT_NEAR(t.true_freeze_percent, 100.0 * (500.0 - 1000.0 / 60.0) / 10000.0, 1e-9);
  EXPECT_NEAR(t.true_freeze_percent, 4.83, 0.05);
  // 29 content frames are never shown.
  EXPECT_NEAR(t.true_efps, (600.0 - 29.0) / 10.0, 1e-9);
}

TEST(GroundTruth, LatencyRoundsUpToContentFrame) {
  SynthConfig c;
  c.actions = {{1000, 80}, {4000, 120}};
  const auto t = ground_truth(c);
  ASSERT_EQ(t.true_latencies_ms.size(), 2u);
  const double p = 1000.0 / 60.0;
  EXPECT_NEAR(t.true_latencies_ms[0], std::ceil((1080.0 - 1e-9) / p) * p - 1000.0, 1e-9);
  EXPECT_NEAR(t.true_latencies_ms[1], std::ceil((4120.0 - 1e-9) / p) * p - 4000.0, 1e-9);
}

TEST(Generate, TraceShape) {
  SynthConfig c;
  c.timestamp_jitter_ms = 1.0;
  const auto s = generate_session(c);
  EXPECT_NO_THROW(s.trace.validate());
  EXPECT_NEAR(double(s.trace.frames.size()), 10.0 * 144.0, 2.0);
  EXPECT_EQ(s.trace.frames[0].diff_fraction, 1.0);
  EXPECT_EQ(s.trace.capture_fps, 144.0);
  EXPECT_EQ(s.trace.session_fps, 60.0);
}

TEST(Generate, ByteIdenticalForSameSeed) {
  TempDir dir;
  SynthConfig c;
  c.timestamp_jitter_ms = 2.0;
  c.freezes = {{3000, 700}};
  c.actions = {{1000, 50}, {5000, 90}};
  c.seed = 99;
  write_trace_csv(generate_session(c).trace, dir / "a.csv");
  write_trace_csv(generate_session(c).trace, dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  c.seed = 100;
  write_trace_csv(generate_session(c).trace, dir / "c.csv");
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Config, Errors) {
  auto kind = [](auto mutate) {
    SynthConfig c;
    mutate(c);
    return error_kind_of([&] { c.validate(); });
  };
  EXPECT_EQ(kind([](SynthConfig& c) { c.duration_ms = 0; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.capture_fps = 30; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.freezes = {{9800, 500}}; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.freezes = {{1000, 500}, {1200, 100}}; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.actions = {{2000, 50}, {1000, 50}}; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.actions = {{1000, 50, 0.1}}; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.actions = {{1000, 500}, {1200, 50}}; }), ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) {
              c.freezes = {{1000, 500}};
              c.actions = {{900, 200}};
            }),
            ErrorKind::Config);
  EXPECT_EQ(kind([](SynthConfig& c) { c.ambient_diff = 0.3; }), ErrorKind::Config);
  EXPECT_NO_THROW(SynthConfig{}.validate());
}

TEST(Config, JsonRoundTrip) {
  SynthConfig c;
  c.duration_ms = 20000;
  c.session_fps = 30;
  c.freezes = {{1000, 300}, {5000, 900}};
  c.actions = {{3000, 70, 0.8}};
  c.timestamp_jitter_ms = 0.5;
  c.seed = 1234;
  const nlohmann::json j = c;
  const auto back = j.get<SynthConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(error_kind_of([&] {
              auto bad = j;
              bad["frames"] = 3;
              bad.get<SynthConfig>();
            }),
            ErrorKind::Config);
}

TEST(Render, AgreesWithTraceModel) {
  SynthConfig c;
  c.duration_ms = 4000;
  c.freezes = {{1500, 400}};
  c.actions = {{500, 60}, {2500, 110}};
  const auto s = generate_session(c);
  const auto images = render_session(c);
  ASSERT_EQ(images.size(), s.trace.frames.size());
  auto rendered = build_trace(images, c.capture_fps, c.session_fps, DiffConfig{});
  rendered.duration_ms = c.duration_ms;
  for (std::size_t i = 1; i < rendered.frames.size(); ++i) {
    ASSERT_EQ(rendered.frames[i].diff_fraction == 0.0, s.trace.frames[i].diff_fraction == 0.0) << i;
    ASSERT_EQ(rendered.frames[i].timestamp_ms, s.trace.frames[i].timestamp_ms);
  }
  const auto a = measure_session(s.trace, s.actions, c.session_fps);
  const auto b = measure_session(rendered, s.actions, c.session_fps);
  EXPECT_EQ(a.efps, b.efps);
  EXPECT_EQ(a.freeze_percent, b.freeze_percent);
  ASSERT_EQ(b.per_action_latencies.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.per_action_latencies[i].latency_ms, b.per_action_latencies[i].latency_ms);
  }
}

TEST(Render, TooSmall) {
  EXPECT_EQ(error_kind_of([] { render_session(SynthConfig{}, 8, 8); }), ErrorKind::Config);
}

}  // namespace
}  // namespace cgkqi
