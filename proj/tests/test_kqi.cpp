#include <gtest/gtest.h>

#include <array>
#include <functional>

#include "cgkqi/kqi.hpp"
#include "cgkqi/synth.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;
using testing::error_kind_of;

// Decimated-rate trace: one frame per period, diff 0 where `held` says so.
FrameTrace content_trace(double fps, double duration_ms, const std::function<bool(double)>& held) {
  FrameTrace t{fps, fps, duration_ms, {}};
  const double p = 1000.0 / fps;
  for (std::size_t k = 0; k * p <= duration_ms + 1e-9; ++k) {
    const double ts = k * p;
    t.frames.push_back({k, ts, k == 0 ? 1.0 : (held(ts) ? 0.0 : 0.05)});
  }
  return t;
}

TEST(Decimate, SameRateIsIdentity) {
  FrameTrace t{60, 60, 100, {{0, 0, 1}, {1, 16.7, 0}, {2, 33.4, 0.3}}};
  const auto d = decimate(t, 60);
  EXPECT_EQ(d, t);
}

TEST(Decimate, Undersampling) {
  FrameTrace t{30, 30, 100, {{0, 0, 1}}};
  EXPECT_EQ(error_kind_of([&] { decimate(t, 60); }), ErrorKind::Undersampling);
}

TEST(Decimate, PerfectContentHasNoFalseFreezes) {
  for (double fps : {30.0, 60.0, 120.0}) {
    SynthConfig c;
    c.session_fps = fps;
    c.capture_fps = 144;
    const auto s = generate_session(c);
    const auto d = decimate(s.trace, fps);
    for (std::size_t i = 1; i < d.frames.size(); ++i) {
      ASSERT_GT(d.frames[i].diff_fraction, 0.0) << "fps " << fps << " frame " << i;
    }
    EXPECT_TRUE(freeze_stats(d, fps).events.empty());
  }
}

TEST(Decimate, ThirtyFpsTenSecondsGivesAboutThreeHundredFrames) {
  SynthConfig c;
  c.session_fps = 30;
  c.capture_fps = 144;
  c.duration_ms = 10000;
  const auto d = decimate(generate_session(c).trace, 30);
  EXPECT_NEAR(double(d.frames.size()), 300.0, 1.0);
}

TEST(Decimate, IdempotentAndKeepsOrder) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testing::random_synth_config(rng, std::array{30.0, 60.0, 120.0}[rng.index(3)], 144, 2, 3);
    c.timestamp_jitter_ms = rng.uniform(0.0, 3.0);
    const auto s = generate_session(c);
    const auto once = decimate(s.trace, c.session_fps);
    EXPECT_EQ(decimate(once, c.session_fps), once);
    for (std::size_t i = 1; i < once.frames.size(); ++i) {
      EXPECT_LT(once.frames[i - 1].timestamp_ms, once.frames[i].timestamp_ms);
    }
  }
}

TEST(Decimate, RetainedDiffIsMaxOverDroppedFrames) {
  // 4x oversampled: every content change is seen on one of four captures.
  FrameTrace t{240, 60, 1000, {}};
  for (std::size_t i = 0; i < 240; ++i) {
    const double d = i == 0 ? 1.0 : (i % 4 == 2 ? 0.4 : 0.0);
    t.frames.push_back({i, i * 1000.0 / 240.0, d});
  }
  const auto out = decimate(t, 60);
  ASSERT_EQ(out.frames.size(), 60u);
  for (std::size_t i = 1; i < out.frames.size(); ++i) EXPECT_EQ(out.frames[i].diff_fraction, 0.4);
}

TEST(Efps, SixtyDistinctFramesInOneSecond) {
  const auto t = content_trace(60, 1000, [](double) { return false; });
  // content_trace includes t = 1000; drop it so 60 frames span the second.
  auto u = t;
  u.frames.pop_back();
  EXPECT_DOUBLE_EQ(effective_frame_rate(u), 60.0);
}

TEST(Efps, CountsUniqueFramesOverDuration) {
  FrameTrace t{60, 60, 2000, {{0, 0, 1}, {1, 10, 0}, {2, 20, 0.5}, {3, 30, 0.01}, {4, 40, 0}}};
  EXPECT_DOUBLE_EQ(effective_frame_rate(t), 3.0 / 2.0);
  DiffConfig cfg;
  cfg.identity_eps = 0.02;
  EXPECT_DOUBLE_EQ(effective_frame_rate(t, cfg), 2.0 / 2.0);
}

TEST(Efps, ZeroDurationIsDegenerate) {
  FrameTrace t{60, 60, 0, {{0, 0, 1}}};
  EXPECT_EQ(error_kind_of([&] { effective_frame_rate(t); }), ErrorKind::Degenerate);
}

TEST(Freeze, AllDistinctIsZero) {
  const auto t = content_trace(60, 10000, [](double) { return false; });
  const auto s = freeze_stats(t, 60);
  EXPECT_EQ(s.freeze_percent, 0.0);
  EXPECT_TRUE(s.events.empty());
}

TEST(Freeze, FiveHundredMsHold) {
  const auto t = content_trace(60, 10000, [](double ts) { return ts > 2000 + 1e-9 && ts < 2500 - 1e-9; });
  const auto s = freeze_stats(t, 60);
  ASSERT_EQ(s.events.size(), 1u);
  EXPECT_NEAR(s.events[0].start_ms, 2000.0, 1e-9);
  EXPECT_NEAR(s.freeze_percent, 100.0 * (500.0 - 1000.0 / 60.0) / 10000.0, 1e-9);
  EXPECT_NEAR(s.freeze_percent, 4.83, 0.05);
}

TEST(Freeze, FullyFrozenApproachesHundred) {
  double prev = 0.0;
  for (double duration : {1000.0, 10000.0, 100000.0}) {
    const auto t = content_trace(60, duration, [](double) { return true; });
    const double f = freeze_stats(t, 60).freeze_percent;
    EXPECT_GT(f, prev);
    EXPECT_LE(f, 100.0);
    prev = f;
  }
  EXPECT_GT(prev, 99.9);
}

TEST(Freeze, EventsSumToTotal) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = testing::random_synth_config(rng, 60, 144, 3, 2);
    const auto s = freeze_stats(decimate(generate_session(c).trace, 60), 60);
    double sum = 0.0;
    for (const auto& e : s.events) sum += e.frozen_ms;
    EXPECT_DOUBLE_EQ(sum, s.total_frozen_ms);
    EXPECT_GE(s.freeze_percent, 0.0);
    EXPECT_LE(s.freeze_percent, 100.0);
  }
}

TEST(Freeze, AddingAFreezeNeverLowersThePercentage) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    SynthConfig c;
    c.duration_ms = 20000;
    c.seed = rng.next();
    c.freezes.push_back({rng.uniform(500, 5000), rng.uniform(100, 2000)});
    const double before = measure_session(generate_session(c).trace, {}, 60).freeze_percent;
    c.freezes.push_back({rng.uniform(10000, 15000), rng.uniform(100, 2000)});
    const double after = measure_session(generate_session(c).trace, {}, 60).freeze_percent;
    EXPECT_GE(after, before);
  }
}

TEST(InputLag, FirstFrameAboveThreshold) {
  FrameTrace t{60, 60, 3000, {{0, 0, 1}, {1, 1000, 0.1}, {2, 1040, 0.24}, {3, 1087, 0.25}, {4, 1100, 0.9}}};
  ActionLog log{{{1, 1000}}};
  const auto s = input_lag(t, log);
  ASSERT_EQ(s.per_action.size(), 1u);
  EXPECT_DOUBLE_EQ(*s.per_action[0].latency_ms, 87.0);
  EXPECT_DOUBLE_EQ(*s.cg_latency_p50_ms, 87.0);
}

TEST(InputLag, WindowsEndAtNextAction) {
  // Action 1 gets no response before action 2 starts; the response after
  // action 2 belongs to action 2 only.
  FrameTrace t{60, 60, 3000, {{0, 0, 1}, {1, 500, 0.1}, {2, 1200, 0.8}, {3, 2500, 0.6}}};
  ActionLog log{{{1, 400}, {2, 1100}, {3, 2000}}};
  const auto s = input_lag(t, log);
  EXPECT_FALSE(s.per_action[0].latency_ms);
  EXPECT_DOUBLE_EQ(*s.per_action[1].latency_ms, 100.0);
  EXPECT_DOUBLE_EQ(*s.per_action[2].latency_ms, 500.0);
}

TEST(InputLag, MissingActionsAndMedian) {
  FrameTrace t{60, 60, 5000, {{0, 0, 1}, {1, 1050, 0.5}, {2, 2200, 0.1}, {3, 3060, 0.5}, {4, 4090, 0.5}}};
  ActionLog log{{{1, 1000}, {2, 2000}, {3, 3000}, {4, 4000}}};
  const auto s = input_lag(t, log);
  EXPECT_EQ(s.missing_actions(), std::vector<int>{2});
  EXPECT_DOUBLE_EQ(*s.cg_latency_p50_ms, 60.0);
}

TEST(InputLag, AllMissingIsNoResponse) {
  FrameTrace t{60, 60, 5000, {{0, 0, 1}, {1, 1050, 0.1}}};
  ActionLog log{{{1, 1000}, {2, 2000}}};
  try {
    input_lag(t, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoResponse);
    EXPECT_NE(std::string(e.what()).find("action 2"), std::string::npos);
  }
}

TEST(InputLag, SyntheticDelaysMedian) {
  SynthConfig c;
  c.duration_ms = 10000;
  for (int i = 0; i < 5; ++i) c.actions.push_back({1000.0 + 1500.0 * i, 50.0 + 10.0 * i, 0.6});
  const auto s = generate_session(c);
  const auto r = measure_session(s.trace, s.actions, 60);
  ASSERT_TRUE(r.cg_latency_p50_ms);
  EXPECT_NEAR(*r.cg_latency_p50_ms, 70.0, 1000.0 / 60.0);
  for (const auto& a : r.per_action_latencies) {
    ASSERT_TRUE(a.latency_ms);
    EXPECT_GE(*a.latency_ms, 0.0);
    EXPECT_LE(*a.latency_ms, 1500.0);
  }
}

TEST(MeasureSession, NoActionsLeavesLatencyUnavailable) {
  SynthConfig c;
  const auto s = generate_session(c);
  const auto r = measure_session(s.trace, {}, 60);
  EXPECT_FALSE(r.cg_latency_p50_ms);
  EXPECT_TRUE(r.missing_actions.empty());
  EXPECT_NEAR(r.efps, 60.0, 1.0);
  EXPECT_EQ(r.freeze_percent, 0.0);
}

TEST(MeasureSession, SingleFrameTrace) {
  FrameTrace t{144, 60, 1000, {{0, 0, 1}}};
  ActionLog log{{{7, 500}}};
  const auto r = measure_session(t, log, 60);
  EXPECT_DOUBLE_EQ(r.efps, 1.0);
  EXPECT_EQ(r.freeze_percent, 0.0);
  EXPECT_FALSE(r.cg_latency_p50_ms);
  EXPECT_EQ(r.missing_actions, std::vector<int>{7});
}

TEST(MeasureSession, MatchesSynthTruth) {
  SynthConfig c;
  c.actions = {{1000, 80}, {3000, 80}, {5000, 80}, {7000, 80}, {9000, 80}};
  const auto s = generate_session(c);
  const auto r = measure_session(s.trace, s.actions, 60);
  EXPECT_NEAR(r.efps, s.truth.true_efps, 1.0);
  EXPECT_NEAR(r.freeze_percent, s.truth.true_freeze_percent, 0.5);
  ASSERT_EQ(r.per_action_latencies.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(*r.per_action_latencies[i].latency_ms, s.truth.true_latencies_ms[i], 1000.0 / 144.0);
  }
}

TEST(MeasureSession, ActionOutsideSession) {
  FrameTrace t{144, 60, 1000, {{0, 0, 1}, {1, 10, 0.5}}};
  ActionLog log{{{1, 2000}}};
  EXPECT_EQ(error_kind_of([&] { measure_session(t, log, 60); }), ErrorKind::Validation);
}

TEST(KqiReport, JsonHasExactlyTheReportFields) {
  KqiReport r;
  r.freeze_percent = 1.5;
  r.efps = 59;
  r.per_action_latencies = {{1, 80.0}, {2, std::nullopt}};
  r.missing_actions = {2};
  r.freeze_events = {{100, 20}};
  const auto j = to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"cg_latency_p50_ms", "freeze_percent", "efps", "per_action_latencies",
                                            "freeze_events", "missing_actions"}));
  EXPECT_TRUE(j["cg_latency_p50_ms"].is_null());
  EXPECT_TRUE(j["per_action_latencies"][1]["latency_ms"].is_null());
}

TEST(ActionsCsv, RoundTrip) {
  TempDir dir;
  ActionLog log{{{1, 0.5}, {2, 1000}, {3, 2500.25}}};
  write_actions_csv(log, dir / "a.csv");
  EXPECT_EQ(read_actions_csv(dir / "a.csv"), log);
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(error_kind_of([] { median({}); }), ErrorKind::Usage);
}

}  // namespace
}  // namespace cgkqi
