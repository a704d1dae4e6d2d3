#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "cgkqi/trace.hpp"

namespace cgkqi {

struct Action {
  int id = 0;
  double timestamp_ms = 0.0;

  bool operator==(const Action&) const = default;
};

/// User actions injected during a session, strictly increasing in time.
struct ActionLog {
  std::vector<Action> actions;

  void validate(double duration_ms) const;
  bool operator==(const ActionLog&) const = default;
};

// CSV with header `action_id,timestamp_ms`.
void write_actions_csv(const ActionLog& log, const std::filesystem::path& path);
ActionLog read_actions_csv(const std::filesystem::path& path);

struct FreezeEvent {
  double start_ms = 0.0;
  double frozen_ms = 0.0;
};

struct FreezeStats {
  double freeze_percent = 0.0;
  double total_frozen_ms = 0.0;
  std::vector<FreezeEvent> events;
};

struct ActionLatency {
  int action_id = 0;
  std::optional<double> latency_ms;  // empty when no response was found
};

struct LatencyStats {
  std::vector<ActionLatency> per_action;
  std::optional<double> cg_latency_p50_ms;

  std::vector<int> missing_actions() const;
};

struct KqiReport {
  std::optional<double> cg_latency_p50_ms;
  double freeze_percent = 0.0;
  double efps = 0.0;
  std::vector<ActionLatency> per_action_latencies;
  std::vector<FreezeEvent> freeze_events;
  std::vector<int> missing_actions;

  // Not part of the serialised report, kept for callers and metadata.
  std::size_t decimated_frame_count = 0;
  DiffConfig config;
  double session_fps = 0.0;
};

/// Keeps one captured frame per nominal content instant. For every
/// t_k = k * 1000 / session_fps the first unused frame at or after t_k is
/// retained; the retained diff_fraction is the largest diff seen since the
/// previous retained frame, so two retained frames are identical iff every
/// frame between them was.
FrameTrace decimate(const FrameTrace& trace, double session_fps);

/// Unique frames per second over the session.
double effective_frame_rate(const FrameTrace& trace, const DiffConfig& cfg = {});

FreezeStats freeze_stats(const FrameTrace& trace, double session_fps, const DiffConfig& cfg = {});

/// Splits the session at each action and reports the delay until the first
/// frame whose diff_fraction reaches cfg.motion_threshold.
/// Throws ErrorKind::NoResponse when no action gets a response.
LatencyStats input_lag(const FrameTrace& trace, const ActionLog& actions, const DiffConfig& cfg = {});

/// Decimates once, then measures EFPS, freezes and input lag on the result.
/// An empty action log, or one where no action responded, yields a report
/// without a latency value rather than an error.
KqiReport measure_session(const FrameTrace& trace, const ActionLog& actions, double session_fps,
                          const DiffConfig& cfg = {});

/// Fields exactly: cg_latency_p50_ms, freeze_percent, efps,
/// per_action_latencies, freeze_events, missing_actions.
nlohmann::ordered_json to_json(const KqiReport& report);

double median(std::vector<double> values);

}  // namespace cgkqi
