#include "cgkqi/kqi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "csv.hpp"

namespace cgkqi {
namespace {

// Slack when comparing a capture timestamp against an ideal content instant,
// absorbs rounding in k * 1000 / fps.
constexpr double kInstantSlackMs = 1e-6;

void require_positive_fps(double fps, const char* what) {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    fail(ErrorKind::Config, fmt::format("{} must be positive, got {}", what, fps));
  }
}

void require_duration(const FrameTrace& trace) {
  if (!(trace.duration_ms > 0.0)) {
    fail(ErrorKind::Degenerate,
         fmt::format("session duration must be positive, got {} ms", trace.duration_ms));
  }
}

}  // namespace

void ActionLog::validate(double duration_ms) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double t = actions[i].timestamp_ms;
    if (i > 0 && !(t > actions[i - 1].timestamp_ms)) {
      fail(ErrorKind::Ordering, fmt::format("action {} at {} ms not after previous action",
                                            actions[i].id, t));
    }
    if (!(t >= 0.0 && t <= duration_ms)) {
      fail(ErrorKind::Validation, fmt::format("action {} at {} ms outside session [0, {}]",
                                              actions[i].id, t, duration_ms));
    }
  }
}

void write_actions_csv(const ActionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << "action_id,timestamp_ms\n";
  for (const auto& a : log.actions) out << fmt::format("{},{}\n", a.id, a.timestamp_ms);
}

ActionLog read_actions_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line) ||
      csv::split_line(line) != std::vector<std::string>{"action_id", "timestamp_ms"}) {
    fail(ErrorKind::Validation,
         fmt::format("{}: expected header action_id,timestamp_ms", path.string()));
  }
  ActionLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::is_blank(line)) continue;
    const auto cells = csv::split_line(line);
    const auto id = cells.size() == 2 ? csv::parse_int(cells[0]) : std::nullopt;
    const auto ts = cells.size() == 2 ? csv::parse_double(cells[1]) : std::nullopt;
    if (!id || !ts) {
      fail(ErrorKind::Validation, fmt::format("{}:{}: malformed action row", path.string(), line_no));
    }
    log.actions.push_back({static_cast<int>(*id), *ts});
  }
  return log;
}

std::vector<int> LatencyStats::missing_actions() const {
  std::vector<int> out;
  for (const auto& a : per_action) {
    if (!a.latency_ms) out.push_back(a.action_id);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::Usage, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FrameTrace decimate(const FrameTrace& trace, double session_fps) {
  require_positive_fps(session_fps, "session_fps");
  trace.validate();
  if (trace.capture_fps < session_fps) {
    fail(ErrorKind::Undersampling, fmt::format("capture rate {} fps is below session rate {} fps",
                                               trace.capture_fps, session_fps));
  }
  if (trace.capture_fps == session_fps) {
    FrameTrace same = trace;
    same.session_fps = session_fps;
    return same;
  }

  const auto& in = trace.frames;
  const double period = 1000.0 / session_fps;
  const auto last_k =
      static_cast<std::size_t>(std::floor(trace.duration_ms * session_fps / 1000.0 + 1e-9));

  FrameTrace out;
  out.capture_fps = session_fps;
  out.session_fps = session_fps;
  out.duration_ms = trace.duration_ms;
  out.frames.reserve(last_k + 1);

  std::size_t next = 0;  // first input frame not yet consumed
  for (std::size_t k = 0; k <= last_k && next < in.size(); ++k) {
    const double instant = static_cast<double>(k) * period - kInstantSlackMs;
    auto it = std::lower_bound(in.begin() + static_cast<std::ptrdiff_t>(next), in.end(), instant,
                               [](const FrameRecord& f, double t) { return f.timestamp_ms < t; });
    if (it == in.end()) break;
    const auto j = static_cast<std::size_t>(it - in.begin());
    double diff = 1.0;
    if (!out.frames.empty()) {
      diff = 0.0;
      for (std::size_t m = next; m <= j; ++m) diff = std::max(diff, in[m].diff_fraction);
    }
    out.frames.push_back({out.frames.size(), in[j].timestamp_ms, diff});
    next = j + 1;
  }
  return out;
}

double effective_frame_rate(const FrameTrace& trace, const DiffConfig& cfg) {
  require_duration(trace);
  if (trace.frames.empty()) fail(ErrorKind::EmptySession, "trace has no frames");
  std::size_t unique = 1;
  for (std::size_t i = 1; i < trace.frames.size(); ++i) {
    if (trace.frames[i].diff_fraction > cfg.identity_eps) ++unique;
  }
  return static_cast<double>(unique) / (trace.duration_ms / 1000.0);
}

FreezeStats freeze_stats(const FrameTrace& trace, double session_fps, const DiffConfig& cfg) {
  require_positive_fps(session_fps, "session_fps");
  require_duration(trace);
  const auto& f = trace.frames;
  const double period = 1000.0 / session_fps;
  FreezeStats stats;
  std::size_t i = 0;
  while (i < f.size()) {
    std::size_t end = i;
    while (end + 1 < f.size() && f[end + 1].diff_fraction <= cfg.identity_eps) ++end;
    if (end > i) {
      const double until = end + 1 < f.size() ? f[end + 1].timestamp_ms : trace.duration_ms;
      const double frozen = std::max(0.0, until - f[i].timestamp_ms - period);
      if (frozen > 0.0) {
        stats.events.push_back({f[i].timestamp_ms, frozen});
        stats.total_frozen_ms += frozen;
      }
    }
    i = end + 1;
  }
  stats.freeze_percent = std::clamp(100.0 * stats.total_frozen_ms / trace.duration_ms, 0.0, 100.0);
  return stats;
}

LatencyStats input_lag(const FrameTrace& trace, const ActionLog& actions, const DiffConfig& cfg) {
  if (actions.actions.empty()) fail(ErrorKind::Usage, "input lag needs at least one action");
  const auto& f = trace.frames;
  LatencyStats stats;
  std::vector<double> detected;
  std::string diagnostics;
  for (std::size_t i = 0; i < actions.actions.size(); ++i) {
    const Action& a = actions.actions[i];
    if (i > 0 && !(a.timestamp_ms > actions.actions[i - 1].timestamp_ms)) {
      fail(ErrorKind::Ordering, fmt::format("action {} is not after the previous action", a.id));
    }
    const double window_end = i + 1 < actions.actions.size()
                                  ? actions.actions[i + 1].timestamp_ms
                                  : std::numeric_limits<double>::infinity();
    // Frame 0 has no predecessor; its 1.0 is not motion.
    auto it = std::lower_bound(f.begin() + std::min<std::ptrdiff_t>(1, std::ssize(f)), f.end(),
                               a.timestamp_ms,
                               [](const FrameRecord& r, double t) { return r.timestamp_ms < t; });
    ActionLatency result{a.id, std::nullopt};
    std::size_t scanned = 0;
    for (; it != f.end() && it->timestamp_ms < window_end; ++it, ++scanned) {
      if (it->diff_fraction >= cfg.motion_threshold) {
        result.latency_ms = it->timestamp_ms - a.timestamp_ms;
        detected.push_back(*result.latency_ms);
        break;
      }
    }
    if (!result.latency_ms) {
      diagnostics += fmt::format("\n  action {} at {} ms: no frame with diff >= {} among {} frames",
                                 a.id, a.timestamp_ms, cfg.motion_threshold, scanned);
    }
    stats.per_action.push_back(result);
  }
  if (detected.empty()) {
    fail(ErrorKind::NoResponse, "no action produced a visible response:" + diagnostics);
  }
  stats.cg_latency_p50_ms = median(std::move(detected));
  return stats;
}

KqiReport measure_session(const FrameTrace& trace, const ActionLog& actions, double session_fps,
                          const DiffConfig& cfg) {
  cfg.validate();
  require_duration(trace);
  actions.validate(trace.duration_ms);
  const FrameTrace dec = decimate(trace, session_fps);

  KqiReport report;
  report.config = cfg;
  report.session_fps = session_fps;
  report.decimated_frame_count = dec.frames.size();
  report.efps = effective_frame_rate(dec, cfg);
  const FreezeStats fs = freeze_stats(dec, session_fps, cfg);
  report.freeze_percent = fs.freeze_percent;
  report.freeze_events = fs.events;

  if (!actions.actions.empty()) {
    try {
      const LatencyStats lat = input_lag(dec, actions, cfg);
      report.cg_latency_p50_ms = lat.cg_latency_p50_ms;
      report.per_action_latencies = lat.per_action;
      report.missing_actions = lat.missing_actions();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoResponse) throw;
      for (const auto& a : actions.actions) {
        report.per_action_latencies.push_back({a.id, std::nullopt});
        report.missing_actions.push_back(a.id);
      }
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const KqiReport& report) {
  nlohmann::ordered_json j;
  j["cg_latency_p50_ms"] =
      report.cg_latency_p50_ms ? nlohmann::ordered_json(*report.cg_latency_p50_ms) : nullptr;
  j["freeze_percent"] = report.freeze_percent;
  j["efps"] = report.efps;
  auto lat = nlohmann::ordered_json::array();
  for (const auto& a : report.per_action_latencies) {
    lat.push_back({{"action_id", a.action_id},
                   {"latency_ms", a.latency_ms ? nlohmann::ordered_json(*a.latency_ms) : nullptr}});
  }
  j["per_action_latencies"] = std::move(lat);
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : report.freeze_events) {
    events.push_back({{"start_ms", e.start_ms}, {"frozen_ms", e.frozen_ms}});
  }
  j["freeze_events"] = std::move(events);
  j["missing_actions"] = report.missing_actions;
  return j;
}

}  // namespace cgkqi
