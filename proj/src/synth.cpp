#include "cgkqi/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "cgkqi/rng.hpp"

namespace cgkqi {
namespace {

constexpr double kEps = 1e-9;
// Same slack the decimator allows around content instants: a capture this
// close to a frame switch already shows the new frame.
constexpr double kInstantSlackMs = 1e-6;

struct Hold {
  std::int64_t first;  // content frame kept on screen
  std::int64_t until;  // first content frame shown again
};

struct Timeline {
  double period = 0.0;   // content period, ms
  double capture = 0.0;  // capture period, ms
  std::int64_t frames = 0;  // content frames presented inside [0, duration)
  std::vector<Hold> holds;
  std::vector<std::int64_t> responses;  // content frame carrying each response
};

std::int64_t frame_at(double t_ms, double period) {
  return static_cast<std::int64_t>(std::floor((t_ms + kInstantSlackMs) / period));
}

std::int64_t first_frame_from(double t_ms, double period) {
  return static_cast<std::int64_t>(std::ceil((t_ms - kInstantSlackMs) / period));
}

Timeline make_timeline(const SynthConfig& cfg) {
  Timeline tl;
  tl.period = 1000.0 / cfg.session_fps;
  tl.capture = 1000.0 / cfg.capture_fps;
  tl.frames = first_frame_from(cfg.duration_ms, tl.period);
  for (const auto& f : cfg.freezes) {
    tl.holds.push_back({frame_at(f.start_ms, tl.period),
                        first_frame_from(f.start_ms + f.length_ms, tl.period)});
  }
  for (const auto& a : cfg.actions) {
    tl.responses.push_back(first_frame_from(a.action_ms + a.response_delay_ms, tl.period));
  }
  return tl;
}

// Content frame visible at capture time t.
std::int64_t shown_frame(const Timeline& tl, double t_ms) {
  const std::int64_t k = frame_at(t_ms, tl.period);
  for (const auto& h : tl.holds) {
    if (k >= h.first && k < h.until) return h.first;
  }
  return k;
}

struct Capture {
  double timestamp_ms;
  std::int64_t shown;
  double diff;
  int responses_shown;
};

std::vector<Capture> simulate(const SynthConfig& cfg) {
  cfg.validate();
  const Timeline tl = make_timeline(cfg);
  Rng rng(cfg.seed);
  std::vector<Capture> out;
  int responses_shown = 0;
  for (std::int64_t j = 0;; ++j) {
    const double nominal = static_cast<double>(j) * tl.capture;
    if (nominal >= cfg.duration_ms - kEps) break;
    double t = nominal;
    if (j > 0 && cfg.timestamp_jitter_ms > 0.0) {
      t += rng.uniform(-cfg.timestamp_jitter_ms, cfg.timestamp_jitter_ms);
      if (t > cfg.duration_ms) break;
    }
    const std::int64_t shown = shown_frame(tl, t);
    double diff = 1.0;
    if (!out.empty()) {
      diff = 0.0;
      if (shown != out.back().shown) {
        const auto r = std::find(tl.responses.begin(), tl.responses.end(), shown);
        if (r != tl.responses.end()) {
          diff = cfg.actions[static_cast<std::size_t>(r - tl.responses.begin())].response_diff;
          ++responses_shown;
        } else {
          diff = cfg.ambient_diff * rng.uniform(0.5, 1.5);
        }
      }
    }
    out.push_back({t, shown, diff, responses_shown});
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(duration_ms > 0.0)) fail(ErrorKind::Config, "duration_ms must be positive");
  if (!(session_fps > 0.0)) fail(ErrorKind::Config, "session_fps must be positive");
  if (!(capture_fps >= session_fps)) {
    fail(ErrorKind::Config, fmt::format("capture_fps {} below session_fps {}", capture_fps, session_fps));
  }
  if (!(motion_threshold > 0.0 && motion_threshold <= 1.0)) {
    fail(ErrorKind::Config, "motion_threshold must be in (0, 1]");
  }
  if (!(ambient_diff > 0.0 && 1.5 * ambient_diff < motion_threshold)) {
    fail(ErrorKind::Config, "ambient_diff must be positive and at most 2/3 of motion_threshold");
  }
  const double capture = 1000.0 / capture_fps;
  if (!(timestamp_jitter_ms >= 0.0 && timestamp_jitter_ms < capture / 2.0)) {
    fail(ErrorKind::Config, "timestamp_jitter_ms must be in [0, half a capture period)");
  }

  const Timeline tl = make_timeline(*this);
  for (std::size_t i = 0; i < freezes.size(); ++i) {
    const auto& f = freezes[i];
    if (!(f.start_ms >= 0.0 && f.length_ms > 0.0 && f.start_ms + f.length_ms <= duration_ms + kEps)) {
      fail(ErrorKind::Config, fmt::format("freeze {} [{}, +{}] not inside the session", i, f.start_ms,
                                          f.length_ms));
    }
    if (i > 0 && tl.holds[i].first < tl.holds[i - 1].until) {
      fail(ErrorKind::Config, fmt::format("freeze {} overlaps freeze {}", i, i - 1));
    }
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    if (!(a.action_ms >= 0.0 && a.response_delay_ms >= 0.0)) {
      fail(ErrorKind::Config, fmt::format("action {} has a negative time", i + 1));
    }
    if (i > 0 && !(a.action_ms > actions[i - 1].action_ms)) {
      fail(ErrorKind::Config, fmt::format("action {} is not after action {}", i + 1, i));
    }
    if (!(a.response_diff >= motion_threshold && a.response_diff <= 1.0)) {
      fail(ErrorKind::Config, fmt::format("action {} response_diff {} not in [{}, 1]", i + 1,
                                          a.response_diff, motion_threshold));
    }
    const double shown_at = static_cast<double>(tl.responses[i]) * tl.period;
    if (shown_at > duration_ms - capture + kEps) {
      fail(ErrorKind::Config, fmt::format("action {} response falls after the last capture", i + 1));
    }
    if (i + 1 < actions.size() && !(shown_at < actions[i + 1].action_ms)) {
      fail(ErrorKind::Config, fmt::format("action {} response falls after the next action", i + 1));
    }
    for (const auto& h : tl.holds) {
      if (tl.responses[i] > h.first && tl.responses[i] < h.until) {
        fail(ErrorKind::Config, fmt::format("action {} response falls inside a freeze", i + 1));
      }
    }
  }
}

void to_json(nlohmann::json& j, const SynthConfig& cfg) {
  auto freezes = nlohmann::json::array();
  for (const auto& f : cfg.freezes) freezes.push_back({{"start_ms", f.start_ms}, {"length_ms", f.length_ms}});
  auto actions = nlohmann::json::array();
  for (const auto& a : cfg.actions) {
    actions.push_back({{"action_ms", a.action_ms},
                       {"response_delay_ms", a.response_delay_ms},
                       {"response_diff", a.response_diff}});
  }
  j = nlohmann::json{{"duration_ms", cfg.duration_ms},
                     {"session_fps", cfg.session_fps},
                     {"capture_fps", cfg.capture_fps},
                     {"freeze_schedule", freezes},
                     {"action_delays", actions},
                     {"ambient_diff", cfg.ambient_diff},
                     {"timestamp_jitter_ms", cfg.timestamp_jitter_ms},
                     {"motion_threshold", cfg.motion_threshold},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SynthConfig& cfg) {
  static const std::vector<std::string> kKeys{
      "duration_ms", "session_fps", "capture_fps", "freeze_schedule", "action_delays",
      "ambient_diff", "timestamp_jitter_ms", "motion_threshold", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      fail(ErrorKind::Config, fmt::format("unknown synth setting '{}'", key));
    }
  }
  cfg = SynthConfig{};
  cfg.duration_ms = j.value("duration_ms", cfg.duration_ms);
  cfg.session_fps = j.value("session_fps", cfg.session_fps);
  cfg.capture_fps = j.value("capture_fps", cfg.capture_fps);
  cfg.ambient_diff = j.value("ambient_diff", cfg.ambient_diff);
  cfg.timestamp_jitter_ms = j.value("timestamp_jitter_ms", cfg.timestamp_jitter_ms);
  cfg.motion_threshold = j.value("motion_threshold", cfg.motion_threshold);
  cfg.seed = j.value("seed", cfg.seed);
  for (const auto& f : j.value("freeze_schedule", nlohmann::json::array())) {
    cfg.freezes.push_back({f.at("start_ms").get<double>(), f.at("length_ms").get<double>()});
  }
  for (const auto& a : j.value("action_delays", nlohmann::json::array())) {
    cfg.actions.push_back({a.at("action_ms").get<double>(), a.at("response_delay_ms").get<double>(),
                           a.value("response_diff", 0.5)});
  }
}

void to_json(nlohmann::json& j, const GroundTruth& truth) {
  j = nlohmann::json{{"true_efps", truth.true_efps},
                     {"true_freeze_percent", truth.true_freeze_percent},
                     {"true_latencies_ms", truth.true_latencies_ms}};
}

GroundTruth ground_truth(const SynthConfig& cfg) {
  cfg.validate();
  const Timeline tl = make_timeline(cfg);
  GroundTruth truth;

  std::int64_t shown = tl.frames;
  double frozen_ms = 0.0;
  for (const auto& h : tl.holds) {
    const std::int64_t until = std::min(h.until, tl.frames);
    shown -= std::max<std::int64_t>(0, until - h.first - 1);
    const double held = std::min(static_cast<double>(h.until) * tl.period, cfg.duration_ms) -
                        static_cast<double>(h.first) * tl.period;
    frozen_ms += std::max(0.0, held - tl.period);
  }
  truth.true_efps = static_cast<double>(shown) / (cfg.duration_ms / 1000.0);
  truth.true_freeze_percent = 100.0 * frozen_ms / cfg.duration_ms;
  for (std::size_t i = 0; i < cfg.actions.size(); ++i) {
    truth.true_latencies_ms.push_back(static_cast<double>(tl.responses[i]) * tl.period -
                                      cfg.actions[i].action_ms);
  }
  return truth;
}

SynthSession generate_session(const SynthConfig& cfg) {
  const auto captures = simulate(cfg);
  SynthSession s;
  s.trace.capture_fps = cfg.capture_fps;
  s.trace.session_fps = cfg.session_fps;
  s.trace.duration_ms = cfg.duration_ms;
  s.trace.frames.reserve(captures.size());
  for (std::size_t i = 0; i < captures.size(); ++i) {
    s.trace.frames.push_back({i, captures[i].timestamp_ms, captures[i].diff});
  }
  for (std::size_t i = 0; i < cfg.actions.size(); ++i) {
    s.actions.actions.push_back({static_cast<int>(i) + 1, cfg.actions[i].action_ms});
  }
  s.truth = ground_truth(cfg);
  return s;
}

std::vector<TimedFrame> render_session(const SynthConfig& cfg, int width, int height) {
  constexpr int kSquare = 6;
  if (width < 4 * kSquare || height < 4 * kSquare) {
    fail(ErrorKind::Config, "render size too small");
  }
  const auto captures = simulate(cfg);
  std::vector<TimedFrame> frames;
  frames.reserve(captures.size());
  for (const auto& c : captures) {
    PixelFrame img(width, height, 1);
    const bool toggled = c.responses_shown % 2 == 1;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        img.at(x, y, 0) = (toggled && x < width / 2) ? 200 : 32;
      }
    }
    const auto step = static_cast<int>(c.shown % 1000);
    const int sx = (step * 3) % (width - kSquare);
    const int sy = (step * 2) % (height - kSquare);
    for (int y = sy; y < sy + kSquare; ++y) {
      for (int x = sx; x < sx + kSquare; ++x) img.at(x, y, 0) = 255;
    }
    frames.push_back({c.timestamp_ms, std::move(img)});
  }
  return frames;
}

Dataset generate_dataset(std::size_t rows, std::uint64_t seed) {
  // Scenario-style generator: a latent radio quality drives the UE and base
  // station indicators, the stream configuration sets the demand, and the
  // targets respond nonlinearly to the demand / capacity ratio.
  Rng rng(seed);
  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  static constexpr std::array<double, 3> kFps{30.0, 60.0, 120.0};
  static constexpr std::array<double, 4> kRb{25.0, 50.0, 75.0, 100.0};

  std::vector<std::string> cols;
  for (const auto& m : schema()) cols.push_back(m.name);
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols.size()));

  for (std::size_t r = 0; r < rows; ++r) {
    const double res = static_cast<double>(rng.index(4));
    const double fps = kFps[rng.index(3)];
    const double rb = kRb[rng.index(4)];
    const double q = rng.uniform();

    const double rsrp = -104.0 + 54.0 * clamp01(q + 0.06 * rng.normal());
    const double sinr = 6.0 + 20.0 * clamp01(q + 0.10 * rng.normal());
    const double rssi = -95.0 + 44.0 * clamp01(0.2 + 0.7 * q + 0.08 * rng.normal());
    const double rsrq = -8.0 + 5.0 * clamp01(0.8 + 0.1 * q + 0.2 * rng.normal());
    const double cqi = std::clamp(std::round(12.0 + 0.8 * (q - 0.5) + 2.0 * rng.normal()), 0.0, 15.0);
    const double pucch = -11.39 + 55.53 * clamp01(0.1 + 0.7 * q + 0.12 * rng.normal());
    const double pusch = -25.78 + 62.43 * clamp01(0.3 + 0.5 * q + 0.10 * rng.normal());

    const double capacity = (rb / 100.0) * (0.25 + 0.75 * q);
    const double demand = (0.25 + 0.2 * res) * (fps / 120.0);
    const double load = demand / capacity;

    const double ping = std::clamp(
        8.0 + 25.0 * (1.0 - q) + 220.0 * std::pow(std::max(0.0, load - 0.7), 1.5) +
            6.0 * std::abs(rng.normal()),
        1.0, 895.0);
    const double radio_loss = std::clamp(
        25.0 * sigmoid(18.0 * (0.12 - q)) * rng.uniform(0.5, 1.0), 0.0, 25.0);
    const double host_loss =
        std::clamp(radio_loss + 10.0 * sigmoid(6.0 * (load - 1.6)) * rng.uniform(), 0.0, 25.0);

    const double latency = std::clamp(
        32.0 + 0.55 * ping + 9.0 * res + 900.0 / fps + 40.0 * std::pow(std::max(0.0, load - 1.0), 2) +
            12.0 * (1.0 - q) * (1.0 - q) + 4.0 * rng.normal(),
        30.59, 498.65);
    const double freeze = std::clamp(
        85.0 * sigmoid(7.0 * (load - 1.3)) + 2.0 * host_loss + 1.0 * rng.normal(), 0.0, 100.0);
    const double efps = std::clamp(
        fps * (1.0 - freeze / 100.0) * (0.92 + 0.08 * q) - 0.3 * radio_loss + 1.0 * rng.normal(),
        0.1, 116.17);

    const std::array<double, 16> row{latency, freeze, efps, res, fps, ping, radio_loss, host_loss,
                                     rsrp, rsrq, rssi, sinr, rb, cqi, pucch, pusch};
    for (std::size_t c = 0; c < row.size(); ++c) {
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return Dataset(std::move(cols), std::move(data));
}

}  // namespace cgkqi
