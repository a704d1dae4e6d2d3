#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "cgkqi/dataset.hpp"
#include "cgkqi/kqi.hpp"
#include "cgkqi/trace.hpp"

namespace cgkqi {

struct FreezeSpec {
  double start_ms = 0.0;
  double length_ms = 0.0;
};

struct ActionSpec {
  double action_ms = 0.0;
  double response_delay_ms = 0.0;
  double response_diff = 0.5;
};

/// Session generator settings.
///
/// Content frame k is presented at k * 1000 / session_fps. A freeze holds the
/// frame on screen at start_ms until the first content instant at or after
/// start_ms + length_ms. An action response is drawn into the first content
/// frame presented at or after action_ms + response_delay_ms.
struct SynthConfig {
  double duration_ms = 10000.0;
  double session_fps = 60.0;
  double capture_fps = 144.0;
  std::vector<FreezeSpec> freezes;
  std::vector<ActionSpec> actions;
  double ambient_diff = 0.05;
  double timestamp_jitter_ms = 0.0;
  double motion_threshold = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

/// Values derived in closed form from a SynthConfig.
struct GroundTruth {
  double true_efps = 0.0;
  double true_freeze_percent = 0.0;
  std::vector<double> true_latencies_ms;
};

void to_json(nlohmann::json& j, const GroundTruth& truth);

struct SynthSession {
  FrameTrace trace;
  ActionLog actions;
  GroundTruth truth;
};

GroundTruth ground_truth(const SynthConfig& cfg);

SynthSession generate_session(const SynthConfig& cfg);

/// Pixel rendering of the same session: a small square moves one step per
/// content frame, and every action response toggles a large block. Returns
/// one image per capture instant, matching generate_session(cfg).trace.
std::vector<TimedFrame> render_session(const SynthConfig& cfg, int width = 64, int height = 48);

/// Schema-conformant dataset with nonlinear dependence between radio/network
/// predictors and the three targets.
Dataset generate_dataset(std::size_t rows, std::uint64_t seed);

}  // namespace cgkqi
