#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cgkqi {

/// A captured screen image: row-major, channel-interleaved 8-bit samples.
class PixelFrame {
 public:
  PixelFrame(int width, int height, int channels);
  PixelFrame(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool operator==(const PixelFrame&) const = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<std::uint8_t> data_;
};

struct DiffConfig {
  int pixel_threshold = 0;       // per-channel |a-b| above this marks a pixel changed
  double identity_eps = 0.0;     // diff_fraction at or below this means "same frame"
  double motion_threshold = 0.25;  // diff_fraction at or above this means "action response"

  void validate() const;
};

struct FrameRecord {
  std::size_t index = 0;
  double timestamp_ms = 0.0;
  double diff_fraction = 1.0;

  bool operator==(const FrameRecord&) const = default;
};

struct FrameTrace {
  double capture_fps = 0.0;
  double session_fps = 0.0;
  double duration_ms = 0.0;
  std::vector<FrameRecord> frames;

  /// Checks ordering, diff range and timestamp bounds. Throws on violation.
  void validate() const;

  bool operator==(const FrameTrace&) const = default;
};

struct TimedFrame {
  double timestamp_ms;
  PixelFrame frame;
};

/// Fraction of pixels where any channel differs by more than
/// cfg.pixel_threshold. Symmetric, in [0, 1].
double compute_diff_fraction(const PixelFrame& a, const PixelFrame& b, const DiffConfig& cfg);

/// Builds a trace from timestamped frames; record i carries the difference
/// against frame i-1, record 0 is fixed at 1.0.
FrameTrace build_trace(std::span<const TimedFrame> frames, double capture_fps, double session_fps,
                       const DiffConfig& cfg);

// CSV with header `index,timestamp_ms,diff_fraction`.
void write_trace_csv(const FrameTrace& trace, const std::filesystem::path& path);
void write_trace_csv(const FrameTrace& trace, std::ostream& out);

/// Reads frame records. Rates and duration are not part of the file and are
/// supplied by the caller; a non-positive duration means "last timestamp".
FrameTrace read_trace_csv(const std::filesystem::path& path, double capture_fps,
                          double session_fps, double duration_ms = 0.0);

}  // namespace cgkqi
