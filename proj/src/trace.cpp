#include "cgkqi/trace.hpp"

#include <fstream>
#include <string>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "csv.hpp"

namespace cgkqi {

PixelFrame::PixelFrame(int width, int height, int channels)
    : PixelFrame(width, height, channels,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)) *
                                           static_cast<std::size_t>(std::max(channels, 0)))) {}

PixelFrame::PixelFrame(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    fail(ErrorKind::Shape, fmt::format("frame size {}x{} must be at least 1x1", width, height));
  }
  if (channels != 1 && channels != 3) {
    fail(ErrorKind::Shape, fmt::format("frame must have 1 or 3 channels, got {}", channels));
  }
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    fail(ErrorKind::Shape, fmt::format("frame data holds {} bytes, expected {}", data_.size(),
                                       pixel_count() * static_cast<std::size_t>(channels)));
  }
}

void DiffConfig::validate() const {
  if (pixel_threshold < 0 || pixel_threshold > 255) {
    fail(ErrorKind::Config, fmt::format("pixel_threshold {} outside [0, 255]", pixel_threshold));
  }
  if (!(identity_eps >= 0.0 && identity_eps <= 1.0)) {
    fail(ErrorKind::Config, fmt::format("identity_eps {} outside [0, 1]", identity_eps));
  }
  if (!(motion_threshold >= 0.0 && motion_threshold <= 1.0)) {
    fail(ErrorKind::Config, fmt::format("motion_threshold {} outside [0, 1]", motion_threshold));
  }
  if (!(identity_eps < motion_threshold)) {
    fail(ErrorKind::Config, "identity_eps must be below motion_threshold");
  }
}

void FrameTrace::validate() const {
  if (frames.empty()) fail(ErrorKind::EmptySession, "trace has no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (!(f.diff_fraction >= 0.0 && f.diff_fraction <= 1.0)) {
      fail(ErrorKind::Validation,
           fmt::format("frame {}: diff_fraction {} outside [0, 1]", i, f.diff_fraction));
    }
    if (i > 0 && !(f.timestamp_ms > frames[i - 1].timestamp_ms)) {
      fail(ErrorKind::Ordering, fmt::format("frame {}: timestamp {} ms not after {} ms", i,
                                            f.timestamp_ms, frames[i - 1].timestamp_ms));
    }
  }
  // Ordering holds, so only the ends can fall outside the session.
  for (std::size_t i : {std::size_t{0}, frames.size() - 1}) {
    const double t = frames[i].timestamp_ms;
    if (t < 0.0 || t > duration_ms) {
      fail(ErrorKind::Validation,
           fmt::format("frame {}: timestamp {} ms outside [0, {}]", i, t, duration_ms));
    }
  }
}

double compute_diff_fraction(const PixelFrame& a, const PixelFrame& b, const DiffConfig& cfg) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    fail(ErrorKind::Shape, fmt::format("cannot compare {}x{}x{} with {}x{}x{}", a.width(),
                                       a.height(), a.channels(), b.width(), b.height(),
                                       b.channels()));
  }
  const auto da = a.data();
  const auto db = b.data();
  const std::size_t ch = static_cast<std::size_t>(a.channels());
  std::size_t changed = 0;
  for (std::size_t p = 0, off = 0; p < a.pixel_count(); ++p, off += ch) {
    for (std::size_t c = 0; c < ch; ++c) {
      const int delta = std::abs(int{da[off + c]} - int{db[off + c]});
      if (delta > cfg.pixel_threshold) {
        ++changed;
        break;
      }
    }
  }
  return static_cast<double>(changed) / static_cast<double>(a.pixel_count());
}

FrameTrace build_trace(std::span<const TimedFrame> frames, double capture_fps, double session_fps,
                       const DiffConfig& cfg) {
  cfg.validate();
  if (frames.empty()) fail(ErrorKind::EmptySession, "no frames to build a trace from");
  FrameTrace trace;
  trace.capture_fps = capture_fps;
  trace.session_fps = session_fps;
  trace.frames.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && !(frames[i].timestamp_ms > frames[i - 1].timestamp_ms)) {
      fail(ErrorKind::Ordering, fmt::format("frame {}: timestamp {} ms not after {} ms", i,
                                            frames[i].timestamp_ms, frames[i - 1].timestamp_ms));
    }
    const double diff =
        i == 0 ? 1.0 : compute_diff_fraction(frames[i - 1].frame, frames[i].frame, cfg);
    trace.frames.push_back({i, frames[i].timestamp_ms, diff});
  }
  trace.duration_ms = frames.back().timestamp_ms;
  return trace;
}

void write_trace_csv(const FrameTrace& trace, std::ostream& out) {
  out << "index,timestamp_ms,diff_fraction\n";
  for (const auto& f : trace.frames) {
    out << fmt::format("{},{},{}\n", f.index, f.timestamp_ms, f.diff_fraction);
  }
}

void write_trace_csv(const FrameTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  write_trace_csv(trace, out);
}

FrameTrace read_trace_csv(const std::filesystem::path& path, double capture_fps,
                          double session_fps, double duration_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::EmptySession, path.string() + " is empty");
  const auto header = csv::split_line(line);
  if (header != std::vector<std::string>{"index", "timestamp_ms", "diff_fraction"}) {
    fail(ErrorKind::Validation,
         fmt::format("{}: expected header index,timestamp_ms,diff_fraction", path.string()));
  }
  FrameTrace trace;
  trace.capture_fps = capture_fps;
  trace.session_fps = session_fps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::is_blank(line)) continue;
    const auto cells = csv::split_line(line);
    if (cells.size() != 3) {
      fail(ErrorKind::Validation, fmt::format("{}:{}: expected 3 fields", path.string(), line_no));
    }
    const auto idx = csv::parse_int(cells[0]);
    const auto ts = csv::parse_double(cells[1]);
    const auto diff = csv::parse_double(cells[2]);
    if (!idx || *idx < 0 || !ts || !diff) {
      fail(ErrorKind::Validation, fmt::format("{}:{}: non-numeric field", path.string(), line_no));
    }
    trace.frames.push_back({static_cast<std::size_t>(*idx), *ts, *diff});
  }
  if (trace.frames.empty()) fail(ErrorKind::EmptySession, path.string() + " has no frames");
  trace.duration_ms = duration_ms > 0.0 ? duration_ms : trace.frames.back().timestamp_ms;
  trace.validate();
  return trace;
}

}  // namespace cgkqi
