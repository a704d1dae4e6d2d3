#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "cgkqi/error.hpp"
#include "cgkqi/rng.hpp"
#include "cgkqi/synth.hpp"
#include "cgkqi/trace.hpp"

namespace cgkqi::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cgkqi_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a cgkqi::Error";
  return ErrorKind::Usage;
}

inline PixelFrame random_frame(Rng& rng, int w, int h, int ch) {
  PixelFrame f(w, h, ch);
  for (auto& v : f.data()) v = static_cast<std::uint8_t>(rng.index(256));
  return f;
}

/// Random valid synthetic session: rejection-sampled against validate().
inline SynthConfig random_synth_config(Rng& rng, double session_fps, double capture_fps, int max_freezes,
                                       int actions) {
  for (;;) {
    SynthConfig c;
    c.session_fps = session_fps;
    c.capture_fps = capture_fps;
    c.duration_ms = std::round(rng.uniform(10000.0, 60000.0));
    c.seed = rng.next();
    const int freezes = static_cast<int>(rng.index(static_cast<std::uint64_t>(max_freezes) + 1));
    double t = rng.uniform(200.0, 1500.0);
    for (int i = 0; i < freezes; ++i) {
      const double len = rng.uniform(100.0, 1500.0);
      if (t + len > c.duration_ms) break;
      c.freezes.push_back({t, len});
      t += len + rng.uniform(200.0, 6000.0);
    }
    const double gap = c.duration_ms / (actions + 1);
    for (int i = 0; i < actions; ++i) {
      c.actions.push_back({gap * (i + 1) + rng.uniform(-gap / 4, gap / 4), rng.uniform(30.0, 300.0),
                           rng.uniform(0.3, 1.0)});
    }
    try {
      c.validate();
      return c;
    } catch (const Error&) {
    }
  }
}

}  // namespace cgkqi::testing
