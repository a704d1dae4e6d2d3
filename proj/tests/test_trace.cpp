#include <fstream>

#include <fmt/format.h>

#include <gtest/gtest.h>

#include "cgkqi/image_io.hpp"
#include "cgkqi/trace.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;
using testing::error_kind_of;
using testing::random_frame;

double naive_diff(const PixelFrame& a, const PixelFrame& b, int threshold) {
  int changed = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      bool any = false;
      for (int c = 0; c < a.channels(); ++c) {
        if (std::abs(int(a.at(x, y, c)) - int(b.at(x, y, c))) > threshold) any = true;
      }
      changed += any ? 1 : 0;
    }
  }
  return double(changed) / (a.width() * a.height());
}

TEST(PixelFrame, RejectsBadShapes) {
  EXPECT_EQ(error_kind_of([] { PixelFrame(0, 4, 1); }), ErrorKind::Shape);
  EXPECT_EQ(error_kind_of([] { PixelFrame(4, 4, 2); }), ErrorKind::Shape);
  EXPECT_EQ(error_kind_of([] { PixelFrame(2, 2, 1, std::vector<std::uint8_t>(3)); }), ErrorKind::Shape);
}

TEST(DiffFraction, IdenticalFramesAreZero) {
  Rng rng(1);
  const auto f = random_frame(rng, 16, 9, 3);
  EXPECT_EQ(compute_diff_fraction(f, f, {}), 0.0);
}

TEST(DiffFraction, OnePixelOfFour) {
  PixelFrame a(2, 2, 1, {10, 10, 10, 10});
  PixelFrame b(2, 2, 1, {10, 20, 10, 10});
  EXPECT_EQ(compute_diff_fraction(a, b, {}), 0.25);
}

TEST(DiffFraction, MatchesPixelLoop) {
  Rng rng(2);
  DiffConfig cfg;
  cfg.pixel_threshold = 8;
  for (int ch : {1, 3}) {
    const auto a = random_frame(rng, 64, 64, ch);
    auto b = a;
    for (auto& v : b.data()) {
      if (rng.uniform() < 0.3) v = static_cast<std::uint8_t>(rng.index(256));
      else if (rng.uniform() < 0.5) v = static_cast<std::uint8_t>(std::min(255, v + int(rng.index(12))));
    }
    EXPECT_DOUBLE_EQ(compute_diff_fraction(a, b, cfg), naive_diff(a, b, 8));
  }
}

TEST(DiffFraction, SymmetricBoundedAndMonotoneInThreshold) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_frame(rng, 12, 7, 3);
    const auto b = random_frame(rng, 12, 7, 3);
    double prev = 2.0;
    for (int t = 0; t <= 255; t += 15) {
      DiffConfig cfg;
      cfg.pixel_threshold = t;
      const double d = compute_diff_fraction(a, b, cfg);
      EXPECT_EQ(d, compute_diff_fraction(b, a, cfg));
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
      EXPECT_LE(d, prev);
      prev = d;
    }
  }
}

TEST(DiffFraction, ShapeMismatch) {
  EXPECT_EQ(error_kind_of([] { compute_diff_fraction(PixelFrame(2, 2, 1), PixelFrame(2, 3, 1), {}); }),
            ErrorKind::Shape);
  EXPECT_EQ(error_kind_of([] { compute_diff_fraction(PixelFrame(2, 2, 1), PixelFrame(2, 2, 3), {}); }),
            ErrorKind::Shape);
}

TEST(BuildTrace, IdenticalFrames) {
  const PixelFrame f(4, 4, 1);
  const std::vector<TimedFrame> frames{{0, f}, {7, f}, {14, f}};
  const auto t = build_trace(frames, 144, 60, {});
  ASSERT_EQ(t.frames.size(), 3u);
  EXPECT_EQ(t.frames[0].diff_fraction, 1.0);
  EXPECT_EQ(t.frames[1].diff_fraction, 0.0);
  EXPECT_EQ(t.frames[2].diff_fraction, 0.0);
  EXPECT_EQ(t.duration_ms, 14.0);
}

TEST(BuildTrace, AlternatingFrames) {
  Rng rng(4);
  const auto a = random_frame(rng, 8, 8, 3);
  const auto b = random_frame(rng, 8, 8, 3);
  std::vector<TimedFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back({i * 7.0, i % 2 ? b : a});
  const auto t = build_trace(frames, 144, 60, {});
  const double x = t.frames[1].diff_fraction;
  EXPECT_GT(x, 0.0);
  for (std::size_t i = 1; i < t.frames.size(); ++i) EXPECT_EQ(t.frames[i].diff_fraction, x);
}

TEST(BuildTrace, Errors) {
  const PixelFrame f(2, 2, 1);
  EXPECT_EQ(error_kind_of([] { build_trace({}, 144, 60, {}); }), ErrorKind::EmptySession);
  const std::vector<TimedFrame> back{{0, f}, {7, f}, {7, f}};
  EXPECT_EQ(error_kind_of([&] { build_trace(back, 144, 60, {}); }), ErrorKind::Ordering);
}

TEST(TraceCsv, RoundTrip) {
  TempDir dir;
  FrameTrace t{144, 60, 30.5, {{0, 0.0, 1.0}, {1, 6.944444444444445, 0.125}, {2, 13.9, 0.0}, {3, 30.5, 0.3333333333333333}}};
  write_trace_csv(t, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "index,timestamp_ms,diff_fraction");
  EXPECT_EQ(read_trace_csv(dir / "t.csv", 144, 60), t);
  EXPECT_EQ(read_trace_csv(dir / "t.csv", 144, 60, 100.0).duration_ms, 100.0);
}

TEST(TraceCsv, RejectsMalformed) {
  TempDir dir;
  {
    std::ofstream(dir / "bad.csv") << "index,timestamp_ms,diff_fraction\n0,0,1\n1,5,1.5\n";
  }
  EXPECT_EQ(error_kind_of([&] { read_trace_csv(dir / "bad.csv", 144, 60); }), ErrorKind::Validation);
  {
    std::ofstream(dir / "order.csv") << "index,timestamp_ms,diff_fraction\n0,10,1\n1,5,0\n";
  }
  EXPECT_EQ(error_kind_of([&] { read_trace_csv(dir / "order.csv", 144, 60); }), ErrorKind::Ordering);
  EXPECT_EQ(error_kind_of([&] { read_trace_csv(dir / "missing.csv", 144, 60); }), ErrorKind::Io);
}

TEST(ImageIo, PpmAndPngRoundTrip) {
  TempDir dir;
  Rng rng(5);
  const auto rgb = random_frame(rng, 17, 5, 3);
  write_ppm(rgb, dir / "a.ppm");
  EXPECT_EQ(read_image(dir / "a.ppm"), rgb);
  write_png(rgb, dir / "a.png");
  EXPECT_EQ(read_image(dir / "a.png"), rgb);
  const auto gray = random_frame(rng, 6, 9, 1);
  write_png(gray, dir / "g.png");
  EXPECT_EQ(read_png(dir / "g.png"), gray);
}

TEST(ImageIo, UnknownFormat) {
  TempDir dir;
  std::ofstream(dir / "x.ppm") << "not an image";
  EXPECT_EQ(error_kind_of([&] { read_image(dir / "x.ppm"); }), ErrorKind::Validation);
}

TEST(ImageIo, DirectoryOfSixtyImagesMatchesPairwiseDiffs) {
  TempDir dir;
  Rng rng(6);
  std::vector<PixelFrame> made;
  auto frame = random_frame(rng, 32, 24, 3);
  for (int i = 0; i < 60; ++i) {
    // Mix of held frames, small edits and large edits.
    const double u = rng.uniform();
    if (u < 0.6) {
      const int edits = 1 + int(rng.index(u < 0.3 ? 20 : 400));
      for (int e = 0; e < edits; ++e) frame.data()[rng.index(frame.data().size())] = uint8_t(rng.index(256));
    }
    made.push_back(frame);
    const auto name = fmt::format("cap_{:03d}.{}", i, i % 2 ? "png" : "ppm");
    if (i % 2) write_png(frame, dir / name);
    else write_ppm(frame, dir / name);
  }
  const auto files = list_images(dir.path());
  ASSERT_EQ(files.size(), 60u);
  std::vector<TimedFrame> frames;
  for (std::size_t i = 0; i < files.size(); ++i) frames.push_back({i * 1000.0 / 144.0, read_image(files[i])});
  const auto t = build_trace(frames, 144, 60, {});
  ASSERT_EQ(t.frames.size(), 60u);
  EXPECT_EQ(t.frames[0].diff_fraction, 1.0);
  for (std::size_t i = 1; i < 60; ++i) {
    EXPECT_EQ(t.frames[i].diff_fraction, naive_diff(made[i - 1], made[i], 0)) << i;
    EXPECT_EQ(t.frames[i].timestamp_ms, i * 1000.0 / 144.0);
  }
}

}  // namespace
}  // namespace cgkqi
