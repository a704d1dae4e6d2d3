#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cgkqi/eval.hpp"
#include "cgkqi/synth.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;
using testing::error_kind_of;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  std::size_t i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(Mae, Examples) {
  EXPECT_DOUBLE_EQ(mae(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(mae(vec({1, 2, 3}), vec({2, 0, 3})), 1.0);
  EXPECT_EQ(error_kind_of([] { mae(vec({1, 2}), vec({1})); }), ErrorKind::Shape);
  EXPECT_EQ(error_kind_of([] { mae(Eigen::VectorXd(), Eigen::VectorXd()); }), ErrorKind::Shape);
}

TEST(Mase, HandComputed) {
  const auto r = mase(vec({4}), vec({6}), vec({0, 10}));
  EXPECT_DOUBLE_EQ(r.naive_mae_in_sample, 5.0);
  EXPECT_DOUBLE_EQ(r.mae, 2.0);
  EXPECT_DOUBLE_EQ(r.mase, 0.4);
  EXPECT_EQ(r.n_test, 1u);
}

TEST(Mase, NaiveMeanOnTrainingSetIsExactlyOne) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y(17 + trial);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(-50, 300);
    const Eigen::VectorXd naive = Eigen::VectorXd::Constant(y.size(), y.mean());
    EXPECT_EQ(mase(y, naive, y).mase, 1.0);
  }
}

TEST(Mase, PerfectPredictionIsZero) {
  EXPECT_EQ(mase(vec({1, 5, 9}), vec({1, 5, 9}), vec({0, 1, 2})).mase, 0.0);
}

TEST(Mase, ScaleFreeForExactScalings) {
  Rng rng(2);
  Eigen::VectorXd yt(40), yh(40), ytr(60);
  for (auto* v : {&yt, &yh, &ytr}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = rng.uniform(0, 100);
  }
  const double base = mase(yt, yh, ytr).mase;
  for (double c : {0.25, 0.5, 2.0, 8.0, 1024.0}) {
    EXPECT_EQ(mase(c * yt, c * yh, c * ytr).mase, base) << c;
  }
  for (double c : {0.3, 3.0, 17.0}) EXPECT_NEAR(mase(c * yt, c * yh, c * ytr).mase, base, 1e-12);
}

TEST(Mase, ZeroTargetsStayFinite) {
  const auto r = mase(vec({0, 0, 0}), vec({0.5, 0, 1}), vec({0, 0, 3, 0}));
  EXPECT_TRUE(std::isfinite(r.mase));
}

TEST(Mase, ConstantTrainingTargetIsDegenerate) {
  EXPECT_EQ(error_kind_of([] { mase(vec({1}), vec({1}), vec({2, 2, 2})); }), ErrorKind::Degenerate);
}

TEST(Mase, JsonFields) {
  const auto j = to_json(mase(vec({4}), vec({6}), vec({0, 10})));
  EXPECT_EQ(j["mase"], 0.4);
  EXPECT_EQ(j["naive_mae_in_sample"], 5.0);
  EXPECT_EQ(j["n_test"], 1);
}

TEST(Bench, ReportsSaneTimings) {
  const auto ds = generate_dataset(100, 3);
  const std::vector<std::string> f{"PING_avg", "fps"};
  const auto X = ds.select(f);
  auto m = fit(ModelSpec::defaults(Technique::LR), X, ds.column("CGlatency"));
  const auto t = bench_prediction(m, X.row(0), 200);
  EXPECT_EQ(t.n, 200u);
  EXPECT_GE(t.mean_prediction_ms, t.min_ms);
  EXPECT_LE(t.mean_prediction_ms, t.max_ms);
  EXPECT_GT(t.max_ms, 0.0);
  EXPECT_EQ(error_kind_of([&] { bench_prediction(m, X.row(0), 0); }), ErrorKind::Usage);
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.techniques = {Technique::LR, Technique::KNR};
  c.targets = {"CGlatency", "EFPS"};
  c.groups = {FeatureGroup::BS, FeatureGroup::UE};
  c.k_min = 2;
  c.k_max = 7;
  c.seed = 4;
  return c;
}

TEST(Sweep, CardinalityAndOrder) {
  const auto ds = generate_dataset(300, 5);
  const auto rows = run_sweep(ds, small_sweep());
  // BS has 6 features (k 2..6), UE has 9 (k 2..7).
  ASSERT_EQ(rows.size(), 2u * 2u * (5u + 6u));
  EXPECT_EQ(rows[0].target, "CGlatency");
  EXPECT_EQ(rows[0].group, FeatureGroup::BS);
  EXPECT_EQ(rows[0].technique, Technique::LR);
  EXPECT_EQ(rows[0].k, 2u);
  EXPECT_EQ(rows[4].k, 6u);
  EXPECT_EQ(rows[5].technique, Technique::KNR);
  for (const auto& r : rows) {
    EXPECT_EQ(r.features.size(), r.k);
    EXPECT_TRUE(std::isfinite(r.mase));
    EXPECT_TRUE(r.error.empty());
  }
}

TEST(Sweep, DeterministicAcrossJobCounts) {
  const auto ds = generate_dataset(300, 6);
  auto cfg = small_sweep();
  const auto a = run_sweep(ds, cfg);
  cfg.jobs = 3;
  const auto b = run_sweep(ds, cfg);
  std::ostringstream sa, sb;
  write_sweep_csv(a, sa);
  write_sweep_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Sweep, CsvAndSvg) {
  TempDir dir;
  const auto ds = generate_dataset(200, 7);
  const auto rows = run_sweep(ds, small_sweep());
  write_sweep_csv(rows, dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "technique,target,group,k,mase,features");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, rows.size());
  const auto files = write_sweep_svgs(rows, dir / "svg");
  EXPECT_EQ(files.size(), 4u);
  const auto svg = sweep_svg(rows, "EFPS", FeatureGroup::UE);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("KNR"), std::string::npos);
}

TEST(Sweep, FailedCellsAreRecorded) {
  const auto ds = generate_dataset(200, 8);
  SweepConfig c;
  c.techniques = {Technique::KNR};
  c.targets = {"CGlatency"};
  c.groups = {FeatureGroup::BS};
  c.k_min = 1;
  c.k_max = 2;
  c.overrides = {{"KNR", {{"n_neighbors", 100000}}}};
  const auto rows = run_sweep(ds, c);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(std::isnan(r.mase));
    EXPECT_FALSE(r.error.empty());
  }
}

}  // namespace
}  // namespace cgkqi
