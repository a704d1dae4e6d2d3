#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "cgkqi/dataset.hpp"
#include "cgkqi/synth.hpp"
#include "support.hpp"

namespace cgkqi {
namespace {

using testing::TempDir;
using testing::error_kind_of;

std::string header() {
  std::string h;
  for (const auto& c : schema()) h += (h.empty() ? "" : ",") + c.name;
  return h;
}

// One in-range row; `override` replaces the value for a column.
std::string row(const std::string& column = "", const std::string& value = "") {
  std::string r;
  for (const auto& c : schema()) {
    std::string v;
    if (c.name == column) v = value;
    else if (c.name == "Resolution") v = "1080p";
    else v = fmt::format("{}", c.source == Source::Target ? std::max(c.min, 1.0) : (c.min + c.max) / 2);
    r += (r.empty() ? "" : ",") + v;
  }
  return r;
}

TEST(Schema, SixteenColumnsThirteenPredictors) {
  EXPECT_EQ(schema().size(), 16u);
  EXPECT_EQ(predictor_names().size(), 13u);
  EXPECT_EQ(target_names(), (std::vector<std::string>{"CGlatency", "FreezePercent", "EFPS"}));
}

TEST(Resolution, OrdinalCodes) {
  EXPECT_EQ(encode_resolution("720p"), 0.0);
  EXPECT_EQ(encode_resolution("1080p"), 1.0);
  EXPECT_EQ(encode_resolution("1440p"), 2.0);
  EXPECT_EQ(encode_resolution("4K"), 3.0);
  EXPECT_FALSE(encode_resolution("8K"));
  EXPECT_EQ(decode_resolution(3), "4K");
}

TEST(Load, RsrpInRangeLoads) {
  std::istringstream in(header() + "\n" + row("RSRP", "-71") + "\n");
  const auto ds = parse_dataset(in);
  EXPECT_EQ(ds.column("RSRP")(0), -71.0);
}

TEST(Load, RsrpPositiveFails) {
  std::istringstream in(header() + "\n" + row("RSRP", "10") + "\n");
  try {
    parse_dataset(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find("RSRP"), std::string::npos);
  }
}

TEST(Load, FourKEncodesAsThree) {
  std::istringstream in(header() + "\n" + row("Resolution", "4K") + "\n");
  EXPECT_EQ(parse_dataset(in).column("Resolution")(0), 3.0);
}

TEST(Load, FiveRowsAnyColumnOrder) {
  auto cols = std::vector<std::string>{};
  for (const auto& c : schema()) cols.push_back(c.name);
  std::reverse(cols.begin(), cols.end());
  std::string text;
  for (const auto& c : cols) text += (text.empty() ? "" : ",") + c;
  text += "\n";
  for (int i = 0; i < 5; ++i) {
    std::string r;
    for (const auto& c : cols) {
      const auto& m = column_meta(c);
      std::string v = c == "Resolution" ? "720p" : fmt::format("{}", m.source == Source::Target ? 1.0 + i : m.min);
      r = r.empty() ? v : r + "," + v;
    }
    text += r + "\n";
  }
  std::istringstream in(text);
  const auto ds = parse_dataset(in);
  EXPECT_EQ(ds.rows(), 5u);
  EXPECT_EQ(ds.columns().front(), "CGlatency");
  EXPECT_EQ(ds.column("CGlatency")(4), 5.0);
  EXPECT_EQ(ds.column("RSRP")(0), -104.0);
}

TEST(Load, Errors) {
  auto parse = [](const std::string& text, LoadOptions o = {}) {
    std::istringstream in(text);
    return error_kind_of([&] { parse_dataset(in, o); });
  };
  EXPECT_EQ(parse(""), ErrorKind::Validation);
  EXPECT_EQ(parse(header() + ",Bogus\n" + row() + ",1\n"), ErrorKind::Validation);
  EXPECT_EQ(parse(header() + "\n" + row("SINR", "abc") + "\n"), ErrorKind::Validation);
  EXPECT_EQ(parse(header() + "\n" + row("SINR", "nan") + "\n"), ErrorKind::Validation);
  EXPECT_EQ(parse(header() + "\n" + row("FreezePercent", "101") + "\n"), ErrorKind::Validation);
  EXPECT_EQ(parse(header() + "\n1,2\n"), ErrorKind::Validation);
  EXPECT_EQ(error_kind_of([] { load_dataset("/nonexistent/x.csv"); }), ErrorKind::Io);
}

TEST(Load, TargetsOptional) {
  std::string h, r;
  for (const auto& c : schema()) {
    if (c.source == Source::Target) continue;
    h += (h.empty() ? "" : ",") + c.name;
    r += (r.empty() ? "" : ",") + (c.name == "Resolution" ? std::string("720p") : fmt::format("{}", c.min));
  }
  std::istringstream a(h + "\n" + r + "\n");
  EXPECT_EQ(error_kind_of([&] { parse_dataset(a); }), ErrorKind::Validation);
  std::istringstream b(h + "\n" + r + "\n");
  const auto ds = parse_dataset(b, {.require_targets = false});
  EXPECT_EQ(ds.cols(), 13u);
}

TEST(Load, CsvRoundTrip) {
  TempDir dir;
  const auto ds = generate_dataset(50, 3);
  write_dataset_csv(ds, dir / "d.csv");
  const auto back = load_dataset(dir / "d.csv");
  EXPECT_EQ(back.columns(), ds.columns());
  EXPECT_TRUE(back.data() == ds.data());
}

TEST(Scaler, MidpointOfRsrpRange) {
  Eigen::MatrixXd train(2, 1);
  train << -104, -50;
  MinMaxScaler s;
  s.fit(train, {"RSRP"});
  Eigen::MatrixXd q(1, 1);
  q << -77;
  EXPECT_DOUBLE_EQ(s.transform(q)(0, 0), 0.5);
}

TEST(Scaler, RoundTripAndRange) {
  const auto ds = generate_dataset(400, 5);
  const auto x = ds.select(predictor_names());
  MinMaxScaler s;
  s.fit(x);
  const auto z = s.transform(x);
  EXPECT_GE(z.minCoeff(), 0.0);
  EXPECT_LE(z.maxCoeff(), 1.0);
  EXPECT_LT((s.inverse(z) - x).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()));
}

TEST(Scaler, ParametersComeFromTrainingRowsOnly) {
  const auto ds = generate_dataset(300, 6);
  const auto parts = split(ds, 0.3, 9);
  const auto train_x = parts.train.select(predictor_names());
  auto test_x = parts.test.select(predictor_names());
  MinMaxScaler a;
  a.fit(train_x);
  test_x.row(0).setConstant(1e6);
  MinMaxScaler b;
  b.fit(train_x);
  EXPECT_EQ(a.params().x_min, b.params().x_min);
  EXPECT_EQ(a.params().x_max, b.params().x_max);
  // Out-of-range test rows pass through unclamped.
  EXPECT_GT(a.transform(test_x).row(0).maxCoeff(), 1.0);
}

TEST(Scaler, ConstantColumnMapsToZero) {
  Eigen::MatrixXd x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  MinMaxScaler s;
  s.fit(x);
  EXPECT_TRUE(s.params().is_constant(1));
  EXPECT_TRUE((s.transform(x).col(1).array() == 0.0).all());
}

TEST(Scaler, Errors) {
  MinMaxScaler s;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_EQ(error_kind_of([&] { s.transform(x); }), ErrorKind::Usage);
  s.fit(x);
  EXPECT_EQ(error_kind_of([&] { s.transform(Eigen::MatrixXd::Ones(2, 3)); }), ErrorKind::Shape);
  EXPECT_EQ(error_kind_of([] { MinMaxScaler().fit(Eigen::MatrixXd(0, 2)); }), ErrorKind::Usage);
}

TEST(Scaler, JsonRoundTrip) {
  const auto p = fit_scaler(generate_dataset(40, 2).select(predictor_names()), predictor_names());
  const nlohmann::json j = p;
  const auto back = j.get<ScalerParams>();
  EXPECT_EQ(back.columns, p.columns);
  EXPECT_EQ(back.x_min, p.x_min);
  EXPECT_EQ(back.x_max, p.x_max);
}

TEST(Split, SeventyThirtyOf3840) {
  const auto s = split_indices(3840, 0.3, 42);
  EXPECT_EQ(s.train.size(), 2688u);
  EXPECT_EQ(s.test.size(), 1152u);
}

TEST(Split, DeterministicPartition) {
  const auto a = split_indices(1000, 0.3, 7);
  const auto b = split_indices(1000, 0.3, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(split_indices(1000, 0.3, 8).test, a.test);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
}

TEST(Split, DatasetSidesRecombine) {
  const auto ds = generate_dataset(120, 4);
  const auto parts = split(ds, 0.25, 3);
  EXPECT_EQ(parts.train.rows() + parts.test.rows(), ds.rows());
  EXPECT_EQ(parts.test.rows(), 30u);
  double sum = parts.train.data().sum() + parts.test.data().sum();
  EXPECT_NEAR(sum, ds.data().sum(), 1e-6 * std::abs(ds.data().sum()));
}

TEST(Split, Errors) {
  EXPECT_EQ(error_kind_of([] { split_indices(10, 0.0, 1); }), ErrorKind::Usage);
  EXPECT_EQ(error_kind_of([] { split_indices(10, 1.0, 1); }), ErrorKind::Usage);
  EXPECT_EQ(error_kind_of([] { split_indices(1, 0.3, 1); }), ErrorKind::Validation);
  const auto s = split_indices(2, 0.01, 1);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.train.size(), 1u);
}

TEST(Generator, SchemaAndRanges) {
  const auto ds = generate_dataset(500, 1);
  EXPECT_EQ(ds.cols(), 16u);
  EXPECT_NO_THROW(ds.validate());
  const auto again = generate_dataset(500, 1);
  EXPECT_TRUE(again.data() == ds.data());
}

}  // namespace
}  // namespace cgkqi
