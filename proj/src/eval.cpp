#include "cgkqi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "cgkqi/error.hpp"

namespace cgkqi {
namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    fail(ErrorKind::Shape, fmt::format("mae: {} targets vs {} predictions", y.size(), yhat.size()));
  }
  if (y.empty()) fail(ErrorKind::Shape, "mae of an empty vector");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mae(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) { return mae(as_span(y), as_span(yhat)); }

nlohmann::ordered_json to_json(const EvalResult& r) {
  return {{"mae", r.mae}, {"mase", r.mase}, {"naive_mae_in_sample", r.naive_mae_in_sample}, {"n_test", r.n_test}};
}

EvalResult mase(std::span<const double> y_test, std::span<const double> yhat, std::span<const double> y_train) {
  if (y_train.empty()) fail(ErrorKind::Shape, "mase: empty training targets");
  // Same reduction as Eigen's mean(), so a caller's y_train.mean() forecast
  // scores exactly 1.
  const double mean =
      Eigen::Map<const Eigen::VectorXd>(y_train.data(), static_cast<Eigen::Index>(y_train.size())).mean();
  const std::vector<double> naive(y_train.size(), mean);
  EvalResult r;
  r.naive_mae_in_sample = mae(y_train, naive);
  if (!(r.naive_mae_in_sample > 0.0)) {
    fail(ErrorKind::Degenerate, "mase: training targets are constant, the naive baseline error is zero");
  }
  r.mae = mae(y_test, yhat);
  r.mase = r.mae / r.naive_mae_in_sample;
  r.n_test = y_test.size();
  return r;
}

EvalResult mase(const Eigen::VectorXd& y_test, const Eigen::VectorXd& yhat, const Eigen::VectorXd& y_train) {
  return mase(as_span(y_test), as_span(yhat), as_span(y_train));
}

nlohmann::ordered_json to_json(const TimingResult& r) {
  return {{"technique", r.technique}, {"target", r.target},           {"n", r.n},
          {"mean_prediction_ms", r.mean_prediction_ms}, {"min_ms", r.min_ms}, {"max_ms", r.max_ms}};
}

TimingResult bench_prediction(const TrainedModel& model, const Eigen::RowVectorXd& row, std::size_t n) {
  if (n < 1) fail(ErrorKind::Usage, "bench needs at least one repetition");
  using clock = std::chrono::steady_clock;
  const Eigen::MatrixXd warm = row;
  volatile double sink = model.predict(warm)(0);
  TimingResult r;
  r.technique = std::string(to_string(model.spec().technique));
  r.n = n;
  r.min_ms = INFINITY;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    const Eigen::MatrixXd x = row;
    sink = model.predict(x)(0);
    const auto t1 = clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    total += ms;
    r.min_ms = std::min(r.min_ms, ms);
    r.max_ms = std::max(r.max_ms, ms);
  }
  (void)sink;
  r.mean_prediction_ms = total / static_cast<double>(n);
  return r;
}

}  // namespace cgkqi
