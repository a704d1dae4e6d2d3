#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "cgkqi/dataset.hpp"
#include "cgkqi/featsel.hpp"
#include "cgkqi/models.hpp"

namespace cgkqi {

double mae(std::span<const double> y, std::span<const double> yhat);
double mae(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

struct EvalResult {
  double mae = 0.0;
  double mase = 0.0;
  double naive_mae_in_sample = 0.0;
  std::size_t n_test = 0;
};

nlohmann::ordered_json to_json(const EvalResult& r);

/// The data has no time order, so the naive forecaster is the training mean:
/// the denominator is the MAE of mean(y_train) on y_train itself.
/// Constant y_train throws ErrorKind::Degenerate.
EvalResult mase(std::span<const double> y_test, std::span<const double> yhat,
                std::span<const double> y_train);
EvalResult mase(const Eigen::VectorXd& y_test, const Eigen::VectorXd& yhat,
                const Eigen::VectorXd& y_train);

struct TimingResult {
  std::string technique;
  std::string target;
  std::size_t n = 0;
  double mean_prediction_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

nlohmann::ordered_json to_json(const TimingResult& r);

/// Times n single-row predictions after one warm-up call.
TimingResult bench_prediction(const TrainedModel& model, const Eigen::RowVectorXd& row,
                              std::size_t n = 1000);

struct SweepRow {
  Technique technique;
  std::string target;
  FeatureGroup group;
  std::size_t k = 0;
  double mase = 0.0;  // NaN when the cell failed
  std::vector<std::string> features;
  bool non_converged = false;
  std::string error;
};

struct SweepConfig {
  std::vector<Technique> techniques;
  std::vector<std::string> targets;
  std::vector<FeatureGroup> groups;
  std::size_t k_min = 1;
  std::size_t k_max = 13;  // clipped to each group's size
  double test_fraction = 0.30;
  std::uint64_t seed = 0;
  std::size_t bins = kDefaultBins;
  unsigned jobs = 1;
  /// Per-technique hyperparameter overrides applied on top of the tuned
  /// per-target defaults, e.g. {"ANN": {"epochs": 50}}.
  nlohmann::json overrides = nlohmann::json::object();
};

/// One split and one scaler for the whole sweep; for each (target, group, k)
/// selects features on train, fits with the target's tuned spec and scores
/// MASE on test. Rows are ordered by (target, group, technique, k).
std::vector<SweepRow> run_sweep(const Dataset& ds, const SweepConfig& cfg);

/// Header `technique,target,group,k,mase,features`; features joined by ';'.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// One line chart per (target, group): k on x, MASE on y, a series per
/// technique. Returns the written files.
std::vector<std::filesystem::path> write_sweep_svgs(const std::vector<SweepRow>& rows,
                                                    const std::filesystem::path& dir);
std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& target, FeatureGroup group);

}  // namespace cgkqi
