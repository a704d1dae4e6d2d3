#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace cgkqi {

enum class Source { CGServer, UE, BS, Target };
enum class ColumnKind { Continuous, Ordinal };

std::string_view to_string(Source source);

struct ColumnMeta {
  std::string name;
  Source source;
  std::string unit;
  ColumnKind kind;
  double min;  // documented range of the collected data
  double max;
};

/// The 16 columns in schema order: targets first, then predictors.
std::span<const ColumnMeta> schema();
const ColumnMeta& column_meta(std::string_view name);
bool is_schema_column(std::string_view name);

/// The 13 predictor names in schema order.
std::vector<std::string> predictor_names();
/// CGlatency, FreezePercent, EFPS.
std::vector<std::string> target_names();

/// 720p -> 0, 1080p -> 1, 1440p -> 2, 4K -> 3.
std::optional<double> encode_resolution(std::string_view text);
std::string decode_resolution(double code);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> columns, Eigen::MatrixXd rows);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t cols() const noexcept { return columns_.size(); }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const Eigen::MatrixXd& data() const noexcept { return data_; }

  bool has_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;
  Eigen::VectorXd column(std::string_view name) const;
  /// Columns in the given order.
  Eigen::MatrixXd select(std::span<const std::string> names) const;
  Dataset subset(std::span<const std::size_t> row_indices) const;

  void validate() const;

 private:
  std::vector<std::string> columns_;
  Eigen::MatrixXd data_;
};

struct LoadOptions {
  bool require_targets = true;
};

/// Parses a CSV whose header names the schema columns in any order. Columns
/// are stored in schema order.
Dataset load_dataset(const std::filesystem::path& path, LoadOptions opts = {});
Dataset parse_dataset(std::istream& in, LoadOptions opts = {});
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

struct ScalerParams {
  std::vector<std::string> columns;
  std::vector<double> x_min;
  std::vector<double> x_max;

  bool is_constant(std::size_t col) const { return x_max[col] == x_min[col]; }
};

void to_json(nlohmann::json& j, const ScalerParams& p);
void from_json(const nlohmann::json& j, ScalerParams& p);

/// Min-max scaling (x - x_min) / (x_max - x_min), fit on training rows only.
/// Constant columns map to 0. Out-of-range rows are not clamped.
class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  explicit MinMaxScaler(ScalerParams params);

  void fit(const Eigen::MatrixXd& rows, std::vector<std::string> columns = {});
  bool fitted() const noexcept { return params_.has_value(); }
  const ScalerParams& params() const;

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& rows) const;

 private:
  std::optional<ScalerParams> params_;
};

ScalerParams fit_scaler(const Eigen::MatrixXd& train, std::vector<std::string> columns = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Random partition; the test side gets round(n * test_fraction) rows,
/// clamped so both sides are nonempty.
Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

DatasetSplit split(const Dataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace cgkqi
