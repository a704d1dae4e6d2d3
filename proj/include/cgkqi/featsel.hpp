#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cgkqi/dataset.hpp"

namespace cgkqi {

/// Bin assignment for one variable. `edges` holds the interior boundaries for
/// continuous data (value v goes to the number of edges <= v) or the sorted
/// distinct values for ordinal data.
struct Binning {
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<double> edges;

  std::size_t bin_count() const;
  std::size_t bin_of(double value) const;
};

/// Equal-frequency quantile edges, at most `bins` bins; ties never straddle
/// a boundary.
Binning quantile_binning(std::span<const double> values, std::size_t bins);
/// One bin per distinct value.
Binning ordinal_binning(std::span<const double> values);
Binning make_binning(std::span<const double> values, ColumnKind kind, std::size_t bins);

struct BinnedJoint {
  std::size_t bins_x = 0;
  std::size_t bins_y = 0;
  std::vector<std::size_t> counts;  // row-major bins_x * bins_y
  std::size_t n = 0;

  std::size_t at(std::size_t i, std::size_t j) const { return counts[i * bins_y + j]; }
};

BinnedJoint bin_joint(std::span<const double> x, const Binning& bx, std::span<const double> y,
                      const Binning& by);

/// Plug-in mutual information in nats. Terms are summed in sorted order so
/// the result is bit-identical for the transposed table.
double mutual_information(const BinnedJoint& joint);

/// Plug-in entropy (nats) of a binned variable.
double binned_entropy(std::span<const double> x, const Binning& bx);

/// Warning sink for constant columns; defaults to stderr.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);

constexpr std::size_t kDefaultBins = 16;

/// Both variables treated as continuous.
double mutual_information(std::span<const double> x, std::span<const double> y,
                          std::size_t bins = kDefaultBins);
double mutual_information(std::span<const double> x, ColumnKind x_kind, std::span<const double> y,
                          ColumnKind y_kind, std::size_t bins = kDefaultBins);

enum class FeatureGroup { All, UE, BS };

std::string_view to_string(FeatureGroup group);
FeatureGroup parse_group(std::string_view text);

/// Predictor names of a group in schema order: All = 13, UE = CG server + UE
/// (9), BS = CG server + base station (6).
std::vector<std::string> group_features(FeatureGroup group);

struct FeatureScore {
  std::string feature;
  double mi = 0.0;
};

/// MI of each group feature against the target, in schema order.
std::vector<FeatureScore> score_features(const Dataset& train, std::string_view target,
                                         FeatureGroup group = FeatureGroup::All,
                                         std::size_t bins = kDefaultBins);

/// Top-k features by MI; ties resolved by schema order.
std::vector<std::string> select_features(const Dataset& train, std::string_view target,
                                         std::size_t k, FeatureGroup group,
                                         std::size_t bins = kDefaultBins);

/// Ranking of already computed scores (descending MI, stable).
std::vector<std::string> rank_features(std::vector<FeatureScore> scores);

}  // namespace cgkqi
