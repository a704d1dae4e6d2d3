#include "cgkqi/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>

#include <fmt/format.h>

#include "cgkqi/error.hpp"

namespace cgkqi {
namespace {

std::mutex g_sink_mutex;
WarningSink g_sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };

void warn(std::string_view msg) {
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) g_sink(msg);
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_sink_mutex);
  g_sink = std::move(sink);
}

std::size_t Binning::bin_count() const {
  return kind == ColumnKind::Ordinal ? std::max<std::size_t>(edges.size(), 1) : edges.size() + 1;
}

std::size_t Binning::bin_of(double value) const {
  const auto above = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), value) -
                                              edges.begin());
  if (kind == ColumnKind::Continuous) return above;
  return above == 0 ? 0 : above - 1;
}

Binning quantile_binning(std::span<const double> values, std::size_t bins) {
  if (bins < 1) fail(ErrorKind::Usage, "bin count must be at least 1");
  Binning b{ColumnKind::Continuous, {}};
  if (values.empty()) return b;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  for (std::size_t i = 1; i < bins; ++i) {
    const double edge = sorted[i * n / bins];
    if (edge > sorted.front() && (b.edges.empty() || edge > b.edges.back())) b.edges.push_back(edge);
  }
  return b;
}

Binning ordinal_binning(std::span<const double> values) {
  Binning b{ColumnKind::Ordinal, std::vector<double>(values.begin(), values.end())};
  std::sort(b.edges.begin(), b.edges.end());
  b.edges.erase(std::unique(b.edges.begin(), b.edges.end()), b.edges.end());
  return b;
}

Binning make_binning(std::span<const double> values, ColumnKind kind, std::size_t bins) {
  return kind == ColumnKind::Ordinal ? ordinal_binning(values) : quantile_binning(values, bins);
}

BinnedJoint bin_joint(std::span<const double> x, const Binning& bx, std::span<const double> y,
                      const Binning& by) {
  if (x.size() != y.size()) {
    fail(ErrorKind::Shape, fmt::format("MI inputs differ in length ({} vs {})", x.size(), y.size()));
  }
  BinnedJoint j;
  j.bins_x = bx.bin_count();
  j.bins_y = by.bin_count();
  j.counts.assign(j.bins_x * j.bins_y, 0);
  j.n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) ++j.counts[bx.bin_of(x[i]) * j.bins_y + by.bin_of(y[i])];
  return j;
}

double mutual_information(const BinnedJoint& joint) {
  if (joint.n == 0) fail(ErrorKind::Usage, "MI of an empty sample");
  std::vector<double> px(joint.bins_x, 0.0);
  std::vector<double> py(joint.bins_y, 0.0);
  for (std::size_t i = 0; i < joint.bins_x; ++i) {
    for (std::size_t k = 0; k < joint.bins_y; ++k) {
      px[i] += static_cast<double>(joint.at(i, k));
      py[k] += static_cast<double>(joint.at(i, k));
    }
  }
  const auto n = static_cast<double>(joint.n);
  std::vector<double> terms;
  for (std::size_t i = 0; i < joint.bins_x; ++i) {
    for (std::size_t k = 0; k < joint.bins_y; ++k) {
      const auto c = static_cast<double>(joint.at(i, k));
      if (c == 0.0) continue;  // 0 log 0 = 0
      terms.push_back(c / n * std::log(c * n / (px[i] * py[k])));
    }
  }
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (const double t : terms) mi += t;
  return std::max(0.0, mi);
}

double binned_entropy(std::span<const double> x, const Binning& bx) {
  if (x.empty()) fail(ErrorKind::Usage, "entropy of an empty sample");
  std::vector<double> counts(bx.bin_count(), 0.0);
  for (const double v : x) counts[bx.bin_of(v)] += 1.0;
  const auto n = static_cast<double>(x.size());
  double h = 0.0;
  for (const double c : counts) {
    if (c > 0.0) h -= c / n * std::log(c / n);
  }
  return h;
}

double mutual_information(std::span<const double> x, ColumnKind x_kind, std::span<const double> y,
                          ColumnKind y_kind, std::size_t bins) {
  if (x.size() != y.size()) {
    fail(ErrorKind::Shape, fmt::format("MI inputs differ in length ({} vs {})", x.size(), y.size()));
  }
  if (x.size() < 2) fail(ErrorKind::Usage, "MI needs at least 2 samples");
  const Binning bx = make_binning(x, x_kind, bins);
  const Binning by = make_binning(y, y_kind, bins);
  if (bx.bin_count() < 2 || by.bin_count() < 2) {
    warn("constant column in mutual information; score set to 0");
    return 0.0;
  }
  return mutual_information(bin_joint(x, bx, y, by));
}

double mutual_information(std::span<const double> x, std::span<const double> y, std::size_t bins) {
  return mutual_information(x, ColumnKind::Continuous, y, ColumnKind::Continuous, bins);
}

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::All: return "all";
    case FeatureGroup::UE: return "ue";
    case FeatureGroup::BS: return "bs";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "all") return FeatureGroup::All;
  if (t == "ue") return FeatureGroup::UE;
  if (t == "bs") return FeatureGroup::BS;
  fail(ErrorKind::Validation, fmt::format("unknown feature group '{}' (all, ue, bs)", text));
}

std::vector<std::string> group_features(FeatureGroup group) {
  std::vector<std::string> out;
  for (const auto& m : schema()) {
    if (m.source == Source::Target) continue;
    const bool keep = group == FeatureGroup::All || m.source == Source::CGServer ||
                      (group == FeatureGroup::UE && m.source == Source::UE) ||
                      (group == FeatureGroup::BS && m.source == Source::BS);
    if (keep) out.push_back(m.name);
  }
  return out;
}

std::vector<FeatureScore> score_features(const Dataset& train, std::string_view target,
                                         FeatureGroup group, std::size_t bins) {
  if (column_meta(target).source != Source::Target) {
    fail(ErrorKind::Validation, fmt::format("'{}' is not a target column", target));
  }
  const Eigen::VectorXd y = train.column(target);
  const ColumnKind y_kind = column_meta(target).kind;
  std::vector<FeatureScore> scores;
  for (const auto& name : group_features(group)) {
    const Eigen::VectorXd x = train.column(name);
    if (x.size() > 0 && x.minCoeff() == x.maxCoeff()) {
      warn(fmt::format("column {} is constant; MI against {} set to 0", name, target));
      scores.push_back({name, 0.0});
      continue;
    }
    scores.push_back({name, mutual_information(std::span<const double>(x.data(), x.size()),
                                               column_meta(name).kind,
                                               std::span<const double>(y.data(), y.size()), y_kind,
                                               bins)});
  }
  return scores;
}

std::vector<std::string> rank_features(std::vector<FeatureScore> scores) {
  std::stable_sort(scores.begin(), scores.end(),
                   [](const FeatureScore& a, const FeatureScore& b) { return a.mi > b.mi; });
  std::vector<std::string> out;
  for (auto& s : scores) out.push_back(std::move(s.feature));
  return out;
}

std::vector<std::string> select_features(const Dataset& train, std::string_view target,
                                         std::size_t k, FeatureGroup group, std::size_t bins) {
  const std::size_t size = group_features(group).size();
  if (k < 1 || k > size) {
    fail(ErrorKind::Validation,
         fmt::format("k = {} outside [1, {}] for group {}", k, size, to_string(group)));
  }
  auto ranked = rank_features(score_features(train, target, group, bins));
  ranked.resize(k);
  return ranked;
}

}  // namespace cgkqi
