#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cgkqi/error.hpp"
#include "cgkqi/eval.hpp"

namespace cgkqi {
namespace {

struct Cell {
  std::size_t target = 0;  // index into cfg.targets
  std::size_t ranking = 0;  // index into the (target, group) rankings
  Technique technique;
  FeatureGroup group;
  std::size_t k = 0;
};

ModelSpec cell_spec(const SweepConfig& cfg, Technique t, const std::string& target) {
  ModelSpec spec = ModelSpec::table_defaults(t, target);
  spec.seed = cfg.seed;
  const std::string name(to_string(t));
  if (cfg.overrides.is_object() && cfg.overrides.contains(name)) spec.apply(cfg.overrides.at(name));
  return spec;
}

}  // namespace

std::vector<SweepRow> run_sweep(const Dataset& ds, const SweepConfig& cfg) {
  if (cfg.techniques.empty() || cfg.targets.empty() || cfg.groups.empty()) {
    fail(ErrorKind::Config, "sweep needs at least one technique, target and group");
  }
  if (cfg.k_min < 1 || cfg.k_max < cfg.k_min) {
    fail(ErrorKind::Config, fmt::format("invalid k range {}..{}", cfg.k_min, cfg.k_max));
  }
  for (const auto& t : cfg.targets) {
    if (!ds.has_column(t)) fail(ErrorKind::Validation, fmt::format("dataset lacks target '{}'", t));
  }

  const DatasetSplit parts = split(ds, cfg.test_fraction, cfg.seed);
  const auto predictors = predictor_names();
  const ScalerParams scaler = fit_scaler(parts.train.select(predictors), predictors);
  const MinMaxScaler mm(scaler);
  const Eigen::MatrixXd Xtrain = mm.transform(parts.train.select(predictors));
  const Eigen::MatrixXd Xtest = mm.transform(parts.test.select(predictors));
  const auto column_of = [&](const std::string& name) {
    return static_cast<Eigen::Index>(std::find(predictors.begin(), predictors.end(), name) - predictors.begin());
  };

  // MI rankings once per (target, group); top-k is a prefix.
  std::vector<std::vector<std::string>> rankings;
  std::vector<Cell> cells;
  for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti) {
    for (const FeatureGroup g : cfg.groups) {
      rankings.push_back(rank_features(score_features(parts.train, cfg.targets[ti], g, cfg.bins)));
      const std::size_t size = rankings.back().size();
      for (const Technique t : cfg.techniques) {
        for (std::size_t k = cfg.k_min; k <= std::min(cfg.k_max, size); ++k) {
          cells.push_back({ti, rankings.size() - 1, t, g, k});
        }
      }
    }
  }

  std::vector<SweepRow> rows(cells.size());
  const auto run_cell = [&](std::size_t c) {
    const Cell& cell = cells[c];
    const std::string& target = cfg.targets[cell.target];
    SweepRow& row = rows[c];
    row.technique = cell.technique;
    row.target = target;
    row.group = cell.group;
    row.k = cell.k;
    const auto& ranked = rankings[cell.ranking];
    row.features.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(cell.k));
    try {
      std::vector<Eigen::Index> cols;
      for (const auto& f : row.features) cols.push_back(column_of(f));
      const Eigen::MatrixXd Xtr = Xtrain(Eigen::all, cols);
      const Eigen::MatrixXd Xte = Xtest(Eigen::all, cols);
      const Eigen::VectorXd ytr = parts.train.column(target);
      const Eigen::VectorXd yte = parts.test.column(target);
      const TrainedModel model = fit(cell_spec(cfg, cell.technique, target), Xtr, ytr);
      row.non_converged = model.non_converged();
      row.mase = mase(yte, model.predict(Xte), ytr).mase;
    } catch (const std::exception& e) {
      row.mase = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
  };

  const unsigned jobs = std::max(1u, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells.size(); c = next++) run_cell(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "technique,target,group,k,mase,features\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", to_string(r.technique), r.target, to_string(r.group), r.k, r.mase,
                       fmt::join(r.features, ";"));
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  write_sweep_csv(rows, out);
  if (!out) fail(ErrorKind::Io, fmt::format("write failed: {}", path.string()));
}

std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& target, FeatureGroup group) {
  constexpr double W = 640, H = 400, L = 60, R = 120, T = 40, B = 50;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::vector<std::string> order;
  double kmax = 1, ymax = 0;
  for (const auto& r : rows) {
    if (r.target != target || r.group != group || !std::isfinite(r.mase)) continue;
    const std::string name(to_string(r.technique));
    if (!series.count(name)) order.push_back(name);
    series[name].emplace_back(static_cast<double>(r.k), r.mase);
    kmax = std::max(kmax, static_cast<double>(r.k));
    ymax = std::max(ymax, r.mase);
  }
  ymax = ymax > 0 ? ymax * 1.1 : 1.0;
  const auto px = [&](double k) { return L + (k - 1) / std::max(1.0, kmax - 1) * (W - L - R); };
  const auto py = [&](double m) { return H - B - m / ymax * (H - T - B); };
  static constexpr std::array<const char*, 6> colors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"22\" font-size=\"14\">MASE vs k: {} ({})</text>\n",
      W, H, L, target, to_string(group));
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
  for (int k = 1; k <= static_cast<int>(kmax); ++k) {
    s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(k), H - B + 16, k);
  }
  for (int i = 0; i <= 4; ++i) {
    const double m = ymax * i / 4.0;
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", L - 6, py(m) + 4, m);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">k (features)</text>\n", (L + W - R) / 2, H - 12);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const char* color = colors[i % colors.size()];
    std::string pts;
    for (const auto& [k, m] : series[order[i]]) pts += fmt::format("{:.1f},{:.1f} ", px(k), py(m));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, pts);
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", W - R + 10, T + 16 * (i + 1), color,
                     order[i]);
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> write_sweep_svgs(const std::vector<SweepRow>& rows,
                                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, FeatureGroup>> keys;
  for (const auto& r : rows) {
    const std::pair key{r.target, r.group};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [target, group] : keys) {
    const auto path = dir / fmt::format("sweep_{}_{}.svg", target, to_string(group));
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
    out << sweep_svg(rows, target, group);
    written.push_back(path);
  }
  return written;
}

}  // namespace cgkqi
