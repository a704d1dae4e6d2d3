#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "cgkqi/models.hpp"
#include "cgkqi/rng.hpp"

namespace cgkqi {
namespace {

using ojson = nlohmann::ordered_json;

void expand_object(const ojson& grid, std::vector<ojson>& out) {
  if (!grid.is_object()) fail(ErrorKind::Config, "grid entries must be JSON objects");
  std::vector<std::pair<std::string, ojson>> axes;
  for (const auto& [key, values] : grid.items()) {
    ojson list = values.is_array() ? values : ojson::array({values});
    if (list.empty()) fail(ErrorKind::Config, fmt::format("grid axis '{}' has no values", key));
    axes.emplace_back(key, std::move(list));
  }
  std::vector<std::size_t> at(axes.size(), 0);
  while (true) {
    ojson point = ojson::object();
    for (std::size_t a = 0; a < axes.size(); ++a) point[axes[a].first] = axes[a].second[at[a]];
    out.push_back(std::move(point));
    // Odometer, last axis fastest.
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++at[a] < axes[a].second.size()) break;
      at[a] = 0;
      if (a == 0) return;
    }
    if (axes.empty()) return;
  }
}

}  // namespace

std::vector<ojson> expand_grid(const ojson& grid) {
  std::vector<ojson> points;
  if (grid.is_array()) {
    for (const auto& sub : grid) expand_object(sub, points);
  } else {
    expand_object(grid, points);
  }
  if (points.empty()) fail(ErrorKind::Config, "empty hyperparameter grid");
  return points;
}

ojson default_grid(Technique t) {
  switch (t) {
    case Technique::LR: return ojson::object();
    case Technique::KNR:
      return {{"n_neighbors", {2, 4, 6, 8, 10, 12, 15, 20}},
              {"weights", {"uniform", "distance"}},
              {"metric", {"manhattan", "euclidean"}}};
    case Technique::SVR: {
      const ojson eps = {0.1, 0.5, 1.0, 2.5, 3.5};
      const ojson cs = {1, 10, 100, 300};
      return ojson::array({
          {{"kernel", {"linear"}}, {"epsilon", eps}, {"C", cs}},
          {{"kernel", {"poly"}}, {"degree", {3, 5}}, {"epsilon", eps}, {"C", cs}},
          {{"kernel", {"rbf"}}, {"epsilon", eps}, {"C", cs}},
      });
    }
    case Technique::KRR:
      return {{"kernel", {"poly"}}, {"degree", {2, 3, 4, 5, 6}}, {"alpha", {0.01, 0.1, 1.0, 10.0}}};
    case Technique::RF:
      return {{"n_estimators", {50, 70, 80, 90, 100}},
              {"max_depth", {10, 20, 0}},
              {"criterion", {"mse", "mae"}}};
    case Technique::ANN:
      return {{"hidden_layers", ojson::array({ojson::array({20, 14}), ojson::array({10, 5}),
                                              ojson::array({120, 40, 20, 10}), ojson::array({100})})},
              {"activation", {"relu", "tanh"}},
              {"optimizer", {"adam", "rmsprop"}}};
  }
  return ojson::object();
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorKind::Config, fmt::format("need at least 2 folds, got {}", folds));
  if (static_cast<std::size_t>(folds) > n) {
    fail(ErrorKind::Config, fmt::format("{} folds exceed {} samples", folds, n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const std::size_t k = out.size();
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    out[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(at),
                  idx.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  return out;
}

GridSearchResult grid_search(const ModelSpec& base, const ojson& grid, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, int folds, std::uint64_t seed) {
  if (X.rows() != y.size()) fail(ErrorKind::Shape, "grid search: rows and targets differ");
  const auto points = expand_grid(grid);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto fold_idx = kfold_indices(n, folds, seed);

  // Materialise the fold matrices once.
  struct Fold {
    Eigen::MatrixXd Xtr, Xte;
    Eigen::VectorXd ytr, yte;
  };
  std::vector<Fold> data(fold_idx.size());
  for (std::size_t f = 0; f < fold_idx.size(); ++f) {
    std::vector<char> held(n, 0);
    for (const auto i : fold_idx[f]) held[i] = 1;
    Fold& d = data[f];
    const auto nte = static_cast<Eigen::Index>(fold_idx[f].size());
    d.Xte.resize(nte, X.cols());
    d.yte.resize(nte);
    d.Xtr.resize(static_cast<Eigen::Index>(n) - nte, X.cols());
    d.ytr.resize(static_cast<Eigen::Index>(n) - nte);
    Eigen::Index a = 0, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (held[i]) {
        d.Xte.row(a) = X.row(r);
        d.yte(a++) = y(r);
      } else {
        d.Xtr.row(b) = X.row(r);
        d.ytr(b++) = y(r);
      }
    }
  }

  GridSearchResult result;
  result.cv_mae = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& point : points) {
    ModelSpec spec = base;
    spec.apply(point);
    GridPointResult pr;
    pr.hyperparams = point;
    double total = 0.0;
    try {
      for (const auto& d : data) {
        const TrainedModel m = fit(spec, d.Xtr, d.ytr);
        pr.non_converged = pr.non_converged || m.non_converged();
        total += (m.predict(d.Xte) - d.yte).cwiseAbs().mean();
      }
      pr.cv_mae = total / static_cast<double>(data.size());
      if (!std::isfinite(pr.cv_mae)) pr.cv_mae = std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      pr.cv_mae = std::numeric_limits<double>::infinity();
    }
    if (!found || pr.cv_mae < result.cv_mae) {
      found = true;
      result.best = spec;
      result.cv_mae = pr.cv_mae;
    }
    result.points.push_back(std::move(pr));
  }
  if (!std::isfinite(result.cv_mae)) fail(ErrorKind::Config, "no grid point could be fit");
  return result;
}

GridSearchResult grid_search(Technique technique, const ojson& grid, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, int folds, std::uint64_t seed) {
  ModelSpec base = ModelSpec::defaults(technique);
  base.seed = seed;
  return grid_search(base, grid, X, y, folds, seed);
}

double mlp_gradient_check(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (spec.technique != Technique::ANN) fail(ErrorKind::Usage, "gradient check applies to ANN specs");
  const auto net = MlpModel::init(std::get<MlpParams>(spec.params), X.cols(), spec.seed);
  return gradient_check(net, X, y).max_relative_error;
}

}  // namespace cgkqi
