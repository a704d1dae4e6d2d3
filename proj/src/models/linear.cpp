#include "cgkqi/models/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cgkqi/error.hpp"

namespace cgkqi {

LinearModel LinearModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.leftCols(X.cols()) = X;
  A.col(X.cols()).setOnes();
  // Column-pivoted QR: rank-deficient designs (constant scaled columns)
  // still get a basic least-squares solution.
  const Eigen::VectorXd w = A.colPivHouseholderQr().solve(y);
  LinearModel m;
  m.coef = w.head(X.cols());
  m.intercept = w(X.cols());
  return m;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  return (X * coef).array() + intercept;
}

KnnModel KnnModel::fit(const KnnParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (params.n_neighbors > X.rows()) {
    fail(ErrorKind::Config, fmt::format("n_neighbors = {} exceeds the {} training rows",
                                        params.n_neighbors, X.rows()));
  }
  return KnnModel{params, X, y};
}

double KnnModel::distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                          const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  switch (params.metric) {
    case Metric::Manhattan: return (a - b).cwiseAbs().sum();
    case Metric::Euclidean: return (a - b).norm();
    case Metric::Minkowski:
      if (params.p == 1.0) return (a - b).cwiseAbs().sum();
      if (params.p == 2.0) return (a - b).norm();
      return std::pow((a - b).cwiseAbs().array().pow(params.p).sum(), 1.0 / params.p);
  }
  return 0.0;
}

Eigen::VectorXd KnnModel::predict(const Eigen::MatrixXd& Q) const {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto k = static_cast<std::size_t>(params.n_neighbors);
  Eigen::VectorXd out(Q.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (Eigen::Index q = 0; q < Q.rows(); ++q) {
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = {distance(Q.row(q), X.row(static_cast<Eigen::Index>(i))), i};
    }
    // Equal distances resolve to the lower training index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    if (params.weights == Weighting::Uniform) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += y(static_cast<Eigen::Index>(dist[j].second));
      out(q) = sum / static_cast<double>(k);
      continue;
    }
    if (dist[0].first == 0.0) {
      // Exact matches take all the weight.
      double sum = 0.0;
      std::size_t hits = 0;
      for (std::size_t j = 0; j < k && dist[j].first == 0.0; ++j, ++hits) {
        sum += y(static_cast<Eigen::Index>(dist[j].second));
      }
      out(q) = sum / static_cast<double>(hits);
      continue;
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = 1.0 / dist[j].first;
      num += w * y(static_cast<Eigen::Index>(dist[j].second));
      den += w;
    }
    out(q) = num / den;
  }
  return out;
}

}  // namespace cgkqi
