#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "cgkqi/models/estimators.hpp"
#include "cgkqi/rng.hpp"

namespace cgkqi {
namespace {

double ipow(double base, int exp) {
  double r = 1.0;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

double resolve_gamma(const KernelParams& k, Eigen::Index n_features) {
  if (k.gamma > 0.0) return k.gamma;
  return 1.0 / static_cast<double>(std::max<Eigen::Index>(n_features, 1));
}

double kernel_value(const KernelParams& k, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& u,
                    const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  switch (k.kernel) {
    case KernelType::Linear: return u.dot(v);
    case KernelType::Poly: return ipow(u.dot(v) + 1.0, k.degree);
    case KernelType::Rbf: return std::exp(-gamma * (u - v).squaredNorm());
  }
  return 0.0;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& k, double gamma, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) fail(ErrorKind::Shape, "kernel inputs differ in feature count");
  Eigen::MatrixXd G = A * B.transpose();
  switch (k.kernel) {
    case KernelType::Linear: break;
    case KernelType::Poly:
      G = G.unaryExpr([deg = k.degree](double d) { return ipow(d + 1.0, deg); });
      break;
    case KernelType::Rbf: {
      const Eigen::VectorXd na = A.rowwise().squaredNorm();
      const Eigen::RowVectorXd nb = B.rowwise().squaredNorm().transpose();
      for (Eigen::Index i = 0; i < G.rows(); ++i) {
        for (Eigen::Index j = 0; j < G.cols(); ++j) {
          G(i, j) = std::exp(-gamma * std::max(0.0, na(i) + nb(j) - 2.0 * G(i, j)));
        }
      }
      break;
    }
  }
  return G;
}

SvrModel SvrModel::fit(const SvrParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  SvrModel m;
  m.params = params;
  m.gamma = resolve_gamma(params.kernel, X.cols());
  const Eigen::MatrixXd Q = kernel_matrix(params.kernel, m.gamma, X, X).array() + 1.0;
  const double eps = params.epsilon;
  const double C = params.C;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = -y;  // Q beta - y

  const auto objective = [&] {
    return 0.5 * beta.dot(grad) - 0.5 * y.dot(beta) + eps * beta.cwiseAbs().sum();
  };
  const auto violation = [&](Eigen::Index i) {
    const double b = beta(i);
    const double g = grad(i);
    if (b == 0.0) return std::max(0.0, std::abs(g) - eps);
    if (b >= C) return std::max(0.0, g + eps);
    if (b <= -C) return std::max(0.0, eps - g);
    return b > 0.0 ? std::abs(g + eps) : std::abs(g - eps);
  };

  double initial = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) initial = std::max(initial, violation(i));
  const double stop = params.tol * std::max(initial, 1e-12);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  m.converged = initial <= stop;
  while (!m.converged && m.passes < params.max_passes) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (const Eigen::Index i : order) {
      const double qii = Q(i, i);
      const double s = qii * beta(i) - grad(i);
      const double shrunk = s > eps ? s - eps : (s < -eps ? s + eps : 0.0);
      const double b = std::clamp(shrunk / qii, -C, C);
      const double delta = b - beta(i);
      if (delta != 0.0) {
        grad.noalias() += delta * Q.col(i);
        beta(i) = b;
      }
    }
    ++m.passes;
    m.objective_history.push_back(objective());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, violation(i));
    m.converged = worst <= stop;
  }

  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (beta(i) != 0.0) support.push_back(i);
  }
  m.support.resize(static_cast<Eigen::Index>(support.size()), X.cols());
  m.coef.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    m.support.row(static_cast<Eigen::Index>(s)) = X.row(support[s]);
    m.coef(static_cast<Eigen::Index>(s)) = beta(support[s]);
  }
  return m;
}

Eigen::VectorXd SvrModel::predict(const Eigen::MatrixXd& Q) const {
  if (support.rows() == 0) return Eigen::VectorXd::Zero(Q.rows());
  const Eigen::MatrixXd K = kernel_matrix(params.kernel, gamma, Q, support).array() + 1.0;
  return K * coef;
}

KrrModel KrrModel::fit(const KrrParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  KrrModel m;
  m.params = params;
  m.gamma = resolve_gamma(params.kernel, X.cols());
  m.X = X;
  Eigen::MatrixXd A = kernel_matrix(params.kernel, m.gamma, X, X);
  A.diagonal().array() += params.alpha;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() == Eigen::Success) {
    m.dual = ldlt.solve(y);
  }
  if (ldlt.info() != Eigen::Success || !m.dual.allFinite()) {
    m.dual = A.colPivHouseholderQr().solve(y);
  }
  return m;
}

Eigen::VectorXd KrrModel::predict(const Eigen::MatrixXd& Q) const {
  return kernel_matrix(params.kernel, gamma, Q, X) * dual;
}

}  // namespace cgkqi
