#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgkqi/error.hpp"
#include "cgkqi/models/estimators.hpp"
#include "cgkqi/rng.hpp"

namespace cgkqi {
namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  if (a == Activation::Tanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

// Derivative expressed through the activated output h.
Eigen::MatrixXd activate_grad(Activation a, const Eigen::MatrixXd& h) {
  if (a == Activation::Tanh) return (1.0 - h.array().square()).matrix();
  return (h.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Eigen::VectorXd rows_of(const Eigen::VectorXd& y, std::span<const std::size_t> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

MlpModel MlpModel::init(const MlpParams& params, Eigen::Index n_inputs, std::uint64_t seed) {
  if (n_inputs < 1) fail(ErrorKind::Shape, "network needs at least one input");
  for (const int h : params.hidden_layers) {
    if (h < 1) fail(ErrorKind::Config, "hidden layer sizes must be positive");
  }
  MlpModel m;
  m.activation = params.activation;
  Rng rng(seed);
  std::vector<Eigen::Index> sizes{n_inputs};
  for (const int h : params.hidden_layers) sizes.push_back(h);
  sizes.push_back(1);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    Eigen::MatrixXd W(sizes[l + 1], sizes[l]);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-limit, limit);
    }
    m.weights.push_back(std::move(W));
    m.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

Eigen::VectorXd MlpModel::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    theta.segment(at, weights[l].size()) = weights[l].reshaped();
    at += weights[l].size();
    theta.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return theta;
}

void MlpModel::unflatten(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
    fail(ErrorKind::Shape, "parameter vector length does not match the network");
  }
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].reshaped() = theta.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = theta.segment(at, biases[l].size());
    at += biases[l].size();
  }
}

Eigen::VectorXd MlpModel::predict(const Eigen::MatrixXd& Q) const {
  Eigen::MatrixXd h = Q.transpose();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = (weights[l] * h).colwise() + biases[l];
    h = l + 1 < weights.size() ? activate(activation, z) : std::move(z);
  }
  return h.row(0).transpose();
}

double MlpModel::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  return (predict(X) - y).squaredNorm() / (2.0 * static_cast<double>(X.rows()));
}

double MlpModel::loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   Eigen::VectorXd& grad) const {
  const std::size_t L = weights.size();
  const auto n = static_cast<double>(X.rows());
  std::vector<Eigen::MatrixXd> h(L + 1);
  h[0] = X.transpose();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = (weights[l] * h[l]).colwise() + biases[l];
    h[l + 1] = l + 1 < L ? activate(activation, z) : std::move(z);
  }
  const Eigen::RowVectorXd resid = h[L].row(0) - y.transpose();
  const double value = resid.squaredNorm() / (2.0 * n);

  grad.resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offset(L);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offset[l] = at;
    at += weights[l].size() + biases[l].size();
  }
  Eigen::MatrixXd delta = resid / n;  // dLoss / dz for the output layer
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd gW = delta * h[l].transpose();
    grad.segment(offset[l], gW.size()) = gW.reshaped();
    grad.segment(offset[l] + gW.size(), biases[l].size()) = delta.rowwise().sum();
    if (l > 0) {
      delta = (weights[l].transpose() * delta).cwiseProduct(activate_grad(activation, h[l]));
    }
  }
  return value;
}

MlpModel MlpModel::fit(const MlpParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::uint64_t seed) {
  if (params.epochs < 1) fail(ErrorKind::Config, "epochs must be at least 1");
  if (params.batch_size < 1) fail(ErrorKind::Config, "batch_size must be at least 1");
  if (!(params.learning_rate > 0.0)) fail(ErrorKind::Config, "learning_rate must be positive");
  if (X.rows() == 0) fail(ErrorKind::Shape, "network needs at least one sample");

  MlpModel m = init(params, X.cols(), seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  std::vector<std::size_t> train_idx = all;
  Eigen::MatrixXd Xv;
  Eigen::VectorXd yv;
  const auto n_val = static_cast<std::size_t>(std::llround(params.validation_fraction * static_cast<double>(n)));
  const bool use_val = params.validation_fraction > 0.0 && n_val >= 1 && n_val < n;
  if (use_val) {
    rng.shuffle(std::span<std::size_t>(all));
    const std::span<const std::size_t> val(all.data(), n_val);
    Xv = rows_of(X, val);
    yv = rows_of(y, val);
    train_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  }

  Eigen::VectorXd theta = m.flatten();
  Eigen::VectorXd best = theta;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd grad;
  double best_score = std::numeric_limits<double>::infinity();
  int stale = 0;
  long step = 0;
  const auto batch = static_cast<std::size_t>(params.batch_size);

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_idx));
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::size_t stop = std::min(train_idx.size(), start + batch);
      const std::span<const std::size_t> b(train_idx.data() + start, stop - start);
      m.loss_and_gradient(rows_of(X, b), rows_of(y, b), grad);
      ++step;
      if (params.optimizer == Optimizer::Adam) {
        m1 = params.beta1 * m1 + (1.0 - params.beta1) * grad;
        m2 = params.beta2 * m2 + (1.0 - params.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
        theta.array() -= params.learning_rate * (m1.array() / c1) /
                         ((m2.array() / c2).sqrt() + params.adam_eps);
      } else {
        m2 = params.rho * m2 + (1.0 - params.rho) * grad.cwiseAbs2();
        theta.array() -= params.learning_rate * grad.array() / (m2.array().sqrt() + params.adam_eps);
      }
      m.unflatten(theta);
    }
    m.epochs_run = epoch + 1;
    const double score = use_val ? m.loss(Xv, yv) : m.loss(X, y);
    if (!std::isfinite(score)) {
      m.converged = false;
      break;
    }
    if (score < best_score) {
      best_score = score;
      best = theta;
      stale = 0;
    } else if (++stale >= params.patience && params.patience > 0) {
      m.early_stopped = true;
      break;
    }
  }
  if (std::isfinite(best_score)) m.unflatten(best);
  return m;
}

namespace {

// Which hidden units are active for each sample.
std::vector<bool> relu_pattern(const MlpModel& net, const Eigen::MatrixXd& X) {
  std::vector<bool> out;
  Eigen::MatrixXd h = X.transpose();
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l) {
    const Eigen::MatrixXd z = (net.weights[l] * h).colwise() + net.biases[l];
    for (Eigen::Index k = 0; k < z.size(); ++k) out.push_back(z.reshaped()(k) > 0.0);
    h = z.cwiseMax(0.0);
  }
  return out;
}

}  // namespace

GradientCheck gradient_check(const MlpModel& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             double h) {
  GradientCheck out;
  net.loss_and_gradient(X, y, out.analytic);
  MlpModel probe = net;
  const Eigen::VectorXd theta = net.flatten();
  const bool relu = net.activation == Activation::Relu;
  const auto base = relu ? relu_pattern(net, X) : std::vector<bool>{};
  std::vector<bool> kink(static_cast<std::size_t>(theta.size()), false);
  out.numeric.resize(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t(i) = theta(i) + h;
    probe.unflatten(t);
    const double up = probe.loss(X, y);
    bool crossed = relu && relu_pattern(probe, X) != base;
    t(i) = theta(i) - h;
    probe.unflatten(t);
    const double down = probe.loss(X, y);
    crossed = crossed || (relu && relu_pattern(probe, X) != base);
    out.numeric(i) = (up - down) / (2.0 * h);
    kink[static_cast<std::size_t>(i)] = crossed;
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    // A central difference across a relu kink measures neither one-sided
    // derivative, so those entries carry no information about backprop.
    if (kink[static_cast<std::size_t>(i)]) {
      ++out.kinks_skipped;
      continue;
    }
    const double a = out.analytic(i);
    const double n = out.numeric(i);
    const double rel = std::abs(a - n) / std::max(1e-7, std::abs(a) + std::abs(n));
    out.max_relative_error = std::max(out.max_relative_error, rel);
  }
  return out;
}

}  // namespace cgkqi
