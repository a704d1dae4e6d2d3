#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "cgkqi/models/spec.hpp"

namespace cgkqi {

// Concrete regressors. Each exposes fit / predict and a JSON round trip of
// its learned parameters. All of them take already-scaled inputs.

struct LinearModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;

  static LinearModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

struct KnnModel {
  KnnParams params;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  static KnnModel fit(const KnnParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const;
  double distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
};

double kernel_value(const KernelParams& k, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& u,
                    const Eigen::Ref<const Eigen::RowVectorXd>& v);
Eigen::MatrixXd kernel_matrix(const KernelParams& k, double gamma, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B);
double resolve_gamma(const KernelParams& k, Eigen::Index n_features);

/// Epsilon-insensitive kernel regression. The bias is folded into the kernel
/// (K + 1), which removes the equality constraint from the dual, so the dual
///   min 1/2 b'(K+1)b - y'b + eps |b|_1,  -C <= b_i <= C
/// is solved by exact coordinate minimisation. f(x) = sum_i b_i (k(x_i, x) + 1).
struct SvrModel {
  SvrParams params;
  double gamma = 0.0;
  Eigen::MatrixXd support;
  Eigen::VectorXd coef;
  bool converged = false;
  int passes = 0;
  std::vector<double> objective_history;  // dual objective after each pass

  static SvrModel fit(const SvrParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      std::uint64_t seed);
  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const;
};

/// Solves (K + alpha I) a = y.
struct KrrModel {
  KrrParams params;
  double gamma = 0.0;
  Eigen::MatrixXd X;
  Eigen::VectorXd dual;

  static KrrModel fit(const KrrParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
};

/// Bagged regression trees. MSE splits minimise within-child variance and
/// leaves hold the mean; MAE splits minimise absolute deviation from the
/// child median and leaves hold the median. Trees are averaged.
struct ForestModel {
  ForestParams params;
  std::vector<RegressionTree> trees;

  static ForestModel fit(const ForestParams& params, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y, std::uint64_t seed);
  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const;
};

RegressionTree fit_tree(const ForestParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        std::span<const std::size_t> sample, std::uint64_t seed);

/// Fully connected network, linear output unit, squared loss.
struct MlpModel {
  Activation activation = Activation::Relu;
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;
  int epochs_run = 0;
  bool early_stopped = false;
  bool converged = true;

  /// Glorot-uniform weights, zero biases.
  static MlpModel init(const MlpParams& params, Eigen::Index n_inputs, std::uint64_t seed);
  static MlpModel fit(const MlpParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      std::uint64_t seed);
  Eigen::VectorXd predict(const Eigen::MatrixXd& Q) const;

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
  /// Loss = sum (f(x) - y)^2 / (2n). Gradient laid out as flatten().
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;
  double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           Eigen::VectorXd& grad) const;
};

struct GradientCheck {
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
  double max_relative_error = 0.0;
  std::size_t kinks_skipped = 0;  // relu entries whose probe crossed a kink
};

/// Backprop gradient against central differences with step h. For relu
/// networks, entries whose +-h probe flips any unit on or off are excluded
/// from max_relative_error and counted in kinks_skipped.
GradientCheck gradient_check(const MlpModel& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             double h = 1e-5);

}  // namespace cgkqi
