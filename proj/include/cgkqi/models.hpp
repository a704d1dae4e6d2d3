#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "cgkqi/dataset.hpp"
#include "cgkqi/models/estimators.hpp"
#include "cgkqi/models/spec.hpp"

namespace cgkqi {

inline constexpr int kModelFormatVersion = 1;

using Estimator = std::variant<LinearModel, KnnModel, SvrModel, KrrModel, ForestModel, MlpModel>;

/// A fitted regressor plus what is needed to apply it to raw data.
class TrainedModel {
 public:
  TrainedModel(ModelSpec spec, Estimator estimator, std::size_t n_features);

  const ModelSpec& spec() const noexcept { return spec_; }
  const Estimator& estimator() const noexcept { return estimator_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t train_size() const noexcept { return train_size_; }
  bool non_converged() const noexcept { return non_converged_; }

  const std::vector<std::string>& features() const noexcept { return features_; }
  const std::optional<ScalerParams>& scaler() const noexcept { return scaler_; }

  void set_features(std::vector<std::string> names);
  void set_scaler(ScalerParams scaler);
  void set_train_size(std::size_t n) { train_size_ = n; }
  void set_non_converged(bool v) { non_converged_ = v; }

  /// Scaled inputs, one row per sample. Column count must match training.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  /// Raw rows: picks the model's feature columns by name and applies the
  /// stored scaler.
  Eigen::VectorXd predict(const Dataset& ds) const;

 private:
  ModelSpec spec_;
  Estimator estimator_;
  std::size_t n_features_;
  std::size_t train_size_ = 0;
  bool non_converged_ = false;
  std::vector<std::string> features_;
  std::optional<ScalerParams> scaler_;
};

/// Fits spec on scaled X. SVR hitting its pass cap or an ANN diverging is
/// reported through non_converged(), not an exception.
TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X);

// Model file: {format_version, spec, features, scaler, params}.
nlohmann::ordered_json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// A grid is either an object {name: [values...]} or an array of such
/// objects; points enumerate in declaration order, last key fastest.
std::vector<nlohmann::ordered_json> expand_grid(const nlohmann::ordered_json& grid);

/// Default search grids; every tuned table value is a point in them.
nlohmann::ordered_json default_grid(Technique t);

struct GridPointResult {
  nlohmann::ordered_json hyperparams;
  double cv_mae = 0.0;
  bool non_converged = false;
};

struct GridSearchResult {
  ModelSpec best;
  double cv_mae = 0.0;
  std::vector<GridPointResult> points;
};

/// K-fold CV MAE for every grid point; lowest mean wins, ties go to the
/// earlier point. A point whose fit throws scores +inf.
GridSearchResult grid_search(Technique technique, const nlohmann::ordered_json& grid, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, int folds = 5, std::uint64_t seed = 0);

/// Same, starting from a base spec (e.g. fixed seed or epochs).
GridSearchResult grid_search(const ModelSpec& base, const nlohmann::ordered_json& grid, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, int folds = 5, std::uint64_t seed = 0);

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int folds, std::uint64_t seed);

/// Max relative error between backprop and finite-difference gradients for a
/// freshly initialised network of the given ANN spec.
double mlp_gradient_check(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

}  // namespace cgkqi
