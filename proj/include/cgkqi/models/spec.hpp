#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace cgkqi {

enum class Technique { LR, KNR, SVR, KRR, RF, ANN };

std::string_view to_string(Technique t);
Technique parse_technique(std::string_view text);
std::vector<Technique> all_techniques();

enum class KernelType { Linear, Poly, Rbf };
enum class Weighting { Uniform, Distance };
enum class Metric { Manhattan, Euclidean, Minkowski };
enum class Criterion { MSE, MAE };
enum class Activation { Relu, Tanh };
enum class Optimizer { Adam, RmsProp };

struct LinearParams {
  bool operator==(const LinearParams&) const = default;
};

struct KnnParams {
  int n_neighbors = 5;
  Weighting weights = Weighting::Uniform;
  Metric metric = Metric::Minkowski;
  double p = 2.0;  // Minkowski power

  bool operator==(const KnnParams&) const = default;
};

struct KernelParams {
  KernelType kernel = KernelType::Rbf;
  int degree = 3;      // poly: (u.v + 1)^degree
  double gamma = 0.0;  // rbf: exp(-gamma |u-v|^2); 0 selects 1 / n_features

  bool operator==(const KernelParams&) const = default;
};

struct SvrParams {
  KernelParams kernel;
  double epsilon = 0.1;
  double C = 1.0;
  double tol = 1e-3;
  int max_passes = 1000;

  bool operator==(const SvrParams&) const = default;
};

struct KrrParams {
  KernelParams kernel{KernelType::Poly, 3, 0.0};
  double alpha = 1.0;

  bool operator==(const KrrParams&) const = default;
};

struct ForestParams {
  int n_estimators = 100;
  int max_depth = 0;  // 0: unlimited
  Criterion criterion = Criterion::MSE;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  double max_features = 1.0;  // fraction of features tried per split

  bool operator==(const ForestParams&) const = default;
};

struct MlpParams {
  std::vector<int> hidden_layers{100};
  Activation activation = Activation::Relu;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  double validation_fraction = 0.1;
  int patience = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double rho = 0.9;

  bool operator==(const MlpParams&) const = default;
};

using Hyperparams =
    std::variant<LinearParams, KnnParams, SvrParams, KrrParams, ForestParams, MlpParams>;

struct ModelSpec {
  Technique technique = Technique::LR;
  Hyperparams params = LinearParams{};
  std::uint64_t seed = 0;

  static ModelSpec defaults(Technique t);
  /// Tuned per-target settings for each technique.
  static ModelSpec table_defaults(Technique t, std::string_view target);

  /// Applies name -> value overrides on top of the current values.
  /// Unknown names or invalid values throw ErrorKind::Config.
  void apply(const nlohmann::json& hyperparams);
  nlohmann::ordered_json hyperparams_json() const;

  bool operator==(const ModelSpec&) const = default;
};

nlohmann::ordered_json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

}  // namespace cgkqi
