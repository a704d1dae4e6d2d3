#include "cgkqi/models/spec.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "cgkqi/error.hpp"

namespace cgkqi {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[noreturn]] void bad_value(std::string_view name, const nlohmann::json& v) {
  fail(ErrorKind::Config, fmt::format("invalid value {} for hyperparameter '{}'", v.dump(), name));
}

double as_number(std::string_view name, const nlohmann::json& v) {
  if (!v.is_number()) bad_value(name, v);
  return v.get<double>();
}

int as_int(std::string_view name, const nlohmann::json& v, int min) {
  if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>()))) {
    bad_value(name, v);
  }
  const auto i = static_cast<long long>(v.get<double>());
  if (i < min) bad_value(name, v);
  return static_cast<int>(i);
}

std::string as_word(std::string_view name, const nlohmann::json& v) {
  if (!v.is_string()) bad_value(name, v);
  return lower(v.get<std::string>());
}

KernelType parse_kernel(const nlohmann::json& v) {
  const auto w = as_word("kernel", v);
  if (w == "linear") return KernelType::Linear;
  if (w == "poly" || w == "polynomial") return KernelType::Poly;
  if (w == "rbf") return KernelType::Rbf;
  bad_value("kernel", v);
}

std::string_view kernel_name(KernelType k) {
  switch (k) {
    case KernelType::Linear: return "linear";
    case KernelType::Poly: return "poly";
    case KernelType::Rbf: return "rbf";
  }
  return "?";
}

bool apply_kernel(KernelParams& k, std::string_view key, const nlohmann::json& v) {
  if (key == "kernel") {
    k.kernel = parse_kernel(v);
  } else if (key == "degree") {
    k.degree = as_int(key, v, 1);
  } else if (key == "gamma") {
    k.gamma = as_number(key, v);
    if (k.gamma < 0.0) bad_value(key, v);
  } else {
    return false;
  }
  return true;
}

void kernel_json(nlohmann::ordered_json& j, const KernelParams& k) {
  j["kernel"] = kernel_name(k.kernel);
  j["degree"] = k.degree;
  j["gamma"] = k.gamma;
}

struct Applier {
  std::string_view key;
  const nlohmann::json& v;

  bool operator()(LinearParams&) const { return false; }

  bool operator()(KnnParams& p) const {
    if (key == "n_neighbors") {
      p.n_neighbors = as_int(key, v, 1);
    } else if (key == "weights" || key == "weight") {
      const auto w = as_word(key, v);
      if (w == "uniform") p.weights = Weighting::Uniform;
      else if (w == "distance") p.weights = Weighting::Distance;
      else bad_value(key, v);
    } else if (key == "metric") {
      const auto w = as_word(key, v);
      if (w == "manhattan") p.metric = Metric::Manhattan;
      else if (w == "euclidean") p.metric = Metric::Euclidean;
      else if (w == "minkowski") p.metric = Metric::Minkowski;
      else bad_value(key, v);
    } else if (key == "p") {
      p.p = as_number(key, v);
      if (!(p.p >= 1.0)) bad_value(key, v);
    } else {
      return false;
    }
    return true;
  }

  bool operator()(SvrParams& p) const {
    if (apply_kernel(p.kernel, key, v)) return true;
    if (key == "epsilon") {
      p.epsilon = as_number(key, v);
      if (p.epsilon < 0.0) bad_value(key, v);
    } else if (key == "C") {
      p.C = as_number(key, v);
      if (!(p.C > 0.0)) bad_value(key, v);
    } else if (key == "tol") {
      p.tol = as_number(key, v);
      if (!(p.tol > 0.0)) bad_value(key, v);
    } else if (key == "max_passes") {
      p.max_passes = as_int(key, v, 1);
    } else {
      return false;
    }
    return true;
  }

  bool operator()(KrrParams& p) const {
    if (apply_kernel(p.kernel, key, v)) return true;
    if (key == "alpha") {
      p.alpha = as_number(key, v);
      if (p.alpha < 0.0) bad_value(key, v);
      return true;
    }
    return false;
  }

  bool operator()(ForestParams& p) const {
    if (key == "n_estimators") {
      p.n_estimators = as_int(key, v, 1);
    } else if (key == "max_depth") {
      p.max_depth = v.is_null() ? 0 : as_int(key, v, 0);
    } else if (key == "criterion") {
      const auto w = as_word(key, v);
      if (w == "mse" || w == "squared_error") p.criterion = Criterion::MSE;
      else if (w == "mae" || w == "absolute_error") p.criterion = Criterion::MAE;
      else bad_value(key, v);
    } else if (key == "min_samples_split") {
      p.min_samples_split = as_int(key, v, 2);
    } else if (key == "min_samples_leaf") {
      p.min_samples_leaf = as_int(key, v, 1);
    } else if (key == "max_features") {
      p.max_features = as_number(key, v);
      if (!(p.max_features > 0.0 && p.max_features <= 1.0)) bad_value(key, v);
    } else {
      return false;
    }
    return true;
  }

  bool operator()(MlpParams& p) const {
    if (key == "hidden_layers") {
      if (!v.is_array() || v.empty()) bad_value(key, v);
      p.hidden_layers.clear();
      for (const auto& n : v) p.hidden_layers.push_back(as_int(key, n, 1));
    } else if (key == "activation") {
      const auto w = as_word(key, v);
      if (w == "relu") p.activation = Activation::Relu;
      else if (w == "tanh") p.activation = Activation::Tanh;
      else bad_value(key, v);
    } else if (key == "optimizer") {
      const auto w = as_word(key, v);
      if (w == "adam") p.optimizer = Optimizer::Adam;
      else if (w == "rmsprop") p.optimizer = Optimizer::RmsProp;
      else bad_value(key, v);
    } else if (key == "learning_rate") {
      p.learning_rate = as_number(key, v);
      if (!(p.learning_rate > 0.0)) bad_value(key, v);
    } else if (key == "epochs") {
      p.epochs = as_int(key, v, 1);
    } else if (key == "batch_size") {
      p.batch_size = as_int(key, v, 1);
    } else if (key == "validation_fraction") {
      p.validation_fraction = as_number(key, v);
      if (!(p.validation_fraction >= 0.0 && p.validation_fraction < 1.0)) bad_value(key, v);
    } else if (key == "patience") {
      p.patience = as_int(key, v, 1);
    } else if (key == "beta1") {
      p.beta1 = as_number(key, v);
    } else if (key == "beta2") {
      p.beta2 = as_number(key, v);
    } else if (key == "adam_eps") {
      p.adam_eps = as_number(key, v);
    } else if (key == "rho") {
      p.rho = as_number(key, v);
    } else {
      return false;
    }
    return true;
  }
};

struct Dumper {
  nlohmann::ordered_json& j;

  void operator()(const LinearParams&) const {}
  void operator()(const KnnParams& p) const {
    j["n_neighbors"] = p.n_neighbors;
    j["weights"] = p.weights == Weighting::Uniform ? "uniform" : "distance";
    j["metric"] = p.metric == Metric::Manhattan   ? "manhattan"
                  : p.metric == Metric::Euclidean ? "euclidean"
                                                  : "minkowski";
    j["p"] = p.p;
  }
  void operator()(const SvrParams& p) const {
    kernel_json(j, p.kernel);
    j["epsilon"] = p.epsilon;
    j["C"] = p.C;
    j["tol"] = p.tol;
    j["max_passes"] = p.max_passes;
  }
  void operator()(const KrrParams& p) const {
    kernel_json(j, p.kernel);
    j["alpha"] = p.alpha;
  }
  void operator()(const ForestParams& p) const {
    j["n_estimators"] = p.n_estimators;
    j["max_depth"] = p.max_depth;
    j["criterion"] = p.criterion == Criterion::MSE ? "mse" : "mae";
    j["min_samples_split"] = p.min_samples_split;
    j["min_samples_leaf"] = p.min_samples_leaf;
    j["max_features"] = p.max_features;
  }
  void operator()(const MlpParams& p) const {
    j["hidden_layers"] = p.hidden_layers;
    j["activation"] = p.activation == Activation::Relu ? "relu" : "tanh";
    j["optimizer"] = p.optimizer == Optimizer::Adam ? "adam" : "rmsprop";
    j["learning_rate"] = p.learning_rate;
    j["epochs"] = p.epochs;
    j["batch_size"] = p.batch_size;
    j["validation_fraction"] = p.validation_fraction;
    j["patience"] = p.patience;
    j["beta1"] = p.beta1;
    j["beta2"] = p.beta2;
    j["adam_eps"] = p.adam_eps;
    j["rho"] = p.rho;
  }
};

int target_slot(std::string_view target) {
  if (target == "CGlatency") return 0;
  if (target == "FreezePercent") return 1;
  if (target == "EFPS") return 2;
  fail(ErrorKind::Validation, fmt::format("unknown target '{}'", target));
}

}  // namespace

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::LR: return "LR";
    case Technique::KNR: return "KNR";
    case Technique::SVR: return "SVR";
    case Technique::KRR: return "KRR";
    case Technique::RF: return "RF";
    case Technique::ANN: return "ANN";
  }
  return "?";
}

Technique parse_technique(std::string_view text) {
  const auto w = lower(text);
  for (const Technique t : all_techniques()) {
    if (lower(to_string(t)) == w) return t;
  }
  fail(ErrorKind::Validation, fmt::format("unknown technique '{}' (lr, knr, svr, krr, rf, ann)", text));
}

std::vector<Technique> all_techniques() {
  return {Technique::LR, Technique::KNR, Technique::SVR, Technique::KRR, Technique::RF, Technique::ANN};
}

ModelSpec ModelSpec::defaults(Technique t) {
  ModelSpec s;
  s.technique = t;
  switch (t) {
    case Technique::LR: s.params = LinearParams{}; break;
    case Technique::KNR: s.params = KnnParams{}; break;
    case Technique::SVR: s.params = SvrParams{}; break;
    case Technique::KRR: s.params = KrrParams{}; break;
    case Technique::RF: s.params = ForestParams{}; break;
    case Technique::ANN: s.params = MlpParams{}; break;
  }
  return s;
}

ModelSpec ModelSpec::table_defaults(Technique t, std::string_view target) {
  const int slot = target_slot(target);  // latency, freeze, efps
  ModelSpec s = defaults(t);
  switch (t) {
    case Technique::LR: break;
    case Technique::KNR: {
      KnnParams p;
      p.n_neighbors = std::array{12, 4, 4}[slot];
      p.weights = Weighting::Distance;
      p.metric = Metric::Manhattan;
      s.params = p;
      break;
    }
    case Technique::SVR: {
      SvrParams p;
      p.kernel.kernel = std::array{KernelType::Poly, KernelType::Linear, KernelType::Rbf}[slot];
      p.kernel.degree = slot == 0 ? 5 : 3;
      p.epsilon = std::array{3.5, 0.5, 2.5}[slot];
      p.C = std::array{10.0, 10.0, 300.0}[slot];
      s.params = p;
      break;
    }
    case Technique::KRR: {
      KrrParams p;
      p.alpha = 1.0;
      p.kernel = {KernelType::Poly, 6, 0.0};
      s.params = p;
      break;
    }
    case Technique::RF: {
      ForestParams p;
      p.n_estimators = std::array{70, 80, 90}[slot];
      p.max_depth = std::array{10, 20, 20}[slot];
      p.criterion = slot == 2 ? Criterion::MAE : Criterion::MSE;
      s.params = p;
      break;
    }
    case Technique::ANN: {
      MlpParams p;
      p.hidden_layers = std::array{std::vector<int>{20, 14}, std::vector<int>{10, 5},
                                   std::vector<int>{120, 40, 20, 10}}[slot];
      p.activation = slot == 2 ? Activation::Tanh : Activation::Relu;
      p.optimizer = slot == 1 ? Optimizer::RmsProp : Optimizer::Adam;
      s.params = p;
      break;
    }
  }
  return s;
}

void ModelSpec::apply(const nlohmann::json& hyperparams) {
  if (hyperparams.is_null()) return;
  if (!hyperparams.is_object()) fail(ErrorKind::Config, "hyperparameters must be a JSON object");
  for (const auto& [key, value] : hyperparams.items()) {
    if (key == "seed") {
      seed = static_cast<std::uint64_t>(as_int(key, value, 0));
      continue;
    }
    if (!std::visit(Applier{key, value}, params)) {
      fail(ErrorKind::Config,
           fmt::format("hyperparameter '{}' does not apply to {}", key, to_string(technique)));
    }
  }
}

nlohmann::ordered_json ModelSpec::hyperparams_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::visit(Dumper{j}, params);
  return j;
}

nlohmann::ordered_json to_json(const ModelSpec& spec) {
  return {{"technique", to_string(spec.technique)},
          {"seed", spec.seed},
          {"hyperparams", spec.hyperparams_json()}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("technique")) {
    fail(ErrorKind::Config, "model spec needs a 'technique' field");
  }
  ModelSpec s = ModelSpec::defaults(parse_technique(j.at("technique").get<std::string>()));
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("hyperparams")) s.apply(j.at("hyperparams"));
  return s;
}

}  // namespace cgkqi
