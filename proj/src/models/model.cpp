#include "cgkqi/models.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "cgkqi/error.hpp"

namespace cgkqi {
namespace {

using ojson = nlohmann::ordered_json;

ojson vec_json(const Eigen::VectorXd& v) {
  ojson j = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

ojson mat_json(const Eigen::MatrixXd& m) {
  ojson j = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vec_json(m.row(r).transpose()));
  return j;
}

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  if (!j.is_array()) fail(ErrorKind::Config, "model file: expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd json_mat(const nlohmann::json& j, Eigen::Index cols) {
  if (!j.is_array()) fail(ErrorKind::Config, "model file: expected an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = json_vec(j[r]);
    if (row.size() != cols) fail(ErrorKind::Config, "model file: ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

struct ParamsDumper {
  ojson& j;

  void operator()(const LinearModel& m) const {
    j["coef"] = vec_json(m.coef);
    j["intercept"] = m.intercept;
  }
  void operator()(const KnnModel& m) const {
    j["X"] = mat_json(m.X);
    j["y"] = vec_json(m.y);
  }
  void operator()(const SvrModel& m) const {
    j["gamma"] = m.gamma;
    j["support"] = mat_json(m.support);
    j["coef"] = vec_json(m.coef);
    j["converged"] = m.converged;
    j["passes"] = m.passes;
  }
  void operator()(const KrrModel& m) const {
    j["gamma"] = m.gamma;
    j["X"] = mat_json(m.X);
    j["dual"] = vec_json(m.dual);
  }
  void operator()(const ForestModel& m) const {
    ojson trees = ojson::array();
    for (const auto& t : m.trees) {
      ojson feature = ojson::array(), threshold = ojson::array(), left = ojson::array(),
            right = ojson::array(), value = ojson::array();
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                       {"right", right}, {"value", value}});
    }
    j["trees"] = std::move(trees);
  }
  void operator()(const MlpModel& m) const {
    ojson layers = ojson::array();
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      layers.push_back({{"weights", mat_json(m.weights[l])}, {"biases", vec_json(m.biases[l])}});
    }
    j["layers"] = std::move(layers);
    j["epochs_run"] = m.epochs_run;
    j["early_stopped"] = m.early_stopped;
    j["converged"] = m.converged;
  }
};

Estimator estimator_from_json(const ModelSpec& spec, const nlohmann::json& j, std::size_t n_features) {
  const auto p = static_cast<Eigen::Index>(n_features);
  switch (spec.technique) {
    case Technique::LR: {
      LinearModel m;
      m.coef = json_vec(j.at("coef"));
      m.intercept = j.at("intercept").get<double>();
      if (m.coef.size() != p) fail(ErrorKind::Config, "model file: coefficient count mismatch");
      return m;
    }
    case Technique::KNR: {
      KnnModel m{std::get<KnnParams>(spec.params), json_mat(j.at("X"), p), json_vec(j.at("y"))};
      if (m.X.rows() != m.y.size()) fail(ErrorKind::Config, "model file: neighbor table mismatch");
      return m;
    }
    case Technique::SVR: {
      SvrModel m;
      m.params = std::get<SvrParams>(spec.params);
      m.gamma = j.at("gamma").get<double>();
      m.support = json_mat(j.at("support"), p);
      m.coef = json_vec(j.at("coef"));
      m.converged = j.value("converged", true);
      m.passes = j.value("passes", 0);
      if (m.support.rows() != m.coef.size()) fail(ErrorKind::Config, "model file: support mismatch");
      return m;
    }
    case Technique::KRR: {
      KrrModel m;
      m.params = std::get<KrrParams>(spec.params);
      m.gamma = j.at("gamma").get<double>();
      m.X = json_mat(j.at("X"), p);
      m.dual = json_vec(j.at("dual"));
      if (m.X.rows() != m.dual.size()) fail(ErrorKind::Config, "model file: dual weight mismatch");
      return m;
    }
    case Technique::RF: {
      ForestModel m;
      m.params = std::get<ForestParams>(spec.params);
      for (const auto& t : j.at("trees")) {
        const auto& feature = t.at("feature");
        RegressionTree tree;
        tree.nodes.resize(feature.size());
        for (std::size_t i = 0; i < feature.size(); ++i) {
          TreeNode& n = tree.nodes[i];
          n.feature = feature[i].get<int>();
          n.threshold = t.at("threshold")[i].get<double>();
          n.left = t.at("left")[i].get<int>();
          n.right = t.at("right")[i].get<int>();
          n.value = t.at("value")[i].get<double>();
          const auto count = static_cast<int>(feature.size());
          if (n.feature >= p || (n.feature >= 0 && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
                                                    n.left >= count || n.right >= count))) {
            fail(ErrorKind::Config, "model file: malformed tree");
          }
        }
        if (tree.nodes.empty()) fail(ErrorKind::Config, "model file: empty tree");
        m.trees.push_back(std::move(tree));
      }
      if (m.trees.empty()) fail(ErrorKind::Config, "model file: forest has no trees");
      return m;
    }
    case Technique::ANN: {
      MlpModel m;
      m.activation = std::get<MlpParams>(spec.params).activation;
      Eigen::Index inputs = p;
      for (const auto& layer : j.at("layers")) {
        m.weights.push_back(json_mat(layer.at("weights"), inputs));
        m.biases.push_back(json_vec(layer.at("biases")));
        if (m.biases.back().size() != m.weights.back().rows()) {
          fail(ErrorKind::Config, "model file: bias length mismatch");
        }
        inputs = m.weights.back().rows();
      }
      if (m.weights.empty() || inputs != 1) fail(ErrorKind::Config, "model file: network shape");
      m.epochs_run = j.value("epochs_run", 0);
      m.early_stopped = j.value("early_stopped", false);
      m.converged = j.value("converged", true);
      return m;
    }
  }
  fail(ErrorKind::Config, "model file: unknown technique");
}

}  // namespace

TrainedModel::TrainedModel(ModelSpec spec, Estimator estimator, std::size_t n_features)
    : spec_(std::move(spec)), estimator_(std::move(estimator)), n_features_(n_features) {}

void TrainedModel::set_features(std::vector<std::string> names) {
  if (names.size() != n_features_) {
    fail(ErrorKind::Shape, fmt::format("{} feature names for a {}-feature model", names.size(), n_features_));
  }
  const std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) fail(ErrorKind::Validation, "duplicate feature names");
  features_ = std::move(names);
}

void TrainedModel::set_scaler(ScalerParams scaler) {
  if (scaler.columns.size() != n_features_ || scaler.x_min.size() != n_features_ ||
      scaler.x_max.size() != n_features_) {
    fail(ErrorKind::Shape, "scaler does not match the model's features");
  }
  scaler_ = std::move(scaler);
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_features_) {
    fail(ErrorKind::Shape,
         fmt::format("model expects {} features, got {}", n_features_, X.cols()));
  }
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(X); }, estimator_);
}

Eigen::VectorXd TrainedModel::predict(const Dataset& ds) const {
  if (features_.empty()) fail(ErrorKind::Usage, "model has no feature names; pass a scaled matrix");
  for (const auto& f : features_) {
    if (!ds.has_column(f)) fail(ErrorKind::Validation, fmt::format("dataset lacks model feature '{}'", f));
  }
  Eigen::MatrixXd X = ds.select(features_);
  if (scaler_) X = MinMaxScaler(*scaler_).transform(X);
  return predict(X);
}

TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    fail(ErrorKind::Shape, fmt::format("{} rows but {} targets", X.rows(), y.size()));
  }
  if (X.rows() < 2) fail(ErrorKind::Shape, "training needs at least two rows");
  if (X.cols() < 1) fail(ErrorKind::Shape, "training needs at least one feature");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorKind::Validation, "training data contains non-finite values");

  bool non_converged = false;
  Estimator est = [&]() -> Estimator {
    switch (spec.technique) {
      case Technique::LR: return LinearModel::fit(X, y);
      case Technique::KNR: return KnnModel::fit(std::get<KnnParams>(spec.params), X, y);
      case Technique::SVR: {
        auto m = SvrModel::fit(std::get<SvrParams>(spec.params), X, y, spec.seed);
        non_converged = !m.converged;
        return m;
      }
      case Technique::KRR: return KrrModel::fit(std::get<KrrParams>(spec.params), X, y);
      case Technique::RF: return ForestModel::fit(std::get<ForestParams>(spec.params), X, y, spec.seed);
      case Technique::ANN: {
        auto m = MlpModel::fit(std::get<MlpParams>(spec.params), X, y, spec.seed);
        non_converged = !m.converged;
        return m;
      }
    }
    fail(ErrorKind::Config, "unknown technique");
  }();
  TrainedModel model(spec, std::move(est), static_cast<std::size_t>(X.cols()));
  model.set_train_size(static_cast<std::size_t>(X.rows()));
  model.set_non_converged(non_converged);
  return model;
}

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X) { return model.predict(X); }

nlohmann::ordered_json to_json(const TrainedModel& model) {
  ojson params = ojson::object();
  params["train_size"] = model.train_size();
  params["non_converged"] = model.non_converged();
  params["n_features"] = model.n_features();
  std::visit(ParamsDumper{params}, model.estimator());
  ojson j;
  j["format_version"] = kModelFormatVersion;
  j["spec"] = to_json(model.spec());
  j["features"] = model.features();
  j["scaler"] = nullptr;
  if (model.scaler()) {
    nlohmann::json s;
    to_json(s, *model.scaler());
    j["scaler"] = s;
  }
  j["params"] = std::move(params);
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      fail(ErrorKind::Config, fmt::format("unsupported model format_version {}", version));
    }
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const auto& params = j.at("params");
    const auto features = j.value("features", std::vector<std::string>{});
    const std::size_t n_features = params.contains("n_features") ? params.at("n_features").get<std::size_t>()
                                                                 : features.size();
    TrainedModel model(spec, estimator_from_json(spec, params, n_features), n_features);
    if (!features.empty()) model.set_features(features);
    if (j.contains("scaler") && !j.at("scaler").is_null()) model.set_scaler(j.at("scaler").get<ScalerParams>());
    model.set_train_size(params.value("train_size", std::size_t{0}));
    model.set_non_converged(params.value("non_converged", false));
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, fmt::format("model file: {}", e.what()));
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << to_json(model).dump(1) << '\n';
  if (!out) fail(ErrorKind::Io, fmt::format("write failed: {}", path.string()));
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, fmt::format("{}: {}", path.string(), e.what()));
  }
  return model_from_json(j);
}

}  // namespace cgkqi
