#include "cgkqi/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cgkqi/dataset.hpp"
#include "cgkqi/error.hpp"
#include "cgkqi/eval.hpp"
#include "cgkqi/featsel.hpp"
#include "cgkqi/image_io.hpp"
#include "cgkqi/kqi.hpp"
#include "cgkqi/models.hpp"
#include "cgkqi/synth.hpp"
#include "cgkqi/trace.hpp"
#include "csv.hpp"

namespace cgkqi::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum class Kind { Str, Num, Int, Flag, List, Json };

struct OptDef {
  std::string name;  // flag spelling without dashes
  std::string key;   // config key
  Kind kind;
  ojson fallback;
  bool required = false;
  std::string raw;
  bool flag = false;
  CLI::Option* opt = nullptr;
};

std::string to_key(std::string_view name) {
  std::string k(name);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

ojson read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, fmt::format("{}: invalid JSON ({})", path.string(), e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) fail(ErrorKind::Io, fmt::format("write failed: {}", path.string()));
}

// One subcommand. Every option is declared once here and resolved into a
// JSON object from, in order of precedence: the command line, the --config
// file, then the built-in fallback. That object is what the metadata echoes.
class Command {
 public:
  using Handler = std::function<void(const ojson&)>;

  Command(CLI::App& root, const std::string& name, const std::string& desc,
          std::optional<std::uint64_t> default_seed)
      : app_(root.add_subcommand(name, desc)), default_seed_(default_seed) {
    app_->add_option("--config", config_path_,
                     "JSON file of option values, or a .meta.json written by an earlier run");
    if (default_seed_) add("seed", Kind::Int, fmt::format("RNG seed (env CGKQI_SEED, default {})", *default_seed_));
  }

  Command& add(const std::string& name, Kind kind, const std::string& desc, ojson fallback = nullptr,
               bool required = false) {
    OptDef& d = defs_.emplace_back();
    d.name = name;
    d.key = to_key(name);
    d.kind = kind;
    d.fallback = std::move(fallback);
    d.required = required;
    std::string text = desc;
    if (required) text += " (required)";
    if (kind == Kind::Flag) {
      d.opt = app_->add_flag("--" + name, d.flag, text);
    } else {
      d.opt = app_->add_option("--" + name, d.raw, text);
      if (!d.fallback.is_null()) d.opt->default_str(d.fallback.is_string() ? d.fallback.get<std::string>() : d.fallback.dump());
    }
    return *this;
  }

  Command& on_run(Handler h) {
    handler_ = std::move(h);
    return *this;
  }

  CLI::App* app() const { return app_; }
  bool given(const std::string& name) const {
    for (const auto& d : defs_) {
      if (d.name == name) return d.opt->count() > 0;
    }
    return false;
  }

  ojson resolve() const {
    ojson cfg = ojson::object();
    if (!config_path_.empty()) {
      cfg = read_json_file(config_path_);
      if (cfg.is_object() && cfg.contains("resolved_config")) cfg = cfg.at("resolved_config");
      if (!cfg.is_object()) fail(ErrorKind::Config, fmt::format("{}: expected a JSON object", config_path_));
    }
    ojson normalized = ojson::object();
    for (const auto& [k, v] : cfg.items()) {
      const std::string key = to_key(k);
      const bool known = std::any_of(defs_.begin(), defs_.end(), [&](const OptDef& d) { return d.key == key; });
      if (!known) {
        fail(ErrorKind::Config, fmt::format("{}: unknown setting '{}' for '{}'", config_path_, k, app_->get_name()));
      }
      normalized[key] = v;
    }

    ojson out = ojson::object();
    for (const auto& d : defs_) {
      ojson v;
      if (d.opt->count() > 0) {
        v = d.kind == Kind::Flag ? ojson(true) : from_text(d);
      } else if (normalized.contains(d.key)) {
        v = from_config(d, normalized.at(d.key));
      } else {
        v = d.fallback;
      }
      if (v.is_null() && d.required) {
        fail(ErrorKind::Usage, fmt::format("missing --{} (or '{}' in --config)", d.name, d.key));
      }
      out[d.key] = std::move(v);
    }
    if (default_seed_ && out["seed"].is_null()) {
      std::uint64_t seed = *default_seed_;
      if (const char* env = std::getenv("CGKQI_SEED"); env != nullptr && *env != '\0') {
        const auto parsed = csv::parse_int(env);
        if (!parsed || *parsed < 0) fail(ErrorKind::Config, fmt::format("CGKQI_SEED '{}' is not a seed", env));
        seed = static_cast<std::uint64_t>(*parsed);
      }
      out["seed"] = seed;
    }
    return out;
  }

  void run() const { handler_(resolve()); }

 private:
  static ojson from_text(const OptDef& d) {
    switch (d.kind) {
      case Kind::Str: return d.raw;
      case Kind::Num: {
        const auto v = csv::parse_double(d.raw);
        if (!v) fail(ErrorKind::Usage, fmt::format("--{} expects a number, got '{}'", d.name, d.raw));
        return *v;
      }
      case Kind::Int: {
        const auto v = csv::parse_int(d.raw);
        if (!v) fail(ErrorKind::Usage, fmt::format("--{} expects an integer, got '{}'", d.name, d.raw));
        return *v;
      }
      case Kind::List: {
        ojson list = ojson::array();
        for (const auto& item : csv::split_line(d.raw)) {
          const auto t = std::string(csv::trim(item));
          if (!t.empty()) list.push_back(t);
        }
        return list;
      }
      case Kind::Json:
        try {
          return ojson::parse(d.raw);
        } catch (const nlohmann::json::exception&) {
          fail(ErrorKind::Usage, fmt::format("--{} expects JSON, got '{}'", d.name, d.raw));
        }
      case Kind::Flag: return true;
    }
    return nullptr;
  }

  ojson from_config(const OptDef& d, const ojson& v) const {
    const auto bad = [&](std::string_view want) {
      fail(ErrorKind::Config, fmt::format("{}: '{}' must be {}", config_path_, d.key, want));
    };
    if (v.is_null()) return v;
    switch (d.kind) {
      case Kind::Str:
        if (!v.is_string()) bad("a string");
        break;
      case Kind::Num:
        if (!v.is_number()) bad("a number");
        break;
      case Kind::Int:
        if (!v.is_number_integer()) bad("an integer");
        break;
      case Kind::Flag:
        if (!v.is_boolean()) bad("true or false");
        break;
      case Kind::List:
        if (v.is_string()) {
          OptDef tmp = d;
          tmp.raw = v.get<std::string>();
          return from_text(tmp);
        }
        if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const ojson& x) { return x.is_string(); })) {
          bad("a list of names");
        }
        break;
      case Kind::Json: break;
    }
    return v;
  }

  CLI::App* app_;
  std::optional<std::uint64_t> default_seed_;
  std::string config_path_;
  std::deque<OptDef> defs_;
  Handler handler_;
};

// Accessors over a resolved option object.
std::optional<std::string> opt_str(const ojson& r, const char* key) {
  if (r.at(key).is_null()) return std::nullopt;
  return r.at(key).get<std::string>();
}
std::string str(const ojson& r, const char* key) { return r.at(key).get<std::string>(); }
std::optional<double> opt_num(const ojson& r, const char* key) {
  if (r.at(key).is_null()) return std::nullopt;
  return r.at(key).get<double>();
}
double num(const ojson& r, const char* key) { return r.at(key).get<double>(); }
std::optional<long long> opt_int(const ojson& r, const char* key) {
  if (r.at(key).is_null()) return std::nullopt;
  return r.at(key).get<long long>();
}
long long integer(const ojson& r, const char* key) { return r.at(key).get<long long>(); }
std::vector<std::string> list(const ojson& r, const char* key) {
  if (r.at(key).is_null()) return {};
  return r.at(key).get<std::vector<std::string>>();
}
std::uint64_t seed_of(const ojson& r) { return r.at("seed").get<std::uint64_t>(); }

std::size_t positive(long long v, std::string_view what) {
  if (v < 1) fail(ErrorKind::Usage, fmt::format("{} must be at least 1, got {}", what, v));
  return static_cast<std::size_t>(v);
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string command_line;

  ojson meta(const ojson& resolved, std::optional<std::uint64_t> seed) const {
    ojson m;
    m["tool_version"] = std::string(kToolVersion);
    m["seed"] = seed ? ojson(*seed) : ojson(nullptr);
    m["resolved_config"] = resolved;
    m["command"] = command_line;
    return m;
  }

  void write_meta(const fs::path& artifact, const ojson& m) const {
    write_text(fs::path(artifact.string() + ".meta.json"), m.dump(2) + "\n");
  }
};

std::string target_arg(const std::string& t) {
  const auto names = target_names();
  if (std::find(names.begin(), names.end(), t) == names.end()) {
    fail(ErrorKind::Validation, fmt::format("unknown target '{}' (CGlatency, FreezePercent, EFPS)", t));
  }
  return t;
}

std::vector<std::string> targets_arg(const std::vector<std::string>& given) {
  if (given.empty()) return target_names();
  std::vector<std::string> out;
  for (const auto& t : given) out.push_back(target_arg(t));
  return out;
}

std::vector<Technique> techniques_arg(const std::vector<std::string>& given) {
  if (given.empty()) return all_techniques();
  std::vector<Technique> out;
  for (const auto& t : given) out.push_back(parse_technique(t));
  return out;
}

std::vector<FeatureGroup> groups_arg(const std::vector<std::string>& given) {
  if (given.empty()) return {FeatureGroup::All, FeatureGroup::UE, FeatureGroup::BS};
  std::vector<FeatureGroup> out;
  for (const auto& g : given) out.push_back(parse_group(g));
  return out;
}

// Feature choice shared by train and gridsearch: an explicit list, or the
// top-k MI features of a group computed on the training split.
std::vector<std::string> choose_features(const ojson& r, const Dataset& train, const std::string& target) {
  auto features = list(r, "features");
  if (!features.empty()) {
    if (!r.at("k").is_null()) fail(ErrorKind::Usage, "--features and --k are mutually exclusive");
    const auto predictors = predictor_names();
    for (const auto& f : features) {
      if (std::find(predictors.begin(), predictors.end(), f) == predictors.end()) {
        fail(ErrorKind::Validation, fmt::format("'{}' is not a predictor column", f));
      }
    }
    return features;
  }
  const FeatureGroup group = parse_group(str(r, "group"));
  const std::size_t size = group_features(group).size();
  const std::size_t k = r.at("k").is_null() ? size : positive(integer(r, "k"), "--k");
  if (k > size) fail(ErrorKind::Usage, fmt::format("--k {} exceeds the {} features of group {}", k, size, to_string(group)));
  return select_features(train, target, k, group, positive(integer(r, "bins"), "--bins"));
}

struct Prepared {
  DatasetSplit parts;
  std::vector<std::string> features;
  ScalerParams scaler;
  Eigen::MatrixXd Xtr, Xte;
  Eigen::VectorXd ytr, yte;
};

Prepared prepare(const ojson& r, const std::string& target) {
  const Dataset ds = load_dataset(str(r, "dataset"));
  Prepared p{split(ds, num(r, "test_fraction"), seed_of(r)), {}, {}, {}, {}, {}, {}};
  p.features = choose_features(r, p.parts.train, target);
  p.scaler = fit_scaler(p.parts.train.select(p.features), p.features);
  const MinMaxScaler mm(p.scaler);
  p.Xtr = mm.transform(p.parts.train.select(p.features));
  p.Xte = mm.transform(p.parts.test.select(p.features));
  p.ytr = p.parts.train.column(target);
  p.yte = p.parts.test.column(target);
  return p;
}

void add_selection_options(Command& c) {
  c.add("dataset", Kind::Str, "Dataset CSV", nullptr, true)
      .add("target", Kind::Str, "Target KQI: CGlatency, FreezePercent or EFPS", nullptr, true)
      .add("features", Kind::List, "Comma-separated predictor names")
      .add("k", Kind::Int, "Use the top-k MI features of --group (default: whole group)")
      .add("group", Kind::Str, "Feature group for MI selection: all, ue, bs", "all")
      .add("bins", Kind::Int, "Quantile bins for MI estimation", static_cast<int>(kDefaultBins))
      .add("test-fraction", Kind::Num, "Held-out fraction", 0.30);
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

// ---- subcommands ---------------------------------------------------------

void run_trace(const Context& ctx, const ojson& r) {
  const auto dir = fs::path(str(r, "images"));
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, fmt::format("--images: {} is not a directory", dir.string()));
  const auto files = list_images(dir);
  if (files.empty()) fail(ErrorKind::EmptySession, fmt::format("no .ppm or .png images in {}", dir.string()));
  const double capture = num(r, "capture_fps");
  if (!(capture > 0.0)) fail(ErrorKind::Usage, "--capture-fps must be positive");

  std::vector<double> stamps;
  if (const auto ts = opt_str(r, "timestamps")) {
    std::ifstream in(*ts);
    if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", *ts));
    std::string line;
    std::optional<std::size_t> col;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (csv::is_blank(line)) continue;
      const auto cells = csv::split_line(line);
      if (!col) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (csv::trim(cells[i]) == "timestamp_ms") col = i;
        }
        if (!col) fail(ErrorKind::Validation, fmt::format("{}: header needs a timestamp_ms column", *ts));
        continue;
      }
      const auto v = *col < cells.size() ? csv::parse_double(cells[*col]) : std::nullopt;
      if (!v) fail(ErrorKind::Validation, fmt::format("{}:{}: bad timestamp", *ts, line_no));
      stamps.push_back(*v);
    }
    if (stamps.size() != files.size()) {
      fail(ErrorKind::Shape, fmt::format("{} timestamps for {} images", stamps.size(), files.size()));
    }
  } else {
    for (std::size_t i = 0; i < files.size(); ++i) stamps.push_back(static_cast<double>(i) * 1000.0 / capture);
  }

  DiffConfig dc;
  const auto threshold = integer(r, "pixel_threshold");
  if (threshold < 0 || threshold > 255) fail(ErrorKind::Usage, "--pixel-threshold must be in 0..255");
  dc.pixel_threshold = static_cast<int>(threshold);
  std::vector<TimedFrame> frames;
  frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) frames.push_back({stamps[i], read_image(files[i])});
  const FrameTrace trace = build_trace(frames, capture, num(r, "session_fps"), dc);

  const fs::path out = str(r, "out");
  write_trace_csv(trace, out);
  ctx.write_meta(out, ctx.meta(r, std::nullopt));
  fmt::print(ctx.out, "wrote {} frames to {}\n", trace.frames.size(), out.string());
}

void run_measure(const Context& ctx, const ojson& r) {
  const double session = num(r, "session_fps");
  const FrameTrace trace =
      read_trace_csv(str(r, "trace"), num(r, "capture_fps"), session, opt_num(r, "duration_ms").value_or(0.0));
  ActionLog actions;
  if (const auto path = opt_str(r, "actions")) actions = read_actions_csv(*path);
  DiffConfig dc;
  dc.identity_eps = num(r, "identity_eps");
  dc.motion_threshold = num(r, "motion_threshold");
  dc.validate();
  const KqiReport report = measure_session(trace, actions, session, dc);
  const std::string text = to_json(report).dump(2) + "\n";
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, text);
    ctx.write_meta(*out, ctx.meta(r, std::nullopt));
  } else {
    ctx.out << text;
  }
}

void run_synth(const Context& ctx, const ojson& r) {
  nlohmann::json sj = nlohmann::json::object();
  for (const char* key : {"duration_ms", "session_fps", "capture_fps", "freeze_schedule", "action_delays",
                          "ambient_diff", "timestamp_jitter_ms", "motion_threshold", "seed"}) {
    sj[key] = r.at(key);
  }
  SynthConfig cfg;
  try {
    from_json(sj, cfg);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, fmt::format("synth settings: {}", e.what()));
  }
  cfg.validate();
  const SynthSession s = generate_session(cfg);

  const fs::path dir = str(r, "out_dir");
  fs::create_directories(dir);
  write_trace_csv(s.trace, dir / "trace.csv");
  write_actions_csv(s.actions, dir / "actions.csv");
  nlohmann::json truth;
  to_json(truth, s.truth);
  write_text(dir / "ground_truth.json", truth.dump(2) + "\n");
  if (r.at("render").get<bool>()) {
    const auto frames_dir = dir / "frames";
    fs::create_directories(frames_dir);
    const auto frames = render_session(cfg);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      write_ppm(frames[i].frame, frames_dir / fmt::format("frame_{:06d}.ppm", i));
    }
    std::ofstream ts(frames_dir / "timestamps.csv");
    ts << "timestamp_ms\n";
    for (const auto& f : frames) ts << fmt_num(f.timestamp_ms) << '\n';
  }
  if (const auto rows = opt_int(r, "dataset_rows")) {
    write_dataset_csv(generate_dataset(positive(*rows, "--dataset-rows"), cfg.seed), dir / "dataset.csv");
  }
  write_text(dir / "meta.json", ctx.meta(r, cfg.seed).dump(2) + "\n");
  fmt::print(ctx.out, "wrote synthetic session ({} captures, {} actions) to {}\n", s.trace.frames.size(),
             s.actions.actions.size(), dir.string());
}

void run_scores(const Context& ctx, const ojson& r) {
  const Dataset ds = load_dataset(str(r, "dataset"));
  const std::string scope = str(r, "split");
  if (scope != "train" && scope != "all") fail(ErrorKind::Usage, "--split must be 'train' or 'all'");
  const Dataset data = scope == "train" ? split(ds, num(r, "test_fraction"), seed_of(r)).train : ds;
  const FeatureGroup group = parse_group(str(r, "group"));
  const auto bins = positive(integer(r, "bins"), "--bins");

  std::ostringstream csv;
  csv << "feature,target,mi\n";
  for (const auto& target : targets_arg(list(r, "targets"))) {
    auto scores = score_features(data, target, group, bins);
    std::stable_sort(scores.begin(), scores.end(),
                     [](const FeatureScore& a, const FeatureScore& b) { return a.mi > b.mi; });
    for (const auto& s : scores) csv << fmt::format("{},{},{}\n", s.feature, target, s.mi);
  }
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, csv.str());
    ctx.write_meta(*out, ctx.meta(r, seed_of(r)));
  } else {
    ctx.out << csv.str();
  }
}

ModelSpec spec_arg(const ojson& r, Technique technique, const std::string& target) {
  ModelSpec spec = ModelSpec::table_defaults(technique, target);
  const auto apply = [&](const nlohmann::json& j) {
    if (j.is_object() && j.contains("technique")) {
      if (parse_technique(j.at("technique").get<std::string>()) != technique) {
        fail(ErrorKind::Usage, "--spec names a different technique than --technique");
      }
      if (j.contains("hyperparams")) spec.apply(j.at("hyperparams"));
    } else {
      spec.apply(j);
    }
  };
  if (const auto path = opt_str(r, "spec")) apply(nlohmann::json(read_json_file(*path)));
  if (!r.at("hyperparams").is_null()) apply(nlohmann::json(r.at("hyperparams")));
  spec.seed = seed_of(r);
  return spec;
}

void run_train(const Context& ctx, const ojson& r) {
  const Technique technique = parse_technique(str(r, "technique"));
  const std::string target = target_arg(str(r, "target"));
  const ModelSpec spec = spec_arg(r, technique, target);
  const Prepared p = prepare(r, target);
  TrainedModel model = fit(spec, p.Xtr, p.ytr);
  model.set_features(p.features);
  model.set_scaler(p.scaler);
  const EvalResult ev = mase(p.yte, model.predict(p.Xte), p.ytr);

  ojson j = to_json(model);
  j["params"]["training"] = {{"target", target}, {"test_fraction", num(r, "test_fraction")}, {"split_seed", seed_of(r)}};
  const std::string out = str(r, "out");
  write_text(out, j.dump(1) + "\n");
  ctx.write_meta(out, ctx.meta(r, seed_of(r)));

  ojson summary = to_json(ev);
  summary["technique"] = to_string(technique);
  summary["target"] = target;
  summary["features"] = p.features;
  summary["non_converged"] = model.non_converged();
  ctx.out << summary.dump(2) << '\n';
  if (model.non_converged()) fmt::print(ctx.err, "warning: {} did not converge\n", to_string(technique));
}

void run_gridsearch(const Context& ctx, const ojson& r) {
  const Technique technique = parse_technique(str(r, "technique"));
  const std::string target = target_arg(str(r, "target"));
  const Prepared p = prepare(r, target);
  const ojson grid = opt_str(r, "grid") ? read_json_file(str(r, "grid")) : default_grid(technique);
  ModelSpec base = ModelSpec::defaults(technique);
  base.seed = seed_of(r);
  const int folds = static_cast<int>(integer(r, "folds"));
  const GridSearchResult res = grid_search(base, grid, p.Xtr, p.ytr, folds, seed_of(r));

  ojson j;
  j["technique"] = to_string(technique);
  j["target"] = target;
  j["features"] = p.features;
  j["folds"] = folds;
  j["best"] = to_json(res.best);
  j["cv_mae"] = res.cv_mae;
  ojson points = ojson::array();
  for (const auto& pt : res.points) {
    points.push_back({{"hyperparams", pt.hyperparams},
                      {"cv_mae", std::isfinite(pt.cv_mae) ? ojson(pt.cv_mae) : ojson(nullptr)},
                      {"non_converged", pt.non_converged}});
  }
  j["points"] = std::move(points);
  const std::string text = j.dump(2) + "\n";

  if (const auto model_out = opt_str(r, "model_out")) {
    TrainedModel model = fit(res.best, p.Xtr, p.ytr);
    model.set_features(p.features);
    model.set_scaler(p.scaler);
    ojson mj = to_json(model);
    mj["params"]["training"] = {{"target", target}, {"test_fraction", num(r, "test_fraction")}, {"split_seed", seed_of(r)}};
    write_text(*model_out, mj.dump(1) + "\n");
    ctx.write_meta(*model_out, ctx.meta(r, seed_of(r)));
  }
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, text);
    ctx.write_meta(*out, ctx.meta(r, seed_of(r)));
  } else {
    ctx.out << text;
  }
}

void run_predict(const Context& ctx, const ojson& r) {
  const TrainedModel model = load_model(str(r, "model"));
  const Dataset ds = load_dataset(str(r, "dataset"), LoadOptions{false});
  const Eigen::VectorXd yhat = model.predict(ds);
  std::ostringstream csv;
  csv << "prediction\n";
  for (Eigen::Index i = 0; i < yhat.size(); ++i) csv << fmt_num(yhat(i)) << '\n';
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, csv.str());
    ctx.write_meta(*out, ctx.meta(r, std::nullopt));
  } else {
    ctx.out << csv.str();
  }
}

void run_evaluate(const Context& ctx, const ojson& r) {
  const ojson raw = read_json_file(str(r, "model"));
  const TrainedModel model = model_from_json(nlohmann::json(raw));
  const ojson training = raw.contains("params") ? raw.at("params").value("training", ojson::object()) : ojson::object();

  std::string target;
  if (const auto t = opt_str(r, "target")) target = *t;
  else if (training.contains("target")) target = training.at("target").get<std::string>();
  else fail(ErrorKind::Usage, "model carries no target; pass --target");
  target = target_arg(target);
  const double fraction = opt_num(r, "test_fraction").value_or(training.value("test_fraction", 0.30));
  std::uint64_t seed = training.value("split_seed", std::uint64_t{0});
  if (const auto s = opt_int(r, "split_seed")) {
    if (*s < 0) fail(ErrorKind::Usage, "--split-seed must be non-negative");
    seed = static_cast<std::uint64_t>(*s);
  }

  const DatasetSplit parts = split(load_dataset(str(r, "dataset")), fraction, seed);
  const EvalResult ev = mase(parts.test.column(target), model.predict(parts.test), parts.train.column(target));
  ojson j = to_json(ev);
  j["technique"] = to_string(model.spec().technique);
  j["target"] = target;
  j["split_seed"] = seed;
  j["test_fraction"] = fraction;
  const std::string text = j.dump(2) + "\n";
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, text);
    ctx.write_meta(*out, ctx.meta(r, seed));
  } else {
    ctx.out << text;
  }
}

void run_bench(const Context& ctx, const ojson& r) {
  const auto n = positive(integer(r, "n"), "--n");
  ojson results = ojson::array();
  if (const auto path = opt_str(r, "model")) {
    if (!r.at("techniques").is_null() || !r.at("targets").is_null()) {
      fail(ErrorKind::Usage, "--model cannot be combined with --techniques/--targets");
    }
    const ojson raw = read_json_file(*path);
    const TrainedModel model = model_from_json(nlohmann::json(raw));
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(model.n_features()), 0.5);
    if (const auto ds_path = opt_str(r, "dataset"); ds_path && !model.features().empty()) {
      const Dataset ds = load_dataset(*ds_path, LoadOptions{false});
      Eigen::MatrixXd x = ds.select(model.features()).topRows(1);
      if (model.scaler()) x = MinMaxScaler(*model.scaler()).transform(x);
      row = x.row(0);
    }
    TimingResult t = bench_prediction(model, row, n);
    if (raw.contains("params")) t.target = raw.at("params").value("training", ojson::object()).value("target", "");
    results.push_back(to_json(t));
  } else {
    const auto ds_path = opt_str(r, "dataset");
    if (!ds_path) fail(ErrorKind::Usage, "bench needs --model or --dataset");
    const DatasetSplit parts = split(load_dataset(*ds_path), num(r, "test_fraction"), seed_of(r));
    const auto predictors = predictor_names();
    const MinMaxScaler mm(fit_scaler(parts.train.select(predictors), predictors));
    const Eigen::MatrixXd Xtr = mm.transform(parts.train.select(predictors));
    const Eigen::RowVectorXd row = mm.transform(parts.test.select(predictors)).row(0);
    for (const auto& target : targets_arg(list(r, "targets"))) {
      for (const Technique t : techniques_arg(list(r, "techniques"))) {
        ModelSpec spec = ModelSpec::table_defaults(t, target);
        spec.seed = seed_of(r);
        const TrainedModel model = fit(spec, Xtr, parts.train.column(target));
        TimingResult res = bench_prediction(model, row, n);
        res.target = target;
        results.push_back(to_json(res));
      }
    }
  }
  const std::string text = results.dump(2) + "\n";
  if (const auto out = opt_str(r, "out")) {
    write_text(*out, text);
    ctx.write_meta(*out, ctx.meta(r, seed_of(r)));
  } else {
    ctx.out << text;
  }
}

void run_sweep_cmd(const Context& ctx, const ojson& r) {
  const Dataset ds = load_dataset(str(r, "dataset"));
  SweepConfig cfg;
  cfg.techniques = techniques_arg(list(r, "techniques"));
  cfg.targets = targets_arg(list(r, "targets"));
  cfg.groups = groups_arg(list(r, "groups"));
  cfg.k_min = positive(integer(r, "kmin"), "--kmin");
  cfg.k_max = positive(integer(r, "kmax"), "--kmax");
  cfg.test_fraction = num(r, "test_fraction");
  cfg.seed = seed_of(r);
  cfg.bins = positive(integer(r, "bins"), "--bins");
  cfg.jobs = static_cast<unsigned>(positive(integer(r, "jobs"), "--jobs"));
  cfg.overrides = nlohmann::json(r.at("overrides"));
  if (!cfg.overrides.is_object()) fail(ErrorKind::Usage, "--overrides must be a JSON object keyed by technique");

  const auto rows = run_sweep(ds, cfg);
  const fs::path out = str(r, "out");
  write_sweep_csv(rows, out);

  ojson m = ctx.meta(r, cfg.seed);
  ojson non_converged = ojson::array();
  ojson failed = ojson::array();
  for (const auto& row : rows) {
    const ojson cell = {{"technique", to_string(row.technique)}, {"target", row.target},
                        {"group", to_string(row.group)}, {"k", row.k}};
    if (row.non_converged) non_converged.push_back(cell);
    if (!row.error.empty()) {
      ojson f = cell;
      f["error"] = row.error;
      failed.push_back(std::move(f));
    }
  }
  m["non_converged"] = std::move(non_converged);
  m["failed"] = std::move(failed);
  ctx.write_meta(out, m);

  if (const auto svg = opt_str(r, "svg_dir")) {
    for (const auto& p : write_sweep_svgs(rows, *svg)) fmt::print(ctx.out, "wrote {}\n", p.string());
  }
  fmt::print(ctx.out, "wrote {} sweep rows to {}\n", rows.size(), out.string());
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      fmt::print(ctx.err, "warning: {} {} {} k={} failed: {}\n", to_string(row.technique), row.target,
                 to_string(row.group), row.k, row.error);
    }
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cloud-gaming KQI measurement and estimation toolkit", "cgkqi"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string command_line;
  for (std::size_t i = 1; i < args.size(); ++i) command_line += (i > 1 ? " " : "") + args[i];
  const Context ctx{out, err, command_line};

  std::vector<std::unique_ptr<Command>> commands;
  const auto make = [&](const std::string& name, const std::string& desc, std::optional<std::uint64_t> seed,
                        void (*fn)(const Context&, const ojson&)) -> Command& {
    commands.push_back(std::make_unique<Command>(app, name, desc, seed));
    return commands.back()->on_run([&ctx, fn](const ojson& r) { fn(ctx, r); });
  };

  make("trace", "Build a frame trace CSV from a directory of captured images", std::nullopt, run_trace)
      .add("images", Kind::Str, "Directory of .ppm/.png captures (sorted by name)", nullptr, true)
      .add("capture-fps", Kind::Num, "Capture rate", nullptr, true)
      .add("session-fps", Kind::Num, "Configured session frame rate", nullptr, true)
      .add("timestamps", Kind::Str, "CSV with a timestamp_ms column, one row per image")
      .add("pixel-threshold", Kind::Int, "Per-channel difference ignored as noise", 0)
      .add("out", Kind::Str, "Output trace CSV", nullptr, true);

  make("measure", "Compute input lag, freeze percentage and EFPS for a session", std::nullopt, run_measure)
      .add("trace", Kind::Str, "Trace CSV", nullptr, true)
      .add("actions", Kind::Str, "Action log CSV (action_id,timestamp_ms)")
      .add("capture-fps", Kind::Num, "Capture rate", nullptr, true)
      .add("session-fps", Kind::Num, "Configured session frame rate", nullptr, true)
      .add("duration-ms", Kind::Num, "Session length (default: last timestamp)")
      .add("identity-eps", Kind::Num, "Largest diff fraction still counted as an identical frame", 0.0)
      .add("motion-threshold", Kind::Num, "Smallest diff fraction counted as an action response", 0.25)
      .add("out", Kind::Str, "Report JSON (default: stdout)");

  {
    nlohmann::json d;
    to_json(d, SynthConfig{});
    make("synth", "Generate a synthetic session with known ground truth", d.at("seed").get<std::uint64_t>(),
         run_synth)
        .add("duration-ms", Kind::Num, "Session length", d.at("duration_ms"))
        .add("session-fps", Kind::Num, "Content frame rate", d.at("session_fps"))
        .add("capture-fps", Kind::Num, "Capture rate", d.at("capture_fps"))
        .add("freeze-schedule", Kind::Json, "JSON list of {start_ms, length_ms}", ojson::array())
        .add("action-delays", Kind::Json, "JSON list of {action_ms, response_delay_ms, response_diff}",
             ojson::array())
        .add("ambient-diff", Kind::Num, "Diff fraction of ordinary motion", d.at("ambient_diff"))
        .add("timestamp-jitter-ms", Kind::Num, "Uniform capture timestamp jitter", d.at("timestamp_jitter_ms"))
        .add("motion-threshold", Kind::Num, "Response threshold the session is designed for",
             d.at("motion_threshold"))
        .add("out-dir", Kind::Str, "Output directory", nullptr, true)
        .add("render", Kind::Flag, "Also write the rendered frames as PPM images", false)
        .add("dataset-rows", Kind::Int, "Also write a synthetic KQI dataset with this many rows");
  }

  make("scores", "Mutual information between predictors and targets", 0, run_scores)
      .add("dataset", Kind::Str, "Dataset CSV", nullptr, true)
      .add("targets", Kind::List, "Targets to score (default: all)")
      .add("group", Kind::Str, "Feature group: all, ue, bs", "all")
      .add("bins", Kind::Int, "Quantile bins for MI estimation", static_cast<int>(kDefaultBins))
      .add("split", Kind::Str, "Score on the 'train' split or 'all' rows", "train")
      .add("test-fraction", Kind::Num, "Held-out fraction of the split", 0.30)
      .add("out", Kind::Str, "MI CSV (default: stdout)");

  add_selection_options(make("train", "Fit one model and save it", 0, run_train)
                            .add("technique", Kind::Str, "lr, knr, svr, krr, rf or ann", nullptr, true)
                            .add("spec", Kind::Str, "JSON file with hyperparameters or a full model spec")
                            .add("hyperparams", Kind::Json, "Inline JSON hyperparameters")
                            .add("out", Kind::Str, "Model JSON", nullptr, true));

  add_selection_options(make("gridsearch", "Exhaustive hyperparameter search by k-fold CV MAE", 0, run_gridsearch)
                            .add("technique", Kind::Str, "lr, knr, svr, krr, rf or ann", nullptr, true)
                            .add("grid", Kind::Str, "Grid JSON (default: built-in grid)")
                            .add("folds", Kind::Int, "Cross-validation folds", 5)
                            .add("model-out", Kind::Str, "Also refit the winner and save it")
                            .add("out", Kind::Str, "Result JSON (default: stdout)"));

  make("predict", "Predict a target for every dataset row", std::nullopt, run_predict)
      .add("model", Kind::Str, "Model JSON", nullptr, true)
      .add("dataset", Kind::Str, "Dataset CSV (target columns optional)", nullptr, true)
      .add("out", Kind::Str, "Prediction CSV (default: stdout)");

  make("evaluate", "MAE and MASE of a saved model on its held-out split", std::nullopt, run_evaluate)
      .add("model", Kind::Str, "Model JSON", nullptr, true)
      .add("dataset", Kind::Str, "Dataset CSV", nullptr, true)
      .add("target", Kind::Str, "Target (default: the model's)")
      .add("test-fraction", Kind::Num, "Held-out fraction (default: the model's)")
      .add("split-seed", Kind::Int, "Split seed (default: the model's)")
      .add("out", Kind::Str, "Result JSON (default: stdout)");

  make("bench", "Time single-row predictions", 0, run_bench)
      .add("model", Kind::Str, "Model JSON to time")
      .add("dataset", Kind::Str, "Dataset CSV (trains per-target models when --model is absent)")
      .add("techniques", Kind::List, "Techniques to train and time (default: all)")
      .add("targets", Kind::List, "Targets (default: all)")
      .add("test-fraction", Kind::Num, "Held-out fraction", 0.30)
      .add("n", Kind::Int, "Repetitions", 1000)
      .add("out", Kind::Str, "Result JSON (default: stdout)");

  make("sweep", "MASE against feature count for each technique, target and group", 0, run_sweep_cmd)
      .add("dataset", Kind::Str, "Dataset CSV", nullptr, true)
      .add("techniques", Kind::List, "Techniques (default: all)")
      .add("targets", Kind::List, "Targets (default: all)")
      .add("groups", Kind::List, "Feature groups: all, ue, bs (default: all three)")
      .add("kmin", Kind::Int, "Smallest feature count", 1)
      .add("kmax", Kind::Int, "Largest feature count, clipped to the group size", 13)
      .add("test-fraction", Kind::Num, "Held-out fraction", 0.30)
      .add("bins", Kind::Int, "Quantile bins for MI estimation", static_cast<int>(kDefaultBins))
      .add("jobs", Kind::Int, "Worker threads", 1)
      .add("overrides", Kind::Json, "Per-technique hyperparameter overrides, e.g. {\"ANN\":{\"epochs\":50}}",
           ojson::object())
      .add("out", Kind::Str, "Sweep CSV", nullptr, true)
      .add("svg-dir", Kind::Str, "Directory for per-target/group SVG charts");

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& c : commands) {
      if (c->app()->parsed()) c->run();
    }
    return 0;
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    fmt::print(err, "error: malformed JSON value: {}\n", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(err, "internal error: {}\n", e.what());
    return 2;
  }
}

}  // namespace cgkqi::cli
