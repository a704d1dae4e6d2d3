#include "cgkqi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "cgkqi/error.hpp"
#include "cgkqi/rng.hpp"
#include "csv.hpp"

namespace cgkqi {
namespace {

// Documented min / max of every column in the collected data.
const std::array<ColumnMeta, 16> kSchema{{
    {"CGlatency", Source::Target, "ms", ColumnKind::Continuous, 30.59, 498.65},
    {"FreezePercent", Source::Target, "%", ColumnKind::Continuous, 0.0, 100.0},
    {"EFPS", Source::Target, "fps", ColumnKind::Continuous, 0.1, 116.17},
    {"Resolution", Source::CGServer, "-", ColumnKind::Ordinal, 0.0, 3.0},
    {"fps", Source::CGServer, "fps", ColumnKind::Ordinal, 30.0, 120.0},
    {"PING_avg", Source::UE, "ms", ColumnKind::Continuous, 1.0, 895.0},
    {"PING_Radio_Loss", Source::UE, "%", ColumnKind::Continuous, 0.0, 25.0},
    {"PING_Host_Loss", Source::UE, "%", ColumnKind::Continuous, 0.0, 25.0},
    {"RSRP", Source::UE, "dBm", ColumnKind::Continuous, -104.0, -50.0},
    {"RSRQ", Source::UE, "dB", ColumnKind::Continuous, -8.0, -3.0},
    {"RSSI", Source::UE, "dB", ColumnKind::Continuous, -95.0, -51.0},
    {"SINR", Source::UE, "dBm", ColumnKind::Continuous, 6.0, 26.0},
    {"n_rb_dl", Source::BS, "RB", ColumnKind::Ordinal, 25.0, 100.0},
    {"cqi", Source::BS, "-", ColumnKind::Continuous, 0.0, 15.0},
    {"pucch_snr", Source::BS, "dBm", ColumnKind::Continuous, -11.39, 44.14},
    {"pusch_snr", Source::BS, "dBm", ColumnKind::Continuous, -25.78, 36.65},
}};

// Predictor bounds are the rounded extremes of the collected data, so a
// small margin keeps rounding from rejecting genuine rows.
constexpr double kRangeSlack = 0.02;

std::string canonical_name(std::string_view raw) {
  std::string name(csv::trim(raw));
  if (!name.empty() && name.front() == '\xEF') {
    // UTF-8 byte order mark on the first header cell.
    if (name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
  }
  if (!name.empty() && name.back() == '%' && is_schema_column(name.substr(0, name.size() - 1))) {
    name.pop_back();
  }
  return name;
}

void check_value(const ColumnMeta& meta, double v, std::size_t row) {
  if (!std::isfinite(v)) {
    fail(ErrorKind::Validation, fmt::format("row {}: {} is not a finite number", row, meta.name));
  }
  double lo = meta.min;
  double hi = meta.max;
  if (meta.source == Source::Target) {
    // Targets are bounded physically, not by the observed extremes.
    lo = 0.0;
    hi = meta.name == "FreezePercent" ? 100.0 : std::numeric_limits<double>::infinity();
  } else if (meta.name != "Resolution") {
    const double slack = kRangeSlack * (meta.max - meta.min);
    lo -= slack;
    hi += slack;
  }
  if (v < lo || v > hi) {
    fail(ErrorKind::Validation, fmt::format("row {}: {} = {} outside [{}, {}]", row, meta.name, v,
                                            meta.min, meta.source == Source::Target ? hi : meta.max));
  }
}

}  // namespace

std::string_view to_string(Source source) {
  switch (source) {
    case Source::CGServer: return "CGServer";
    case Source::UE: return "UE";
    case Source::BS: return "BS";
    case Source::Target: return "Target";
  }
  return "?";
}

std::span<const ColumnMeta> schema() { return kSchema; }

bool is_schema_column(std::string_view name) {
  return std::any_of(kSchema.begin(), kSchema.end(), [&](const auto& m) { return m.name == name; });
}

const ColumnMeta& column_meta(std::string_view name) {
  for (const auto& m : kSchema) {
    if (m.name == name) return m;
  }
  fail(ErrorKind::Validation, fmt::format("unknown column '{}'", name));
}

std::vector<std::string> predictor_names() {
  std::vector<std::string> out;
  for (const auto& m : kSchema) {
    if (m.source != Source::Target) out.push_back(m.name);
  }
  return out;
}

std::vector<std::string> target_names() {
  std::vector<std::string> out;
  for (const auto& m : kSchema) {
    if (m.source == Source::Target) out.push_back(m.name);
  }
  return out;
}

std::optional<double> encode_resolution(std::string_view text) {
  std::string t(csv::trim(text));
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "720p" || t == "720") return 0.0;
  if (t == "1080p" || t == "1080") return 1.0;
  if (t == "1440p" || t == "1440") return 2.0;
  if (t == "4k" || t == "2160p" || t == "2160") return 3.0;
  if (const auto code = csv::parse_double(t); code && (*code == 0.0 || *code == 1.0 ||
                                                      *code == 2.0 || *code == 3.0)) {
    return *code;
  }
  return std::nullopt;
}

std::string decode_resolution(double code) {
  static constexpr std::array<const char*, 4> kLabels{"720p", "1080p", "1440p", "4K"};
  const auto i = static_cast<long>(std::lround(code));
  if (i < 0 || i > 3 || static_cast<double>(i) != code) {
    fail(ErrorKind::Validation, fmt::format("invalid resolution code {}", code));
  }
  return kLabels[static_cast<std::size_t>(i)];
}

Dataset::Dataset(std::vector<std::string> columns, Eigen::MatrixXd rows)
    : columns_(std::move(columns)), data_(std::move(rows)) {
  if (static_cast<std::size_t>(data_.cols()) != columns_.size()) {
    fail(ErrorKind::Shape, fmt::format("{} column names for a {}-column matrix", columns_.size(),
                                       data_.cols()));
  }
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::size_t Dataset::column_index(std::string_view name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) fail(ErrorKind::Validation, fmt::format("dataset has no column '{}'", name));
  return static_cast<std::size_t>(it - columns_.begin());
}

Eigen::VectorXd Dataset::column(std::string_view name) const {
  return data_.col(static_cast<Eigen::Index>(column_index(name)));
}

Eigen::MatrixXd Dataset::select(std::span<const std::string> names) const {
  Eigen::MatrixXd out(data_.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = data_.col(static_cast<Eigen::Index>(column_index(names[c])));
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(row_indices.size()), data_.cols());
  for (std::size_t r = 0; r < row_indices.size(); ++r) {
    if (row_indices[r] >= rows()) fail(ErrorKind::Usage, "row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = data_.row(static_cast<Eigen::Index>(row_indices[r]));
  }
  return Dataset(columns_, std::move(out));
}

void Dataset::validate() const {
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const ColumnMeta& meta = column_meta(columns_[c]);
    for (Eigen::Index r = 0; r < data_.rows(); ++r) {
      const double v = data_(r, static_cast<Eigen::Index>(c));
      if (meta.name == "Resolution" && !(v == 0.0 || v == 1.0 || v == 2.0 || v == 3.0)) {
        fail(ErrorKind::Validation, fmt::format("row {}: invalid Resolution code {}", r + 1, v));
      }
      check_value(meta, v, static_cast<std::size_t>(r) + 1);
    }
  }
}

Dataset parse_dataset(std::istream& in, LoadOptions opts) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Validation, "dataset is empty");
  const auto header = csv::split_line(line);

  // file column -> schema slot
  std::vector<std::size_t> slot(header.size());
  std::vector<bool> seen(kSchema.size(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = canonical_name(header[c]);
    const auto it = std::find_if(kSchema.begin(), kSchema.end(),
                                 [&](const auto& m) { return m.name == name; });
    if (it == kSchema.end()) fail(ErrorKind::Validation, fmt::format("unknown column '{}'", header[c]));
    const auto s = static_cast<std::size_t>(it - kSchema.begin());
    if (seen[s]) fail(ErrorKind::Validation, fmt::format("duplicate column '{}'", name));
    seen[s] = true;
    slot[c] = s;
  }
  std::vector<std::string> columns;
  std::vector<std::size_t> out_pos(kSchema.size(), 0);
  for (std::size_t s = 0; s < kSchema.size(); ++s) {
    const bool required = kSchema[s].source != Source::Target || opts.require_targets;
    if (!seen[s]) {
      if (required) fail(ErrorKind::Validation, fmt::format("missing column '{}'", kSchema[s].name));
      continue;
    }
    out_pos[s] = columns.size();
    columns.push_back(kSchema[s].name);
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (csv::is_blank(line)) continue;
    ++row_no;
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::Validation,
           fmt::format("row {}: {} fields, header has {}", row_no, cells.size(), header.size()));
    }
    std::vector<double> row(columns.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const ColumnMeta& meta = kSchema[slot[c]];
      std::optional<double> v = meta.name == "Resolution" ? encode_resolution(cells[c])
                                                          : csv::parse_double(cells[c]);
      if (!v) {
        fail(ErrorKind::Validation,
             fmt::format("row {}: {} = '{}' is not a valid value", row_no, meta.name, cells[c]));
      }
      check_value(meta, *v, row_no);
      row[out_pos[slot[c]]] = *v;
    }
    rows.push_back(std::move(row));
  }

  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return Dataset(std::move(columns), std::move(data));
}

Dataset load_dataset(const std::filesystem::path& path, LoadOptions opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot read {}", path.string()));
  try {
    return parse_dataset(in, opts);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  for (std::size_t c = 0; c < ds.cols(); ++c) out << (c ? "," : "") << ds.columns()[c];
  out << '\n';
  const auto res = ds.has_column("Resolution") ? ds.column_index("Resolution") : ds.cols();
  for (Eigen::Index r = 0; r < ds.data().rows(); ++r) {
    for (std::size_t c = 0; c < ds.cols(); ++c) {
      const double v = ds.data()(r, static_cast<Eigen::Index>(c));
      out << (c ? "," : "") << (c == res ? decode_resolution(v) : fmt::format("{}", v));
    }
    out << '\n';
  }
}

void to_json(nlohmann::json& j, const ScalerParams& p) {
  j = nlohmann::json{{"columns", p.columns}, {"x_min", p.x_min}, {"x_max", p.x_max}};
}

void from_json(const nlohmann::json& j, ScalerParams& p) {
  j.at("columns").get_to(p.columns);
  j.at("x_min").get_to(p.x_min);
  j.at("x_max").get_to(p.x_max);
  if (p.x_min.size() != p.x_max.size() ||
      (!p.columns.empty() && p.columns.size() != p.x_min.size())) {
    fail(ErrorKind::Validation, "scaler parameter lengths disagree");
  }
  for (std::size_t c = 0; c < p.x_min.size(); ++c) {
    if (p.x_max[c] < p.x_min[c]) fail(ErrorKind::Validation, "scaler x_max below x_min");
  }
}

ScalerParams fit_scaler(const Eigen::MatrixXd& train, std::vector<std::string> columns) {
  if (train.rows() == 0) fail(ErrorKind::Usage, "cannot fit a scaler on zero rows");
  if (!columns.empty() && columns.size() != static_cast<std::size_t>(train.cols())) {
    fail(ErrorKind::Shape, "scaler column names do not match matrix width");
  }
  ScalerParams p;
  p.columns = std::move(columns);
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    p.x_min.push_back(train.col(c).minCoeff());
    p.x_max.push_back(train.col(c).maxCoeff());
  }
  return p;
}

MinMaxScaler::MinMaxScaler(ScalerParams params) : params_(std::move(params)) {}

void MinMaxScaler::fit(const Eigen::MatrixXd& rows, std::vector<std::string> columns) {
  params_ = fit_scaler(rows, std::move(columns));
}

const ScalerParams& MinMaxScaler::params() const {
  if (!params_) fail(ErrorKind::Usage, "scaler used before fit");
  return *params_;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& rows) const {
  const ScalerParams& p = params();
  if (static_cast<std::size_t>(rows.cols()) != p.x_min.size()) {
    fail(ErrorKind::Shape, fmt::format("scaler fitted on {} columns, got {}", p.x_min.size(), rows.cols()));
  }
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    if (p.is_constant(i)) {
      out.col(c).setZero();
    } else {
      out.col(c) = (rows.col(c).array() - p.x_min[i]) / (p.x_max[i] - p.x_min[i]);
    }
  }
  return out;
}

Eigen::MatrixXd MinMaxScaler::inverse(const Eigen::MatrixXd& rows) const {
  const ScalerParams& p = params();
  if (static_cast<std::size_t>(rows.cols()) != p.x_min.size()) {
    fail(ErrorKind::Shape, fmt::format("scaler fitted on {} columns, got {}", p.x_min.size(), rows.cols()));
  }
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    out.col(c) = rows.col(c).array() * (p.x_max[i] - p.x_min[i]) + p.x_min[i];
  }
  return out;
}

Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorKind::Usage, fmt::format("test fraction {} outside (0, 1)", test_fraction));
  }
  if (n < 2) fail(ErrorKind::Validation, fmt::format("cannot split {} rows", n));
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

DatasetSplit split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  const Split s = split_indices(ds.rows(), test_fraction, seed);
  return {ds.subset(s.train), ds.subset(s.test)};
}

}  // namespace cgkqi
