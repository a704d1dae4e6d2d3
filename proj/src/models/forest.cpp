#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgkqi/error.hpp"
#include "cgkqi/models/estimators.hpp"
#include "cgkqi/rng.hpp"

namespace cgkqi {
namespace {

// Order-statistic tree over value ranks: counts and sums, supporting the
// k-th smallest lookup needed for running medians.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : cnt_(n + 1, 0), sum_(n + 1, 0.0) {
    while ((std::size_t{1} << log_) <= n) ++log_;
  }

  void reset() {
    std::fill(cnt_.begin(), cnt_.end(), 0);
    std::fill(sum_.begin(), sum_.end(), 0.0);
  }

  void add(std::size_t rank, double value) {
    for (std::size_t i = rank + 1; i < cnt_.size(); i += i & (~i + 1)) {
      ++cnt_[i];
      sum_[i] += value;
    }
  }

  /// Position (0-based rank) of the k-th smallest inserted element, k >= 1,
  /// plus the count and sum of all elements at or below it.
  std::size_t kth(std::size_t k, std::size_t& count, double& sum) const {
    std::size_t pos = 0;
    count = 0;
    sum = 0.0;
    for (int b = log_; b >= 0; --b) {
      const std::size_t next = pos + (std::size_t{1} << b);
      if (next < cnt_.size() && count + cnt_[next] < k) {
        pos = next;
        count += cnt_[next];
        sum += sum_[next];
      }
    }
    // pos is the last 1-based index with prefix count < k; element pos sits at rank pos.
    std::size_t c = 0;
    double s = 0.0;
    prefix(pos + 1, c, s);
    count = c;
    sum = s;
    return pos;
  }

 private:
  void prefix(std::size_t i, std::size_t& count, double& sum) const {
    count = 0;
    sum = 0.0;
    for (; i > 0; i -= i & (~i + 1)) {
      count += cnt_[i];
      sum += sum_[i];
    }
  }

  std::vector<std::size_t> cnt_;
  std::vector<double> sum_;
  int log_ = 0;
};

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
  return 0.5 * (lo + hi);
}

class TreeBuilder {
 public:
  TreeBuilder(const ForestParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              std::uint64_t seed)
      : params_(params), X_(X), y_(y), rng_(seed), fenwick_(0) {
    const auto p = static_cast<std::size_t>(X.cols());
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    try_features_ = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(params.max_features * static_cast<double>(p))), 1, p);
  }

  RegressionTree build(std::vector<std::size_t> sample) {
    idx_ = std::move(sample);
    if (params_.criterion == Criterion::MAE) fenwick_ = Fenwick(idx_.size());
    RegressionTree tree;
    grow(tree, 0, idx_.size(), 0);
    return tree;
  }

 private:
  struct Best {
    double cost = INFINITY;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  double leaf_value(std::size_t begin, std::size_t end) {
    if (params_.criterion == Criterion::MAE) {
      scratch_.clear();
      for (std::size_t i = begin; i < end; ++i) scratch_.push_back(y_(static_cast<Eigen::Index>(idx_[i])));
      return median_of(scratch_);
    }
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += y_(static_cast<Eigen::Index>(idx_[i]));
    return s / static_cast<double>(end - begin);
  }

  int grow(RegressionTree& tree, std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes[static_cast<std::size_t>(id)].value = leaf_value(begin, end);

    const std::size_t n = end - begin;
    const bool depth_ok = params_.max_depth <= 0 || depth < params_.max_depth;
    if (!depth_ok || n < static_cast<std::size_t>(std::max(2, params_.min_samples_split)) || pure(begin, end)) {
      return id;
    }
    const Best best = find_split(begin, end);
    if (!std::isfinite(best.cost)) return id;

    const auto f = static_cast<Eigen::Index>(best.feature);
    const auto mid = std::partition(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    idx_.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t i) { return X_(static_cast<Eigen::Index>(i), f) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - idx_.begin());
    const int left = grow(tree, begin, split_at, depth + 1);
    const int right = grow(tree, split_at, end, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  bool pure(std::size_t begin, std::size_t end) const {
    const double first = y_(static_cast<Eigen::Index>(idx_[begin]));
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (y_(static_cast<Eigen::Index>(idx_[i])) != first) return false;
    }
    return true;
  }

  Best find_split(std::size_t begin, std::size_t end) {
    if (try_features_ < features_.size()) rng_.shuffle(std::span<std::size_t>(features_));
    std::vector<std::size_t> candidates(features_.begin(),
                                        features_.begin() + static_cast<std::ptrdiff_t>(try_features_));
    std::sort(candidates.begin(), candidates.end());

    const std::size_t n = end - begin;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    order_.assign(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                  idx_.begin() + static_cast<std::ptrdiff_t>(end));
    if (params_.criterion == Criterion::MAE) prepare_ranks();

    Best best;
    for (const std::size_t f : candidates) {
      const auto fi = static_cast<Eigen::Index>(f);
      std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return X_(static_cast<Eigen::Index>(a), fi) < X_(static_cast<Eigen::Index>(b), fi);
      });
      left_cost_.assign(n, 0.0);
      right_cost_.assign(n, 0.0);
      if (params_.criterion == Criterion::MSE) {
        mse_costs();
      } else {
        mae_costs();
      }
      for (std::size_t i = min_leaf; i + min_leaf <= n; ++i) {
        // Split between positions i-1 and i.
        const double lo = X_(static_cast<Eigen::Index>(order_[i - 1]), fi);
        const double hi = X_(static_cast<Eigen::Index>(order_[i]), fi);
        if (!(lo < hi)) continue;
        const double cost = left_cost_[i - 1] + right_cost_[i];
        if (cost < best.cost) {
          best.cost = cost;
          best.feature = f;
          double t = 0.5 * (lo + hi);
          if (!(t < hi)) t = lo;  // midpoint rounded up to hi
          best.threshold = t;
        }
      }
    }
    return best;
  }

  // left_cost_[i]: cost of order_[0..i]; right_cost_[i]: cost of order_[i..n).
  void mse_costs() {
    const std::size_t n = order_.size();
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = y_(static_cast<Eigen::Index>(order_[i]));
      s += v;
      s2 += v * v;
      left_cost_[i] = std::max(0.0, s2 - s * s / static_cast<double>(i + 1));
    }
    s = 0.0;
    s2 = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      const double v = y_(static_cast<Eigen::Index>(order_[i]));
      s += v;
      s2 += v * v;
      right_cost_[i] = std::max(0.0, s2 - s * s / static_cast<double>(n - i));
    }
  }

  void prepare_ranks() {
    const std::size_t n = order_.size();
    std::vector<std::size_t> by_y(order_);
    std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) {
      const double ya = y_(static_cast<Eigen::Index>(a));
      const double yb = y_(static_cast<Eigen::Index>(b));
      return ya < yb || (ya == yb && a < b);
    });
    sorted_y_.resize(n);
    rank_of_.resize(static_cast<std::size_t>(X_.rows()));
    for (std::size_t r = 0; r < n; ++r) {
      sorted_y_[r] = y_(static_cast<Eigen::Index>(by_y[r]));
      rank_of_[by_y[r]] = r;
    }
    fenwick_ = Fenwick(n);
  }

  // Sum of absolute deviations from the median of everything inserted.
  double running_sad(std::size_t count, double total) const {
    std::size_t le = 0;
    double sum_le = 0.0;
    const std::size_t pos = fenwick_.kth((count + 1) / 2, le, sum_le);
    const double med = sorted_y_[pos];
    return (med * static_cast<double>(le) - sum_le) +
           ((total - sum_le) - med * static_cast<double>(count - le));
  }

  void mae_costs() {
    const std::size_t n = order_.size();
    fenwick_.reset();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = y_(static_cast<Eigen::Index>(order_[i]));
      fenwick_.add(rank_of_[order_[i]], v);
      total += v;
      left_cost_[i] = std::max(0.0, running_sad(i + 1, total));
    }
    fenwick_.reset();
    total = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      const double v = y_(static_cast<Eigen::Index>(order_[i]));
      fenwick_.add(rank_of_[order_[i]], v);
      total += v;
      right_cost_[i] = std::max(0.0, running_sad(n - i, total));
    }
  }

  const ForestParams& params_;
  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  Rng rng_;
  Fenwick fenwick_;
  std::vector<std::size_t> features_;
  std::size_t try_features_ = 1;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> order_;
  std::vector<double> left_cost_;
  std::vector<double> right_cost_;
  std::vector<double> sorted_y_;
  std::vector<double> scratch_;
  // Row id -> rank of its y. Bootstrap copies of a row share one rank; they
  // carry the same value, so the order statistics are unchanged.
  std::vector<std::size_t> rank_of_;
};

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

RegressionTree fit_tree(const ForestParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        std::span<const std::size_t> sample, std::uint64_t seed) {
  if (sample.empty()) fail(ErrorKind::Shape, "tree needs at least one sample");
  TreeBuilder builder(params, X, y, seed);
  return builder.build(std::vector<std::size_t>(sample.begin(), sample.end()));
}

ForestModel ForestModel::fit(const ForestParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             std::uint64_t seed) {
  if (params.n_estimators < 1) fail(ErrorKind::Config, "n_estimators must be at least 1");
  if (X.rows() == 0) fail(ErrorKind::Shape, "forest needs at least one sample");
  const auto n = static_cast<std::size_t>(X.rows());
  ForestModel m;
  m.params = params;
  Rng rng(seed);
  std::vector<std::size_t> sample(n);
  for (int t = 0; t < params.n_estimators; ++t) {
    for (auto& s : sample) s = static_cast<std::size_t>(rng.index(n));
    m.trees.push_back(fit_tree(params, X, y, sample, rng.next()));
  }
  return m;
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& Q) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Q.rows());
  for (Eigen::Index r = 0; r < Q.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(Q.row(r));
    out(r) = s / static_cast<double>(trees.size());
  }
  return out;
}

}  // namespace cgkqi
