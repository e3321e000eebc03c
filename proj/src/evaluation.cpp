#include "scoresel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scoresel/error.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

SelectionResult select_features(const ModelParams& params, std::size_t k,
                                 std::string source) {
  const Vector s = score_vector(params);
  SelectionResult out;
  out.kept_idx = topk_mask(s, k).kept_idx;
  for (std::size_t j : out.kept_idx)
    out.scores.push_back(s[static_cast<Eigen::Index>(j)]);
  out.source = std::move(source);
  return out;
}

Matrix OlsModel::predict(const Matrix& x) const {
  Matrix xs(x.rows(), static_cast<Eigen::Index>(selected.size()));
  for (std::size_t i = 0; i < selected.size(); ++i)
    xs.col(static_cast<Eigen::Index>(i)) =
        x.col(static_cast<Eigen::Index>(selected[i]));
  Matrix out = xs * b;
  out.rowwise() += intercept.transpose();
  return out;
}

OlsModel ols_fit(const Dataset& ds, const SplitSpec& split,
                 const IndexList& selected, double ridge_eps) {
  if (selected.empty()) throw Error("ols_fit: k must be at least 1");
  if (split.train_idx.empty()) throw Error("ols_fit: empty train split");
  if (!(ridge_eps >= 0.0)) throw Error("ols_fit: ridge_eps must be >= 0");
  for (std::size_t j : selected)
    if (j >= ds.features()) throw Error("ols_fit: selected index out of range");

  const Matrix y = rows_of(ds.x, split.train_idx);
  const Eigen::Index k = static_cast<Eigen::Index>(selected.size());
  Matrix xs(y.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i)
    xs.col(i) = y.col(static_cast<Eigen::Index>(selected[static_cast<std::size_t>(i)]));

  const Vector y_mean = y.colwise().mean().transpose();
  const Vector x_mean = xs.colwise().mean().transpose();
  const Matrix yc = y.rowwise() - y_mean.transpose();
  const Matrix xc = xs.rowwise() - x_mean.transpose();

  Matrix gram = xc.transpose() * xc;
  const Matrix rhs = xc.transpose() * yc;
  OlsModel model;
  model.selected = selected;
  model.ridge_eps = ridge_eps;
  if (ridge_eps == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(gram);
    if (qr.rank() < k)
      throw Error("ols_fit: selected columns are linearly dependent; use ridge_eps > 0");
    model.b = qr.solve(rhs);
  } else {
    gram.diagonal().array() += ridge_eps;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw Error("ols_fit: factorization failed");
    model.b = ldlt.solve(rhs);
  }
  model.intercept = y_mean - model.b.transpose() * x_mean;
  if (!model.b.allFinite() || !model.intercept.allFinite())
    throw Error("ols_fit: non-finite coefficients");
  return model;
}

double ols_error(const OlsModel& model, const Dataset& ds,
                 const SplitSpec& split, SplitPart which) {
  const IndexList& idx = part(split, which);
  if (idx.empty()) throw Error("ols_error: empty split");
  const Matrix y = rows_of(ds.x, idx);
  return (model.predict(y) - y).squaredNorm() /
         static_cast<double>(y.rows() * y.cols());
}

// ---------------------------------------------------------------------------
// Extremely randomized trees

int DecisionTree::predict(const double* row, Eigen::Index stride) const {
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = row[node.feature * stride] < node.threshold ? node.left : node.right;
  }
  const auto& h = nodes[static_cast<std::size_t>(at)].histogram;
  return static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
}

namespace {

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) sum_sq += static_cast<double>(c) * c;
  return 1.0 - sum_sq / (static_cast<double>(total) * total);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int num_classes,
              std::size_t k_candidates, std::size_t min_split, Rng& rng)
      : x_(x), y_(y), classes_(num_classes), k_candidates_(k_candidates),
        min_split_(min_split), rng_(rng) {}

  DecisionTree build() {
    std::vector<std::size_t> rows(static_cast<std::size_t>(x_.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows);
    return std::move(tree_);
  }

 private:
  int make_leaf(const std::vector<std::size_t>& rows) {
    TreeNode leaf;
    leaf.histogram.assign(static_cast<std::size_t>(classes_), 0);
    for (std::size_t r : rows) ++leaf.histogram[static_cast<std::size_t>(y_[r])];
    tree_.nodes.push_back(std::move(leaf));
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  int grow(std::vector<std::size_t>& rows) {
    const bool pure = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) {
      return y_[r] == y_[rows.front()];
    });
    if (pure || rows.size() < min_split_) return make_leaf(rows);

    // Columns that are not constant within this node.
    std::vector<Eigen::Index> usable;
    std::vector<std::pair<double, double>> range(static_cast<std::size_t>(x_.cols()));
    for (Eigen::Index c = 0; c < x_.cols(); ++c) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t r : rows) {
        const double v = x_(static_cast<Eigen::Index>(r), c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      range[static_cast<std::size_t>(c)] = {lo, hi};
      if (hi > lo) usable.push_back(c);
    }
    if (usable.empty()) return make_leaf(rows);
    rng_.shuffle(usable);
    usable.resize(std::min(usable.size(), k_candidates_));

    std::vector<int> parent(static_cast<std::size_t>(classes_), 0);
    for (std::size_t r : rows) ++parent[static_cast<std::size_t>(y_[r])];
    const int n = static_cast<int>(rows.size());
    const double parent_gini = gini(parent, n);

    double best_gain = -std::numeric_limits<double>::infinity();
    Eigen::Index best_col = -1;
    double best_cut = 0.0;
    std::vector<int> left(static_cast<std::size_t>(classes_));
    std::vector<int> right(static_cast<std::size_t>(classes_));
    for (Eigen::Index c : usable) {
      const auto [lo, hi] = range[static_cast<std::size_t>(c)];
      double cut = rng_.uniform(lo, hi);
      if (!(cut > lo)) cut = std::nextafter(lo, hi);
      std::fill(left.begin(), left.end(), 0);
      int n_left = 0;
      for (std::size_t r : rows) {
        if (x_(static_cast<Eigen::Index>(r), c) < cut) {
          ++left[static_cast<std::size_t>(y_[r])];
          ++n_left;
        }
      }
      for (std::size_t i = 0; i < right.size(); ++i) right[i] = parent[i] - left[i];
      const int n_right = n - n_left;
      const double gain = parent_gini -
                          (n_left * gini(left, n_left) + n_right * gini(right, n_right)) / n;
      if (gain > best_gain) {
        best_gain = gain;
        best_col = c;
        best_cut = cut;
      }
    }

    std::vector<std::size_t> lrows;
    std::vector<std::size_t> rrows;
    for (std::size_t r : rows)
      (x_(static_cast<Eigen::Index>(r), best_col) < best_cut ? lrows : rrows).push_back(r);
    if (lrows.empty() || rrows.empty()) return make_leaf(rows);

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{static_cast<int>(best_col), best_cut, -1, -1, {}});
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(lrows);
    const int r = grow(rrows);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  int classes_;
  std::size_t k_candidates_;
  std::size_t min_split_;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace

ExtraTreesModel extratrees_fit(const Matrix& x_sel,
                               const std::vector<int>& labels,
                               std::uint64_t seed,
                               const ExtraTreesOptions& opts) {
  if (static_cast<std::size_t>(x_sel.rows()) != labels.size())
    throw Error("extratrees_fit: label count does not match rows");
  if (labels.empty()) throw Error("extratrees_fit: no training rows");
  if (x_sel.cols() == 0) throw Error("extratrees_fit: no feature columns");
  if (opts.n_trees == 0) throw Error("extratrees_fit: n_trees must be >= 1");
  for (int y : labels)
    if (y < 0) throw Error("extratrees_fit: negative class label");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  const bool single = std::all_of(labels.begin(), labels.end(),
                                  [&](int y) { return y == labels.front(); });
  if (single) throw Error("extratrees_fit: training labels contain a single class");

  ExtraTreesModel model;
  model.n_trees = opts.n_trees;
  model.k_candidates =
      opts.k_candidates
          ? opts.k_candidates
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x_sel.cols()))));
  model.min_split = std::max<std::size_t>(opts.min_split, 2);
  model.seed = seed;
  model.num_classes = classes;
  model.trees.reserve(opts.n_trees);
  for (std::size_t t = 0; t < opts.n_trees; ++t) {
    Rng rng(derive_seed(seed, t));
    TreeBuilder builder(x_sel, labels, classes, model.k_candidates,
                        model.min_split, rng);
    model.trees.push_back(builder.build());
  }
  return model;
}

std::vector<int> ExtraTreesModel::predict(const Matrix& x_sel) const {
  std::vector<int> out(static_cast<std::size_t>(x_sel.rows()));
  std::vector<int> votes(static_cast<std::size_t>(num_classes));
  for (Eigen::Index r = 0; r < x_sel.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : trees)
      ++votes[static_cast<std::size_t>(tree.predict(&x_sel(r, 0), x_sel.outerStride()))];
    out[static_cast<std::size_t>(r)] =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

double extratrees_accuracy(const ExtraTreesModel& model, const Matrix& x_sel,
                           const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x_sel.rows()) != labels.size())
    throw Error("extratrees_accuracy: label count does not match rows");
  if (labels.empty()) return 0.0;
  const auto pred = model.predict(x_sel);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

SubsetSearchResult brute_force_best_subset(const Dataset& ds,
                                           const SplitSpec& split,
                                           std::size_t k, double ridge_eps) {
  const std::size_t m = ds.features();
  if (k < 1 || k > m) throw Error("brute_force_best_subset: k out of range");
  const double count = binomial(m, k);
  if (count > kMaxSubsets)
    throw Error("brute_force_best_subset: C(" + std::to_string(m) + ", " +
                std::to_string(k) + ") exceeds the 1e6 subset guard");

  SubsetSearchResult best;
  best.best_err = std::numeric_limits<double>::infinity();
  // Lexicographic enumeration of k-combinations.
  IndexList subset(k);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  for (;;) {
    const OlsModel model = ols_fit(ds, split, subset, ridge_eps);
    const double err = ols_error(model, ds, split, SplitPart::kTest);
    ++best.evaluated;
    if (err < best.best_err) {
      best.best_err = err;
      best.best_idx = subset;
    }
    std::size_t i = k;
    while (i > 0 && subset[i - 1] == m - k + (i - 1)) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
  }
  return best;
}

std::vector<int> labels_of(const Dataset& ds, const IndexList& idx) {
  if (!ds.labels) throw Error("dataset has no labels");
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t r : idx) out.push_back((*ds.labels)[r]);
  return out;
}

}  // namespace scoresel
