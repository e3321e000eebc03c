#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scoresel/dataio.hpp"
#include "scoresel/model.hpp"

namespace scoresel {

struct SelectionResult {
  IndexList kept_idx;  // ascending
  std::vector<double> scores;
  std::string source;
};

SelectionResult select_features(const ModelParams& params, std::size_t k,
                                 std::string source = {});

/// Linear map from the selected columns (plus intercept) to all columns.
struct OlsModel {
  IndexList selected;
  Matrix b;          // k x m
  Vector intercept;  // m
  double ridge_eps = 1e-8;

  Matrix predict(const Matrix& x) const;
};

/// Fit on the train rows by centered normal equations with ridge_eps * I.
/// ridge_eps = 0 requires a full-rank selection.
OlsModel ols_fit(const Dataset& ds, const SplitSpec& split,
                 const IndexList& selected, double ridge_eps = 1e-8);
inline OlsModel ols_fit(const Dataset& ds, const SplitSpec& split,
                        const SelectionResult& sel, double ridge_eps = 1e-8) {
  return ols_fit(ds, split, sel.kept_idx, ridge_eps);
}

/// Mean over rows and columns of the squared residual on one split.
double ols_error(const OlsModel& model, const Dataset& ds,
                 const SplitSpec& split, SplitPart which);

struct TreeNode {
  int feature = -1;  // column within the selected matrix; -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> histogram;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int predict(const double* row, Eigen::Index stride) const;
};

struct ExtraTreesModel {
  std::vector<DecisionTree> trees;
  std::size_t n_trees = 50;
  std::size_t k_candidates = 0;
  std::size_t min_split = 2;
  std::uint64_t seed = 0;
  int num_classes = 0;

  std::vector<int> predict(const Matrix& x_sel) const;
};

struct ExtraTreesOptions {
  std::size_t n_trees = 50;
  std::size_t k_candidates = 0;  // 0: ceil(sqrt(#columns))
  std::size_t min_split = 2;
};

/// Extremely randomized trees: at each node draw k_candidates distinct
/// non-constant columns, one uniform cut per column inside the node's range,
/// keep the cut with the largest Gini decrease. No bootstrap; grow until the
/// node is pure, constant, or smaller than min_split.
ExtraTreesModel extratrees_fit(const Matrix& x_sel,
                               const std::vector<int>& labels,
                               std::uint64_t seed,
                               const ExtraTreesOptions& opts = {});

double extratrees_accuracy(const ExtraTreesModel& model, const Matrix& x_sel,
                           const std::vector<int>& labels);

struct SubsetSearchResult {
  IndexList best_idx;
  double best_err = 0.0;
  std::size_t evaluated = 0;
};

inline constexpr double kMaxSubsets = 1e6;

/// Exhaustive minimization of the train-fit / test-evaluated OLS
/// reconstruction error over all k-subsets.
SubsetSearchResult brute_force_best_subset(const Dataset& ds,
                                           const SplitSpec& split,
                                           std::size_t k,
                                           double ridge_eps = 1e-8);

double binomial(std::size_t n, std::size_t k);

std::vector<int> labels_of(const Dataset& ds, const IndexList& idx);

}  // namespace scoresel
