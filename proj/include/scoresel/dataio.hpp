#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace scoresel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<std::size_t>;

struct FeatureScaling {
  double mean = 0.0;
  double scale = 1.0;
};

/// Sample matrix (rows are samples) with optional labels and the
/// standardization that produced it, if any.
struct Dataset {
  Matrix x;
  std::vector<std::string> feature_names;
  std::optional<std::vector<int>> labels;
  std::vector<FeatureScaling> standardization;  // empty when raw

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(x.cols()); }
  bool standardized() const { return !standardization.empty(); }
  int num_classes() const;
};

struct SplitSpec {
  std::array<double, 3> ratios{0.72, 0.08, 0.20};
  std::uint64_t seed = 0;
  IndexList train_idx;
  IndexList val_idx;
  IndexList test_idx;
};

enum class SplitPart { kTrain, kVal, kTest };

const IndexList& part(const SplitSpec& split, SplitPart which);
SplitPart parse_split_part(const std::string& name);

/// Parse a comma-separated numeric table. When `label_column` names a header
/// column (or a zero-based column number when there is no header), that
/// column is parsed as integer class ids and removed from `x`. Class ids are
/// remapped to 0..C-1 in order of their sorted original values.
Dataset load_csv(const std::string& path, bool has_header,
                 const std::optional<std::string>& label_column = std::nullopt);

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& label_name = "label");

SplitSpec split(const Dataset& ds, const std::array<double, 3>& ratios,
                std::uint64_t seed);

/// Fit per-feature mean/scale on the train rows and apply to every row.
/// Constant columns are only centered.
Dataset standardize(const Dataset& ds, const SplitSpec& split);

/// Apply recorded scaling to raw rows (same layout as the fitted dataset).
Matrix apply_standardization(const Matrix& raw,
                             const std::vector<FeatureScaling>& scaling);

/// Seeded size-n subset of the train rows. For a fixed seed the result for a
/// smaller n is always a prefix-subset of the result for a larger n.
SplitSpec subsample(const Dataset& ds, const SplitSpec& split, std::size_t n,
                    std::uint64_t seed);

/// Gather rows into a dense matrix.
Matrix rows_of(const Matrix& x, const IndexList& idx);

nlohmann::json split_to_json(const SplitSpec& split);
SplitSpec split_from_json(const nlohmann::json& j);

}  // namespace scoresel
