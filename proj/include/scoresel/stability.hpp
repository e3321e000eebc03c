#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scoresel/dataio.hpp"
#include "scoresel/trainer.hpp"

namespace scoresel {

enum class SweepKind { kN, kLambda1, kK, kBeta, kOverlap };

std::string to_string(SweepKind kind);

struct SweepPoint {
  double swept_value = 0.0;
  double error_diff = 0.0;  // test_error - train selector loss
  double test_error = 0.0;
  std::map<std::string, double> aux;
};

struct StabilityReport {
  SweepKind kind = SweepKind::kN;
  std::vector<SweepPoint> sweep;
  TrainConfig config;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, double> summary;  // report-level statistics
  std::vector<IndexList> selections;      // kept_idx per point
};

struct SweepOptions {
  std::size_t jobs = 1;  // worker threads for independent runs
};

/// Selector-branch generalization gap of trained params on a split.
struct GapMeasure {
  double train_error = 0.0;
  double test_error = 0.0;
  double error_diff = 0.0;
};
GapMeasure measure_gap(const ModelParams& params, const Dataset& ds,
                       const SplitSpec& split, std::size_t k);

/// Nested train subsamples of increasing size; one training run per size.
StabilityReport sweep_n(const Dataset& ds, const SplitSpec& split,
                        const TrainConfig& cfg,
                        const std::vector<std::size_t>& n_values,
                        std::uint64_t seed, const SweepOptions& opts = {});

std::vector<double> default_lambda_grid();

StabilityReport sweep_lambda1(const Dataset& ds, const SplitSpec& split,
                              const TrainConfig& cfg,
                              const std::vector<double>& lambda_values,
                              std::uint64_t seed,
                              const SweepOptions& opts = {});

/// Latent size follows k at every point unless cfg.d is set explicitly.
/// aux: norm_we_wd = ||W_E W_D||_F, norm_w0_we_wd = ||W0 W_E W_D||_F.
StabilityReport sweep_k(const Dataset& ds, const SplitSpec& split,
                        const TrainConfig& cfg,
                        const std::vector<std::size_t>& k_values,
                        std::uint64_t seed, const SweepOptions& opts = {});

/// beta(n) = max over deleted rows j and test rows x of
/// |loss_selec(full, x) - loss_selec(without j, x)|; mean kept in aux.
StabilityReport estimate_beta(const Dataset& ds, const SplitSpec& split,
                              const TrainConfig& cfg,
                              const std::vector<std::size_t>& n_values,
                              std::size_t deletions_per_n, std::uint64_t seed,
                              const SweepOptions& opts = {});

struct OverlapOptions {
  std::array<double, 3> ratios{0.72, 0.08, 0.20};
  bool standardize_data = true;
  bool reseed_model = true;  // false: every run starts from cfg.seed
};

/// Re-split with each seed, train, select; pairwise Jaccard of the selected
/// sets and per-feature selection frequency go to `summary`. With
/// reseed_model the seed also drives initialization and shuffling.
StabilityReport selection_overlap(const Dataset& raw, const TrainConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds,
                                  const OverlapOptions& overlap = {},
                                  const SweepOptions& opts = {});

double jaccard(const IndexList& a, const IndexList& b);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// ||W_E W_D||_F and ||W0 W_E W_D||_F, W0 keeping rows of the selection.
std::pair<double, double> product_norms(const ModelParams& params,
                                        const IndexList& kept);

std::string report_to_csv(const StabilityReport& report);
nlohmann::json report_to_json(const StabilityReport& report);

}  // namespace scoresel
