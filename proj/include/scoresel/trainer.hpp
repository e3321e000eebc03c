#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scoresel/dataio.hpp"
#include "scoresel/model.hpp"

namespace scoresel {

struct TrainConfig {
  double lambda1 = 1.0 / 128.0;
  std::size_t k = 10;
  std::size_t d = 0;  // 0: use k
  std::size_t epochs = 200;
  std::size_t batch_size = 128;  // 0: full batch
  double lr = 1e-3;
  ScorerMap phi = ScorerMap::kSquare;
  std::uint64_t seed = 0;
  bool shuffle = true;

  std::size_t latent() const { return d == 0 ? k : d; }
  void validate(std::size_t m) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  LossBreakdown val;
  IndexList kept_idx;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: initial params (no epochs run)
  ModelParams final_params;
  ModelParams best_params;
};

TrainReport train(const Dataset& ds, const SplitSpec& split,
                  const TrainConfig& cfg);

/// Same as train() with train row `removed` left out. The epoch permutations
/// are drawn over the full train list and the removed row is then skipped,
/// so the only perturbation is the deletion itself.
TrainReport leave_one_out_retrain(const Dataset& ds, const SplitSpec& split,
                                  const TrainConfig& cfg, std::size_t removed);

/// One JSON object per epoch, newline-terminated.
std::string report_to_jsonl(const TrainReport& report);
nlohmann::json loss_to_json(const LossBreakdown& l);
nlohmann::json config_to_json(const TrainConfig& cfg);

}  // namespace scoresel
