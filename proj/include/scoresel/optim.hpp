#pragma once

#include <cstdint>

#include "scoresel/model.hpp"

namespace scoresel {

/// Scorer weights ~ U[0.999999, 0.9999999] (endpoints taken as min/max),
/// encoder/decoder entries ~ N(0, 2 / (m + d)).
ModelParams init_params(std::size_t m, std::size_t d, ScorerMap phi,
                        std::uint64_t seed);

inline constexpr double kScorerInitLow = 0.999999;
inline constexpr double kScorerInitHigh = 0.9999999;

struct AdamState {
  ParamGrads m1;
  ParamGrads m2;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ModelParams& params, double lr = 1e-3);
};

struct AdamResult {
  AdamState state;
  ModelParams params;
};

/// One bias-corrected Adam update over (w_m, w_e, w_d). Throws on any
/// non-finite gradient entry.
AdamResult adam_step(const AdamState& state, const ModelParams& params,
                     const ParamGrads& grads);

/// In-place variant used by the training loop; same arithmetic as adam_step.
void adam_update(AdamState& state, ModelParams& params,
                 const ParamGrads& grads);

}  // namespace scoresel
