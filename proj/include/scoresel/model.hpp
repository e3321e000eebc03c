#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoresel/dataio.hpp"

namespace scoresel {

/// Elementwise map turning raw scorer weights into non-negative scores.
enum class ScorerMap { kAbs, kSquare };

std::string to_string(ScorerMap phi);
ScorerMap parse_scorer_map(const std::string& name);

/// Linear autoencoder with a diagonal feature-scoring input layer.
///
/// Input row x is scaled columnwise by the score vector s = phi(w_m) (or by
/// the top-k masked scores on the selector branch), encoded by w_e (m x d)
/// and decoded by w_d (d x m). The diagonal layer is only ever stored as a
/// vector.
struct ModelParams {
  Vector w_m;
  Matrix w_e;
  Matrix w_d;
  ScorerMap phi = ScorerMap::kSquare;

  std::size_t features() const { return static_cast<std::size_t>(w_m.size()); }
  std::size_t latent() const { return static_cast<std::size_t>(w_e.cols()); }
  bool all_finite() const;
};

/// Gradient (or any other quantity) shaped like ModelParams.
struct ParamGrads {
  Vector w_m;
  Matrix w_e;
  Matrix w_d;

  static ParamGrads zeros_like(const ModelParams& p);
  bool all_finite() const;
};

struct TopKMask {
  std::size_t k = 0;
  IndexList kept_idx;      // ascending
  std::vector<char> mask;  // 1 = kept
};

struct LossBreakdown {
  double selec = 0.0;
  double score = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
};

Vector score_vector(const ModelParams& params);

/// Keep the k largest scores; equal scores prefer the lower index.
TopKMask topk_mask(const Vector& scores, std::size_t k);

/// Reconstruction ((x * s) W_E) W_D; with a mask, masked-out scores are zero.
Matrix forward(const ModelParams& params, const Matrix& x,
               const TopKMask* mask = nullptr);

/// Mean over rows of the squared reconstruction error per branch.
LossBreakdown loss(const ModelParams& params, const Matrix& x, std::size_t k,
                   double lambda1);

/// Per-row squared selector-branch reconstruction error.
Vector selector_row_losses(const ModelParams& params, const Matrix& x,
                           std::size_t k);

/// Analytic gradient of LossBreakdown::total. The top-k mask is recomputed
/// from `params` and held fixed within the call.
ParamGrads gradients(const ModelParams& params, const Matrix& x, std::size_t k,
                     double lambda1);

/// Loss and gradient together (shares the forward pass).
LossBreakdown loss_and_gradients(const ModelParams& params, const Matrix& x,
                                 std::size_t k, double lambda1,
                                 ParamGrads& grads);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& j);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace scoresel
