#include "scoresel/optim.hpp"

#include <algorithm>
#include <cmath>

#include "scoresel/error.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

ModelParams init_params(std::size_t m, std::size_t d, ScorerMap phi,
                        std::uint64_t seed) {
  if (d < 1 || d > m)
    throw Error("init_params: need 1 <= d <= m (d=" + std::to_string(d) +
                ", m=" + std::to_string(m) + ")");
  Rng rng(seed);
  const auto mi = static_cast<Eigen::Index>(m);
  const auto di = static_cast<Eigen::Index>(d);
  ModelParams p;
  p.phi = phi;
  p.w_m.resize(mi);
  const double lo = std::min(kScorerInitLow, kScorerInitHigh);
  const double hi = std::max(kScorerInitLow, kScorerInitHigh);
  for (Eigen::Index j = 0; j < mi; ++j) p.w_m[j] = rng.uniform(lo, hi);

  const double sd = std::sqrt(2.0 / static_cast<double>(m + d));
  p.w_e.resize(mi, di);
  for (Eigen::Index r = 0; r < mi; ++r)
    for (Eigen::Index c = 0; c < di; ++c) p.w_e(r, c) = sd * rng.normal();
  p.w_d.resize(di, mi);
  for (Eigen::Index r = 0; r < di; ++r)
    for (Eigen::Index c = 0; c < mi; ++c) p.w_d(r, c) = sd * rng.normal();
  return p;
}

AdamState AdamState::for_params(const ModelParams& params, double lr) {
  AdamState s;
  s.m1 = ParamGrads::zeros_like(params);
  s.m2 = ParamGrads::zeros_like(params);
  s.lr = lr;
  return s;
}

namespace {

template <typename Dense>
void update_block(Dense& theta, Dense& m1, Dense& m2, const Dense& g,
                  const AdamState& s, double c1, double c2) {
  m1 = s.beta1 * m1 + (1.0 - s.beta1) * g;
  m2 = s.beta2 * m2 + (1.0 - s.beta2) * g.cwiseAbs2();
  theta.array() -=
      s.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + s.eps);
}

}  // namespace

void adam_update(AdamState& state, ModelParams& params,
                 const ParamGrads& grads) {
  if (grads.w_m.size() != params.w_m.size() ||
      grads.w_e.rows() != params.w_e.rows() ||
      grads.w_e.cols() != params.w_e.cols() ||
      grads.w_d.rows() != params.w_d.rows() ||
      grads.w_d.cols() != params.w_d.cols())
    throw Error("adam_step: gradient shape mismatch");
  if (!grads.all_finite())
    throw Error("adam_step: non-finite gradient at step " +
                std::to_string(state.t + 1));
  if (state.m1.w_m.size() != params.w_m.size()) {
    state.m1 = ParamGrads::zeros_like(params);
    state.m2 = ParamGrads::zeros_like(params);
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  update_block(params.w_m, state.m1.w_m, state.m2.w_m, grads.w_m, state, c1, c2);
  update_block(params.w_e, state.m1.w_e, state.m2.w_e, grads.w_e, state, c1, c2);
  update_block(params.w_d, state.m1.w_d, state.m2.w_d, grads.w_d, state, c1, c2);
}

AdamResult adam_step(const AdamState& state, const ModelParams& params,
                     const ParamGrads& grads) {
  AdamResult r{state, params};
  adam_update(r.state, r.params, grads);
  return r;
}

}  // namespace scoresel
