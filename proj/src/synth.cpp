#include "scoresel/synth.hpp"

#include <algorithm>
#include <cmath>

#include "scoresel/error.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

SynthData make_planted(const SynthSpec& spec) {
  if (spec.informative < 1 || spec.informative > spec.m)
    throw Error("gen-synth: need 1 <= informative <= m");
  if (spec.n < 1) throw Error("gen-synth: need n >= 1");
  if (!(spec.noise >= 0.0)) throw Error("gen-synth: noise must be >= 0");

  Rng rng(spec.seed);
  const std::size_t p = spec.informative;
  IndexList cols = rng.permutation(spec.m);
  IndexList planted(cols.begin(), cols.begin() + static_cast<long>(p));
  std::sort(planted.begin(), planted.end());
  IndexList derived;
  for (std::size_t c = 0; c < spec.m; ++c)
    if (!std::binary_search(planted.begin(), planted.end(), c))
      derived.push_back(c);

  const auto pi = static_cast<Eigen::Index>(p);
  Matrix mix(pi, static_cast<Eigen::Index>(derived.size()));
  const double coef_sd = 1.0 / std::sqrt(static_cast<double>(p));
  for (Eigen::Index r = 0; r < mix.rows(); ++r)
    for (Eigen::Index c = 0; c < mix.cols(); ++c) mix(r, c) = coef_sd * rng.normal();

  const auto n = static_cast<Eigen::Index>(spec.n);
  Matrix z(n, pi);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < pi; ++c) z(r, c) = rng.normal();

  SynthData out;
  out.planted = planted;
  Dataset& ds = out.data;
  ds.x.resize(n, static_cast<Eigen::Index>(spec.m));
  for (std::size_t i = 0; i < p; ++i)
    ds.x.col(static_cast<Eigen::Index>(planted[i])) = z.col(static_cast<Eigen::Index>(i));
  const Matrix combos = z * mix;
  for (std::size_t i = 0; i < derived.size(); ++i) {
    auto col = ds.x.col(static_cast<Eigen::Index>(derived[i]));
    col = combos.col(static_cast<Eigen::Index>(i));
    for (Eigen::Index r = 0; r < n; ++r) col[r] += spec.noise * rng.normal();
  }
  for (std::size_t c = 0; c < spec.m; ++c)
    ds.feature_names.push_back("f" + std::to_string(c));

  std::vector<int> labels(spec.n);
  const Eigen::Index voters = std::min<Eigen::Index>(pi, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (voters == 1) {
      labels[static_cast<std::size_t>(r)] = z(r, 0) > 0.0 ? 1 : 0;
      continue;
    }
    Eigen::Index best = 0;
    z.row(r).head(voters).maxCoeff(&best);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  ds.labels = std::move(labels);
  return out;
}

}  // namespace scoresel
