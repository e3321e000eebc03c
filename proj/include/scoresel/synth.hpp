#pragma once

#include <cstdint>

#include "scoresel/dataio.hpp"

namespace scoresel {

struct SynthSpec {
  std::size_t m = 10;
  std::size_t n = 600;
  std::size_t informative = 5;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

struct SynthData {
  Dataset data;
  IndexList planted;  // ascending column indices of the generating features
};

/// Planted-feature benchmark. `informative` independent N(0, 1) columns are
/// scattered at seeded positions; every other column is a random linear
/// combination of them (coefficients N(0, 1/informative)) plus N(0, noise^2).
/// Labels: index of the largest of the first min(3, informative) planted
/// columns (sign of the first one when only one is planted).
SynthData make_planted(const SynthSpec& spec);

}  // namespace scoresel
