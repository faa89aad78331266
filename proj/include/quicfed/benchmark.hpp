#pragma once

// Planted-subset regression benchmark: nine columns named like the traffic
// features, with a target that depends on exactly five of them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "quicfed/matrix.hpp"

namespace quicfed::bench {

// 0-based columns the target is a function of (iat_p50, len_p25..len_p90).
inline constexpr std::array<std::size_t, 5> kPlantedColumns = {2, 5, 6, 7, 8};
// Noisy copy of len_p50.
inline constexpr std::size_t kRedundantColumn = 0;
// Independent of everything.
inline constexpr std::size_t kNoiseColumn = 4;

struct PlantedOptions {
  std::size_t rows = 4000;
  double target_noise = 0.03;      // sd of additive noise on the target
  double redundant_noise = 0.15;   // sd of the noise on the redundant copy
  // Amplitude of the non-monotone iat_p50 term and the slopes of the four
  // length columns inside the logistic link.
  double bump = 1.0;
  std::array<double, 4> length_slopes = {2.5, 4.0, 2.5, 2.5};
};

struct PlantedData {
  Matrix x;
  std::vector<double> y;  // in [0,1]
};

PlantedData make_planted(const PlantedOptions& options, std::uint64_t seed);

}  // namespace quicfed::bench
