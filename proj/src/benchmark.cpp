#include "quicfed/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "quicfed/error.hpp"

namespace quicfed::bench {

PlantedData make_planted(const PlantedOptions& options, std::uint64_t seed) {
  if (options.rows < 2) throw ConfigError("make_planted: need at least 2 rows");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> target_noise(0.0, options.target_noise);
  std::normal_distribution<double> copy_noise(0.0, options.redundant_noise);

  PlantedData d{Matrix(options.rows, 9), std::vector<double>(options.rows)};
  for (std::size_t r = 0; r < options.rows; ++r) {
    double iat50 = unit(rng);
    double l25 = unit(rng), l50 = unit(rng), l75 = unit(rng), l90 = unit(rng);
    auto row = d.x.row(r);
    row[2] = iat50;
    row[5] = l25;
    row[6] = l50;
    row[7] = l75;
    row[8] = l90;
    row[1] = 0.6 * iat50 + 0.4 * unit(rng);
    row[3] = 0.6 * iat50 + 0.4 * unit(rng);
    row[kNoiseColumn] = unit(rng);
    row[kRedundantColumn] = l50 + copy_noise(rng);

    // iat_p50 enters through a bump, the length columns monotonically.
    const auto& w = options.length_slopes;
    double z = options.bump * std::cos(2.0 * M_PI * iat50) + w[0] * (l25 - 0.5) + w[1] * (l50 - 0.5) +
               w[2] * (l75 - 0.5) + w[3] * (l90 - 0.5);
    double y = 1.0 / (1.0 + std::exp(-z)) + target_noise(rng);
    d.y[r] = std::clamp(y, 0.0, 1.0);
  }
  return d;
}

}  // namespace quicfed::bench
