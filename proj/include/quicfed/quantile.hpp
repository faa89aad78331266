#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "quicfed/error.hpp"

namespace quicfed {

// Linear interpolation between closest ranks, r = (n-1) q. `sorted` must be
// ascending and non-empty.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("percentile of an empty sample");
  double r = static_cast<double>(sorted.size() - 1) * q;
  auto lo = static_cast<std::size_t>(std::floor(r));
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = r - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace quicfed
