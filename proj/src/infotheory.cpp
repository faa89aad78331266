#include "quicfed/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "quicfed/error.hpp"
#include "quicfed/quantile.hpp"

namespace quicfed {

namespace {

std::uint32_t bin_of(double v, std::span<const double> interior) {
  return static_cast<std::uint32_t>(std::upper_bound(interior.begin(), interior.end(), v) - interior.begin());
}

void check_aligned(std::span<const DiscretizedColumn* const> cols) {
  for (const auto* c : cols)
    if (c->size() != cols.front()->size()) throw ContractError("information estimator: columns differ in length");
}

}  // namespace

DiscretizedColumn discretize(std::span<const double> values, std::size_t n_bins, BinStrategy strategy) {
  if (values.empty()) throw ContractError("discretize: empty column");
  if (n_bins < 2) throw ConfigError("discretize: need at least 2 bins");
  for (double v : values)
    if (!std::isfinite(v)) throw EstimatorError("discretize: non-finite value");

  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;

  std::vector<double> interior;
  if (hi > lo) {
    if (strategy == BinStrategy::EqualWidth) {
      double width = (hi - lo) / static_cast<double>(n_bins);
      for (std::size_t b = 1; b < n_bins; ++b) interior.push_back(lo + width * static_cast<double>(b));
    } else {
      std::vector<double> sorted(values.begin(), values.end());
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t b = 1; b < n_bins; ++b) {
        double e = percentile_sorted(sorted, static_cast<double>(b) / static_cast<double>(n_bins));
        // An edge at or below the minimum would only create an empty bin.
        if (e > lo && (interior.empty() || e > interior.back())) interior.push_back(e);
      }
    }
  }

  DiscretizedColumn col;
  col.n_bins = interior.size() + 1;
  col.edges.reserve(col.n_bins + 1);
  col.edges.push_back(lo);
  col.edges.insert(col.edges.end(), interior.begin(), interior.end());
  col.edges.push_back(std::nextafter(hi, std::numeric_limits<double>::infinity()));
  col.bins.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) col.bins[i] = bin_of(values[i], interior);
  return col;
}

std::vector<std::size_t> joint_counts(std::span<const DiscretizedColumn* const> cols,
                                      const EntropyOptions& options) {
  if (cols.empty()) throw ContractError("joint_counts: no columns");
  check_aligned(cols);
  const std::size_t n = cols.front()->size();
  if (n == 0) return {};

  // Mixed-radix cell codes; when the radix product would overflow, relabel the
  // occupied cells densely and keep going.
  std::vector<std::uint64_t> code(n, 0);
  std::uint64_t radix = 1;
  for (const auto* c : cols) {
    const auto nb = static_cast<std::uint64_t>(std::max<std::size_t>(c->n_bins, 1));
    if (radix > std::numeric_limits<std::uint64_t>::max() / nb) {
      std::vector<std::uint64_t> occupied(code);
      std::sort(occupied.begin(), occupied.end());
      occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
      for (auto& v : code)
        v = static_cast<std::uint64_t>(std::lower_bound(occupied.begin(), occupied.end(), v) - occupied.begin());
      radix = occupied.size();
    }
    for (std::size_t i = 0; i < n; ++i) code[i] = code[i] * nb + c->bins[i];
    radix *= nb;
  }

  std::sort(code.begin(), code.end());
  std::vector<std::size_t> counts;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && code[i] == code[i - 1]) {
      ++run;
    } else {
      counts.push_back(run);
      run = 1;
    }
  }
  if (counts.size() > options.max_cells)
    throw EstimatorError("joint distribution occupies " + std::to_string(counts.size()) +
                         " cells (cap " + std::to_string(options.max_cells) +
                         "); reduce the conditioning set or the bin count");
  std::sort(counts.begin(), counts.end());
  return counts;
}

double entropy_from_counts(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

double entropy(const DiscretizedColumn& col) {
  const DiscretizedColumn* cols[] = {&col};
  return entropy_from_counts(joint_counts(cols));
}

double joint_entropy(std::span<const DiscretizedColumn* const> cols, const EntropyOptions& options) {
  return entropy_from_counts(joint_counts(cols, options));
}

double mutual_information(std::span<const DiscretizedColumn* const> u, const DiscretizedColumn& y,
                          const EntropyOptions& options) {
  if (u.empty()) return 0.0;
  ColumnRefs uy(u.begin(), u.end());
  uy.push_back(&y);
  check_aligned(uy);
  double mi = entropy(y) + joint_entropy(u, options) - joint_entropy(uy, options);
  if (!std::isfinite(mi)) throw EstimatorError("mutual_information: non-finite result");
  return std::max(mi, 0.0);
}

double conditional_mi(const DiscretizedColumn& x, const DiscretizedColumn& y,
                      std::span<const DiscretizedColumn* const> u, const EntropyOptions& options) {
  if (u.empty()) {
    const DiscretizedColumn* xs[] = {&x};
    return mutual_information(xs, y, options);
  }
  ColumnRefs xu{&x}, yu{&y}, xyu{&x, &y};
  xu.insert(xu.end(), u.begin(), u.end());
  yu.insert(yu.end(), u.begin(), u.end());
  xyu.insert(xyu.end(), u.begin(), u.end());
  check_aligned(xyu);
  double cmi = joint_entropy(xu, options) + joint_entropy(yu, options) - joint_entropy(xyu, options) -
               joint_entropy(u, options);
  if (!std::isfinite(cmi)) throw EstimatorError("conditional_mi: non-finite result");
  return std::max(cmi, 0.0);
}

}  // namespace quicfed
