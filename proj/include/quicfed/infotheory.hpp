#pragma once

// Plug-in (histogram) entropy and mutual-information estimators over
// discretized columns. All quantities are in bits.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace quicfed {

enum class BinStrategy { EqualFrequency, EqualWidth };

// Bin b covers [edges[b], edges[b+1]); the last edge lies just above the maximum.
struct DiscretizedColumn {
  std::vector<std::uint32_t> bins;
  std::size_t n_bins = 0;
  std::vector<double> edges;

  std::size_t size() const noexcept { return bins.size(); }
};

struct EntropyOptions {
  // Upper bound on the number of occupied joint cells.
  std::size_t max_cells = 1'000'000;
};

// Equal-frequency edges are sample quantiles; duplicate edges collapse, so a
// constant column ends up with a single bin.
DiscretizedColumn discretize(std::span<const double> values, std::size_t n_bins,
                             BinStrategy strategy = BinStrategy::EqualFrequency);

using ColumnRefs = std::vector<const DiscretizedColumn*>;

// Occupied-cell counts of the joint distribution of `cols`, sorted ascending.
// Throws EstimatorError when more than options.max_cells cells are occupied.
std::vector<std::size_t> joint_counts(std::span<const DiscretizedColumn* const> cols,
                                      const EntropyOptions& options = {});

double entropy_from_counts(std::span<const std::size_t> counts);

double entropy(const DiscretizedColumn& col);
double joint_entropy(std::span<const DiscretizedColumn* const> cols, const EntropyOptions& options = {});
inline double joint_entropy(std::initializer_list<const DiscretizedColumn*> cols,
                            const EntropyOptions& options = {}) {
  return joint_entropy(std::span<const DiscretizedColumn* const>(cols.begin(), cols.size()), options);
}

// I(U;y) = H(y) + H(U) - H(U,y), clamped at zero. Empty U gives 0.
double mutual_information(std::span<const DiscretizedColumn* const> u, const DiscretizedColumn& y,
                          const EntropyOptions& options = {});
inline double mutual_information(std::initializer_list<const DiscretizedColumn*> u,
                                 const DiscretizedColumn& y, const EntropyOptions& options = {}) {
  return mutual_information(std::span<const DiscretizedColumn* const>(u.begin(), u.size()), y, options);
}

// I(x;y|U) = H(x,U) + H(y,U) - H(x,y,U) - H(U), clamped at zero.
double conditional_mi(const DiscretizedColumn& x, const DiscretizedColumn& y,
                      std::span<const DiscretizedColumn* const> u, const EntropyOptions& options = {});
inline double conditional_mi(const DiscretizedColumn& x, const DiscretizedColumn& y,
                             std::initializer_list<const DiscretizedColumn*> u,
                             const EntropyOptions& options = {}) {
  return conditional_mi(x, y, std::span<const DiscretizedColumn* const>(u.begin(), u.size()), options);
}

}  // namespace quicfed
