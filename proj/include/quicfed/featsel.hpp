#pragma once

// Feature selection: the cross-entropy subset search over mutual information,
// the greedy information-theoretic rankers (mRMR, CMIM, DISR), the ANOVA
// F-score ranker, and the size-weighted merge of selection distributions
// used by the federated variant.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "quicfed/infotheory.hpp"
#include "quicfed/matrix.hpp"

namespace quicfed {

using FeatureMask = std::vector<bool>;

std::vector<std::size_t> mask_indices(const FeatureMask& mask);
FeatureMask mask_from_indices(std::span<const std::size_t> indices, std::size_t m);

// Independent Bernoulli selection probabilities, one per feature. They do not
// sum to one.
struct SelectionDistribution {
  std::vector<double> p;

  std::size_t size() const noexcept { return p.size(); }
  friend bool operator==(const SelectionDistribution&, const SelectionDistribution&) = default;
};

struct SelectionResult {
  FeatureMask mask;
  SelectionDistribution distribution;
  double objective = 0.0;  // I(selected; y) in bits
  std::vector<std::size_t> ranking;  // incremental methods only
  std::size_t iterations = 0;        // cross-entropy iterations used
  bool converged = false;            // cross-entropy: every p_i within tolerance of {0,1}
};

// Discretized view of a feature matrix and its target.
struct DiscreteDataset {
  std::vector<DiscretizedColumn> features;
  DiscretizedColumn target;

  std::size_t num_features() const noexcept { return features.size(); }
  std::size_t num_rows() const noexcept { return target.size(); }
  ColumnRefs columns(const FeatureMask& mask) const;
};

struct DiscretizationOptions {
  std::size_t feature_bins = 10;
  std::size_t target_bins = 10;
  BinStrategy strategy = BinStrategy::EqualFrequency;
};

DiscreteDataset discretize_dataset(const Matrix& x, std::span<const double> y,
                                   const DiscretizationOptions& options = {});

// ---- cross-entropy selector ----------------------------------------------------

struct CeParams {
  std::size_t samples = 50;       // candidate masks per iteration
  double elite_fraction = 0.1;
  double smoothing = 0.7;         // weight of the elite mean in the update
  double initial_p = 0.5;
  double tolerance = 0.05;        // stop once every p_i is this close to 0 or 1
  std::size_t max_iters = 100;
  // Scale of the chance-level correction subtracted from the plug-in MI of a
  // candidate subset (see ce_score). Zero scores raw MI.
  double chance_penalty = 1.5;
  std::uint64_t seed = 0;
  EntropyOptions entropy;
};

struct SubsetScore {
  double score = 0.0;  // corrected objective maximised by the search
  double mi = 0.0;     // plug-in I(U;y)
  std::size_t size = 0;
};

// score(U) = I(U;y) - chance_penalty * (K_U - 1)(K_y - 1) / (2 n ln 2), where
// K_U and K_y are the occupied cells of U and y. The subtracted term is the
// expected plug-in MI of independent variables with those alphabets, so
// adding an uninformative column does not raise the score.
SubsetScore ce_score(const DiscreteDataset& data, const FeatureMask& mask, double chance_penalty,
                     const EntropyOptions& options = {});

SelectionResult ce_select(const DiscreteDataset& data, const CeParams& params = {});

// ---- incremental rankers ---------------------------------------------------------

// argmax_j I(x_j;y) - mean_{s in U} I(x_j;x_s)
SelectionResult mrmr_rank(const DiscreteDataset& data, std::size_t k);
// argmax_j min_{s in U} I(x_j;y|x_s)
SelectionResult cmim_rank(const DiscreteDataset& data, std::size_t k);
// argmax_j sum_{s in U} I(x_j,x_s;y) / H(x_j,x_s,y)
SelectionResult disr_rank(const DiscreteDataset& data, std::size_t k);

// ---- ANOVA -------------------------------------------------------------------------

// One-way F = (SSB/(G-1)) / (SSW/(n-G)) per column. +inf when the groups are
// separated perfectly, 0 for a constant column.
std::vector<double> anova_f_scores(const Matrix& x, std::span<const std::size_t> groups);

// Groups are `num_groups` equal-frequency bins of the continuous target.
SelectionResult anova_rank(const Matrix& x, std::span<const double> y, std::size_t k,
                           std::size_t num_groups = 4);

// ---- federation helpers ------------------------------------------------------------

struct LocalDistribution {
  SelectionDistribution distribution;
  std::size_t sample_count = 0;
};

// p^G = sum_l q^l p^l with q^l = n^l / sum n.
SelectionDistribution aggregate_distributions(std::span<const LocalDistribution> locals);

// mask_i = p_i >= threshold; falls back to the single argmax when nothing passes.
FeatureMask mask_from_distribution(const SelectionDistribution& p, double threshold = 0.5);

}  // namespace quicfed
