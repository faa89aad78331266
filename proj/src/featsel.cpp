#include "quicfed/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "quicfed/error.hpp"

namespace quicfed {

std::vector<std::size_t> mask_indices(const FeatureMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

FeatureMask mask_from_indices(std::span<const std::size_t> indices, std::size_t m) {
  FeatureMask mask(m, false);
  for (auto i : indices) {
    if (i >= m) throw ContractError("mask_from_indices: index out of range");
    mask[i] = true;
  }
  return mask;
}

ColumnRefs DiscreteDataset::columns(const FeatureMask& mask) const {
  if (mask.size() != features.size()) throw ContractError("DiscreteDataset::columns: mask width mismatch");
  ColumnRefs refs;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) refs.push_back(&features[i]);
  return refs;
}

DiscreteDataset discretize_dataset(const Matrix& x, std::span<const double> y,
                                   const DiscretizationOptions& options) {
  if (x.rows() != y.size()) throw ContractError("discretize_dataset: X and y differ in length");
  DiscreteDataset out;
  out.features.reserve(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    auto col = x.column(c);
    out.features.push_back(discretize(col, options.feature_bins, options.strategy));
  }
  out.target = discretize(y, options.target_bins, options.strategy);
  return out;
}

// ---- cross-entropy -----------------------------------------------------------------

SubsetScore ce_score(const DiscreteDataset& data, const FeatureMask& mask, double chance_penalty,
                     const EntropyOptions& options) {
  auto cols = data.columns(mask);
  SubsetScore s;
  s.size = cols.size();
  if (cols.empty()) return s;

  const DiscretizedColumn* ycol[] = {&data.target};
  auto y_counts = joint_counts(ycol, options);
  auto u_counts = joint_counts(cols, options);
  ColumnRefs uy(cols);
  uy.push_back(&data.target);
  auto uy_counts = joint_counts(uy, options);

  double mi = entropy_from_counts(y_counts) + entropy_from_counts(u_counts) - entropy_from_counts(uy_counts);
  if (!std::isfinite(mi)) throw EstimatorError("ce_score: non-finite mutual information");
  s.mi = std::max(mi, 0.0);

  const double n = static_cast<double>(data.num_rows());
  const double dof = static_cast<double>(u_counts.size() - 1) * static_cast<double>(y_counts.size() - 1);
  s.score = s.mi - chance_penalty * dof / (2.0 * n * std::log(2.0));
  return s;
}

namespace {

std::uint64_t mask_bits(const FeatureMask& mask) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) bits |= std::uint64_t{1} << i;
  return bits;
}

bool near_binary(const std::vector<double>& p, double tol) {
  return std::all_of(p.begin(), p.end(), [tol](double v) { return v <= tol || v >= 1.0 - tol; });
}

}  // namespace

SelectionResult ce_select(const DiscreteDataset& data, const CeParams& params) {
  const std::size_t m = data.num_features();
  if (m < 1) throw ContractError("ce_select: no features");
  if (m > 64) throw ConfigError("ce_select: at most 64 features are supported");
  if (data.num_rows() < 2) throw ContractError("ce_select: need at least 2 rows");
  if (params.samples < 1 || !(params.elite_fraction > 0.0 && params.elite_fraction <= 1.0) ||
      !(params.smoothing > 0.0 && params.smoothing <= 1.0) ||
      !(params.initial_p >= 0.0 && params.initial_p <= 1.0) || params.tolerance < 0.0 ||
      params.chance_penalty < 0.0)
    throw ConfigError("ce_select: invalid hyperparameters");

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::unordered_map<std::uint64_t, SubsetScore> cache;
  auto score_of = [&](const FeatureMask& mask) {
    auto bits = mask_bits(mask);
    auto it = cache.find(bits);
    if (it != cache.end()) return it->second;
    auto s = ce_score(data, mask, params.chance_penalty, params.entropy);
    cache.emplace(bits, s);
    return s;
  };

  const auto n_elite = static_cast<std::size_t>(
      std::max(1.0, std::ceil(params.elite_fraction * static_cast<double>(params.samples))));
  std::vector<double> p(m, params.initial_p);

  struct Candidate {
    FeatureMask mask;
    std::int64_t key;  // score in nano-bits; equal keys count as ties
    std::size_t size;
    std::size_t order;
  };

  SelectionResult result;
  std::size_t iter = 0;
  while (iter < params.max_iters && !near_binary(p, params.tolerance)) {
    ++iter;
    std::vector<Candidate> candidates;
    candidates.reserve(params.samples);
    for (std::size_t c = 0; c < params.samples; ++c) {
      FeatureMask mask(m, false);
      bool any = false;
      for (std::size_t attempt = 0; attempt < std::max<std::size_t>(params.max_iters, 1) && !any; ++attempt) {
        for (std::size_t i = 0; i < m; ++i) {
          mask[i] = unit(rng) < p[i];
          any = any || mask[i];
        }
      }
      if (!any) throw EstimatorError("ce_select: selection distribution keeps producing empty masks");
      auto s = score_of(mask);
      if (!std::isfinite(s.score)) throw EstimatorError("ce_select: non-finite candidate score");
      candidates.push_back({std::move(mask), std::llround(s.score * 1e9), s.size, c});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.key != b.key) return a.key > b.key;
      if (a.size != b.size) return a.size < b.size;
      return a.order < b.order;
    });
    const std::size_t elites = std::min(n_elite, candidates.size());
    for (std::size_t i = 0; i < m; ++i) {
      double mean = 0.0;
      for (std::size_t e = 0; e < elites; ++e) mean += candidates[e].mask[i] ? 1.0 : 0.0;
      mean /= static_cast<double>(elites);
      p[i] = (1.0 - params.smoothing) * p[i] + params.smoothing * mean;
    }
  }

  result.distribution.p = p;
  result.iterations = iter;
  result.converged = near_binary(p, params.tolerance);
  result.mask = mask_from_distribution(result.distribution, 0.5);
  result.objective = score_of(result.mask).mi;
  return result;
}

// ---- incremental rankers -------------------------------------------------------------

namespace {

void check_k(const DiscreteDataset& data, std::size_t k) {
  if (k < 1 || k > data.num_features())
    throw ConfigError("ranker: k must be in [1, " + std::to_string(data.num_features()) + "], got " +
                      std::to_string(k));
}

double mi_of(const DiscreteDataset& data, std::initializer_list<const DiscretizedColumn*> u) {
  return mutual_information(u, data.target);
}

// Greedy forward selection; `score(j, selected)` is maximised, lowest index wins ties.
template <typename ScoreFn>
SelectionResult greedy_rank(const DiscreteDataset& data, std::size_t k, ScoreFn score) {
  check_k(data, k);
  const std::size_t m = data.num_features();
  std::vector<bool> taken(m, false);
  SelectionResult result;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = m;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (taken[j]) continue;
      double s = score(j, result.ranking);
      if (best == m || s > best_score) {
        best = j;
        best_score = s;
      }
    }
    taken[best] = true;
    result.ranking.push_back(best);
  }
  result.mask = mask_from_indices(result.ranking, m);
  result.distribution.p.assign(m, 0.0);
  for (auto j : result.ranking) result.distribution.p[j] = 1.0;
  result.objective = mutual_information(data.columns(result.mask), data.target);
  return result;
}

// Lazily filled symmetric/asymmetric pair table.
class PairCache {
 public:
  explicit PairCache(std::size_t m) : m_(m), values_(m * m, std::numeric_limits<double>::quiet_NaN()) {}
  template <typename Fn>
  double get(std::size_t a, std::size_t b, Fn compute) {
    double& v = values_[a * m_ + b];
    if (std::isnan(v)) v = compute();
    return v;
  }

 private:
  std::size_t m_;
  std::vector<double> values_;
};

std::vector<double> relevances(const DiscreteDataset& data) {
  std::vector<double> rel(data.num_features());
  for (std::size_t j = 0; j < rel.size(); ++j) rel[j] = mi_of(data, {&data.features[j]});
  return rel;
}

}  // namespace

SelectionResult mrmr_rank(const DiscreteDataset& data, std::size_t k) {
  check_k(data, k);
  auto rel = relevances(data);
  PairCache redundancy(data.num_features());
  return greedy_rank(data, k, [&](std::size_t j, const std::vector<std::size_t>& selected) {
    if (selected.empty()) return rel[j];
    double red = 0.0;
    for (auto s : selected) {
      red += redundancy.get(std::min(j, s), std::max(j, s), [&] {
        return mutual_information({&data.features[j]}, data.features[s]);
      });
    }
    return rel[j] - red / static_cast<double>(selected.size());
  });
}

SelectionResult cmim_rank(const DiscreteDataset& data, std::size_t k) {
  check_k(data, k);
  auto rel = relevances(data);
  PairCache cond(data.num_features());
  return greedy_rank(data, k, [&](std::size_t j, const std::vector<std::size_t>& selected) {
    double best = rel[j];
    for (auto s : selected) {
      double v = cond.get(j, s, [&] {
        return conditional_mi(data.features[j], data.target, {&data.features[s]});
      });
      best = std::min(best, v);
    }
    return best;
  });
}

SelectionResult disr_rank(const DiscreteDataset& data, std::size_t k) {
  check_k(data, k);
  const auto& y = data.target;
  auto normalized = [&](std::initializer_list<const DiscretizedColumn*> u) {
    double mi = mutual_information(u, y);
    ColumnRefs all(u.begin(), u.end());
    all.push_back(&y);
    double h = joint_entropy(all);
    return h > 0.0 ? mi / h : 0.0;
  };
  std::vector<double> base(data.num_features());
  for (std::size_t j = 0; j < base.size(); ++j) base[j] = normalized({&data.features[j]});
  PairCache pair(data.num_features());
  return greedy_rank(data, k, [&](std::size_t j, const std::vector<std::size_t>& selected) {
    if (selected.empty()) return base[j];
    double sum = 0.0;
    for (auto s : selected)
      sum += pair.get(std::min(j, s), std::max(j, s),
                      [&] { return normalized({&data.features[j], &data.features[s]}); });
    return sum;
  });
}

// ---- ANOVA -----------------------------------------------------------------------------

std::vector<double> anova_f_scores(const Matrix& x, std::span<const std::size_t> groups) {
  if (x.rows() != groups.size()) throw ContractError("anova: X and groups differ in length");
  if (x.rows() == 0) throw ContractError("anova: no rows");
  const std::size_t n_groups = *std::max_element(groups.begin(), groups.end()) + 1;
  std::vector<std::size_t> size(n_groups, 0);
  for (auto g : groups) ++size[g];
  const auto occupied = static_cast<std::size_t>(std::count_if(size.begin(), size.end(), [](auto s) { return s > 0; }));
  if (occupied < 2) throw ConfigError("anova: need at least 2 non-empty groups");

  const double n = static_cast<double>(x.rows());
  std::vector<double> scores(x.cols(), 0.0);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::vector<double> sum(n_groups, 0.0);
    std::vector<double> first(n_groups, 0.0);
    std::vector<bool> constant(n_groups, true), seen(n_groups, false);
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double v = x(r, c);
      auto g = groups[r];
      if (!seen[g]) {
        seen[g] = true;
        first[g] = v;
      } else if (v != first[g]) {
        constant[g] = false;
      }
      sum[g] += v;
      total += v;
    }
    std::vector<double> mean(n_groups, 0.0);
    for (std::size_t g = 0; g < n_groups; ++g)
      if (size[g] > 0) mean[g] = constant[g] ? first[g] : sum[g] / static_cast<double>(size[g]);

    bool all_same = true;
    for (std::size_t g = 0; g < n_groups; ++g)
      if (size[g] > 0 && (!constant[g] || first[g] != x(0, c))) all_same = false;
    if (all_same) {
      scores[c] = 0.0;
      continue;
    }

    double grand = total / n;
    double ssb = 0.0, ssw = 0.0;
    for (std::size_t g = 0; g < n_groups; ++g)
      if (size[g] > 0) ssb += static_cast<double>(size[g]) * (mean[g] - grand) * (mean[g] - grand);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto g = groups[r];
      if (constant[g]) continue;
      double d = x(r, c) - mean[g];
      ssw += d * d;
    }
    const double df_between = static_cast<double>(occupied - 1);
    const double df_within = n - static_cast<double>(occupied);
    if (ssw == 0.0 || df_within <= 0.0) {
      scores[c] = ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
      scores[c] = (ssb / df_between) / (ssw / df_within);
    }
  }
  return scores;
}

SelectionResult anova_rank(const Matrix& x, std::span<const double> y, std::size_t k, std::size_t num_groups) {
  if (k < 1 || k > x.cols()) throw ConfigError("anova_rank: k out of range");
  if (num_groups < 2) throw ConfigError("anova_rank: need at least 2 groups");
  auto grouping = discretize(y, num_groups, BinStrategy::EqualFrequency);
  std::vector<std::size_t> groups(grouping.bins.begin(), grouping.bins.end());
  auto f = anova_f_scores(x, groups);

  std::vector<bool> zero_variance(x.cols(), true);
  for (std::size_t c = 0; c < x.cols(); ++c)
    for (std::size_t r = 1; r < x.rows(); ++r)
      if (x(r, c) != x(0, c)) {
        zero_variance[c] = false;
        break;
      }

  std::vector<std::size_t> order(x.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (zero_variance[a] != zero_variance[b]) return !zero_variance[a];
    return f[a] > f[b];
  });

  SelectionResult result;
  result.ranking.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  result.mask = mask_from_indices(result.ranking, x.cols());
  result.distribution.p.assign(x.cols(), 0.0);
  for (auto j : result.ranking) result.distribution.p[j] = 1.0;
  result.objective = 0.0;
  return result;
}

// ---- federation helpers ------------------------------------------------------------------

SelectionDistribution aggregate_distributions(std::span<const LocalDistribution> locals) {
  if (locals.empty()) throw ContractError("aggregate_distributions: no local distributions");
  const std::size_t m = locals.front().distribution.size();
  std::size_t total = 0;
  for (const auto& l : locals) {
    if (l.distribution.size() != m) throw ContractError("aggregate_distributions: length mismatch");
    if (l.sample_count < 1) throw ContractError("aggregate_distributions: every node needs at least one sample");
    total += l.sample_count;
  }
  if (total == 0) throw ContractError("aggregate_distributions: zero total samples");

  SelectionDistribution out;
  out.p.assign(m, 0.0);
  for (const auto& l : locals) {
    double q = static_cast<double>(l.sample_count) / static_cast<double>(total);
    for (std::size_t i = 0; i < m; ++i) out.p[i] += q * l.distribution.p[i];
  }
  // Rounding can push a convex combination a hair outside its hull.
  for (std::size_t i = 0; i < m; ++i) {
    double lo = 1.0, hi = 0.0;
    for (const auto& l : locals) {
      lo = std::min(lo, l.distribution.p[i]);
      hi = std::max(hi, l.distribution.p[i]);
    }
    out.p[i] = std::clamp(out.p[i], lo, hi);
  }
  return out;
}

FeatureMask mask_from_distribution(const SelectionDistribution& p, double threshold) {
  if (p.p.empty()) throw ContractError("mask_from_distribution: empty distribution");
  FeatureMask mask(p.size(), false);
  bool any = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mask[i] = p.p[i] >= threshold;
    any = any || mask[i];
  }
  if (!any) {
    auto best = static_cast<std::size_t>(std::max_element(p.p.begin(), p.p.end()) - p.p.begin());
    mask[best] = true;
  }
  return mask;
}

}  // namespace quicfed
