#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "quicfed/error.hpp"
#include "oracles.hpp"
#include "quicfed/featsel.hpp"

using namespace quicfed;
using namespace quicfed::oracle;

namespace {

Matrix uniform_matrix(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) x(r, c) = u(rng);
  return x;
}

}  // namespace

TEST_CASE("mask helpers") {
  std::vector<std::size_t> idx = {4, 0, 2};
  auto mask = mask_from_indices(idx, 5);
  CHECK(mask == FeatureMask{true, false, true, false, true});
  CHECK(mask_indices(mask) == std::vector<std::size_t>{0, 2, 4});
  CHECK_THROWS_AS(mask_from_indices(std::vector<std::size_t>{5}, 5), ContractError);
}

TEST_CASE("ce_select finds a copied feature") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Matrix x = uniform_matrix(rng, 500, 9);
    std::vector<double> y = x.column(3);
    auto data = discretize_dataset(x, y);
    CeParams p;
    p.seed = seed;
    auto r = ce_select(data, p);
    if (r.mask == mask_from_indices(std::vector<std::size_t>{3}, 9)) ++hits;
    if (seed < 3) CHECK(exhaustive_best(data, p.chance_penalty) == mask_from_indices(std::vector<std::size_t>{3}, 9));
  }
  CHECK(hits >= 19);
}

TEST_CASE("ce_select with a single feature selects it") {
  std::mt19937_64 rng(1);
  Matrix x = uniform_matrix(rng, 50, 1);
  std::vector<double> y(50);
  for (auto& v : y) v = std::uniform_real_distribution<double>(0, 1)(rng);
  auto r = ce_select(discretize_dataset(x, y));
  CHECK(r.mask == FeatureMask{true});
}

TEST_CASE("ce_select result invariants and determinism") {
  std::mt19937_64 rng(5);
  Matrix x = uniform_matrix(rng, 400, 6);
  std::vector<double> y(400);
  for (std::size_t i = 0; i < 400; ++i) y[i] = x(i, 1) + x(i, 4);
  auto data = discretize_dataset(x, y, {4, 4, BinStrategy::EqualFrequency});
  CeParams p;
  p.seed = 77;
  auto a = ce_select(data, p);
  auto b = ce_select(data, p);
  CHECK(a.mask == b.mask);
  CHECK(a.distribution == b.distribution);
  CHECK(a.iterations == b.iterations);
  const auto k = mask_indices(a.mask).size();
  CHECK(k >= 1);
  CHECK(k <= 6);
  for (double pi : a.distribution.p) {
    CHECK(pi >= 0.0);
    CHECK(pi <= 1.0);
  }
  CHECK(a.mask == mask_from_distribution(a.distribution));
  CHECK(a.iterations <= p.max_iters);
  CHECK(a.objective == doctest::Approx(mutual_information(data.columns(a.mask), data.target)));
  // No strict subset of the chosen mask carries more information.
  auto sel = mask_indices(a.mask);
  for (std::uint64_t bits = 1; bits + 1 < (1ULL << sel.size()); ++bits) {
    FeatureMask sub(6, false);
    for (std::size_t i = 0; i < sel.size(); ++i) sub[sel[i]] = (bits >> i) & 1U;
    CHECK(mutual_information(data.columns(sub), data.target) <= a.objective + 1e-12);
  }
}

TEST_CASE("ce_score penalises uninformative columns") {
  std::mt19937_64 rng(9);
  Matrix x = uniform_matrix(rng, 2000, 3);
  std::vector<double> y = x.column(0);
  auto data = discretize_dataset(x, y, {3, 3, BinStrategy::EqualFrequency});
  auto one = ce_score(data, FeatureMask{true, false, false}, 1.5);
  auto two = ce_score(data, FeatureMask{true, true, false}, 1.5);
  CHECK(two.mi >= one.mi - 1e-12);
  CHECK(two.score < one.score);
  CHECK(one.size == 1);
  CHECK(two.size == 2);
  auto raw = ce_score(data, FeatureMask{true, true, false}, 0.0);
  CHECK(raw.score == raw.mi);
}

TEST_CASE("ce_select hyperparameter validation") {
  std::mt19937_64 rng(2);
  Matrix x = uniform_matrix(rng, 20, 3);
  auto data = discretize_dataset(x, x.column(0));
  CeParams p;
  p.elite_fraction = 0.0;
  CHECK_THROWS_AS(ce_select(data, p), ConfigError);
  p = {};
  p.smoothing = 1.5;
  CHECK_THROWS_AS(ce_select(data, p), ConfigError);
  p = {};
  p.samples = 0;
  CHECK_THROWS_AS(ce_select(data, p), ConfigError);
}

TEST_CASE("mRMR penalises a redundant copy") {
  // y = 2a + b over two independent bits; x1 duplicates x0 = a, x2 = b.
  auto a = col({0, 0, 1, 1, 0, 0, 1, 1});
  auto b = col({0, 1, 0, 1, 0, 1, 0, 1});
  auto y = col({0, 1, 2, 3, 0, 1, 2, 3});
  DiscreteDataset data{{a, a, b}, y};
  // scores after x0: x1 = 1 - I(x1;x0) = 0, x2 = 1 - I(x2;x0) = 1
  auto r = mrmr_rank(data, 3);
  CHECK(r.ranking == std::vector<std::size_t>{0, 2, 1});
  CHECK(mrmr_rank(data, 2).mask == FeatureMask{true, false, true});
}

TEST_CASE("CMIM: a copy adds nothing once the original is chosen") {
  auto a = col({0, 0, 1, 1, 0, 0, 1, 1});
  auto b = col({0, 1, 0, 1, 0, 1, 0, 1});
  auto y = col({0, 1, 2, 3, 0, 1, 2, 3});
  DiscreteDataset data{{a, a, b}, y};
  CHECK(conditional_mi(a, y, {&a}) == 0.0);
  auto r = cmim_rank(data, 3);
  CHECK(r.ranking == std::vector<std::size_t>{0, 2, 1});
  CHECK(cmim_rank(data, 1).ranking == mrmr_rank(data, 1).ranking);
}

TEST_CASE("DISR base case and constant target") {
  auto a = col({0, 0, 1, 1, 0, 0, 1, 1});
  auto b = col({0, 1, 0, 1, 0, 1, 0, 1});
  auto noisy = col({0, 1, 1, 0, 1, 0, 0, 1});
  auto y = col({0, 1, 2, 3, 0, 1, 2, 3});
  DiscreteDataset data{{noisy, b, a}, y};
  // I(x;y)/H(x,y) is 0.5 for a and b, 0 for the noise column; lowest index wins the tie.
  CHECK(disr_rank(data, 1).ranking == std::vector<std::size_t>{1});

  DiscreteDataset flat{{a, b, noisy}, col({0, 0, 0, 0, 0, 0, 0, 0})};
  CHECK(disr_rank(flat, 3).ranking == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("incremental rankers: permutation, prefix and range") {
  std::mt19937_64 rng(12);
  Matrix x = uniform_matrix(rng, 300, 7);
  std::vector<double> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = x(i, 2) + 0.5 * x(i, 5) + 0.2 * x(i, 0);
  auto data = discretize_dataset(x, y, {4, 4, BinStrategy::EqualFrequency});
  for (auto ranker : {mrmr_rank, cmim_rank, disr_rank}) {
    auto full = ranker(data, 7);
    auto sorted = full.ranking;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    for (std::size_t k = 1; k < 7; ++k) {
      auto r = ranker(data, k);
      CHECK(std::equal(r.ranking.begin(), r.ranking.end(), full.ranking.begin()));
      CHECK(r.mask == mask_from_indices(r.ranking, 7));
    }
    CHECK_THROWS_AS(ranker(data, 0), ConfigError);
    CHECK_THROWS_AS(ranker(data, 8), ConfigError);
  }
}

TEST_CASE("MI rankings ignore monotone rescaling") {
  std::mt19937_64 rng(21);
  Matrix x = uniform_matrix(rng, 400, 5);
  std::vector<double> y(400);
  for (std::size_t i = 0; i < 400; ++i) y[i] = std::sin(3 * x(i, 1)) + x(i, 3) * x(i, 3);
  Matrix z = x;
  for (std::size_t i = 0; i < 400; ++i) {
    z(i, 0) = std::exp(5 * x(i, 0));
    z(i, 1) = -1.0 / (x(i, 1) + 0.1);
    z(i, 3) = std::pow(x(i, 3), 3) * 1000 - 7;
  }
  DiscretizationOptions opt{5, 5, BinStrategy::EqualFrequency};
  auto dx = discretize_dataset(x, y, opt);
  auto dz = discretize_dataset(z, y, opt);
  CHECK(mrmr_rank(dx, 5).ranking == mrmr_rank(dz, 5).ranking);
  CHECK(cmim_rank(dx, 5).ranking == cmim_rank(dz, 5).ranking);
  CHECK(disr_rank(dx, 5).ranking == disr_rank(dz, 5).ranking);
  CeParams p;
  p.seed = 4;
  CHECK(ce_select(dx, p).mask == ce_select(dz, p).mask);
}

TEST_CASE("ANOVA F-score hand computation") {
  Matrix x(6, 1);
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = static_cast<double>(i + 1);
  std::vector<std::size_t> groups = {0, 0, 0, 1, 1, 1};
  // SSB = 3(2-3.5)^2 + 3(5-3.5)^2 = 13.5 on 1 df; SSW = 2 + 2 = 4 on 4 df.
  CHECK(anova_f_scores(x, groups)[0] == doctest::Approx(13.5));
}

TEST_CASE("ANOVA separation and zero variance") {
  Matrix x(8, 3);
  std::vector<std::size_t> groups = {0, 0, 1, 1, 2, 2, 3, 3};
  for (std::size_t i = 0; i < 8; ++i) {
    x(i, 0) = 7.0;                                   // constant
    x(i, 1) = static_cast<double>(i % 3);            // weak
    x(i, 2) = 10.0 * static_cast<double>(groups[i]);  // constant within groups
  }
  auto f = anova_f_scores(x, groups);
  CHECK(f[0] == 0.0);
  CHECK(std::isinf(f[2]));
  std::vector<double> y = {0.0, 0.01, 0.2, 0.21, 0.5, 0.51, 0.9, 0.91};
  auto r = anova_rank(x, y, 3);
  CHECK(r.ranking == std::vector<std::size_t>{2, 1, 0});
  CHECK_THROWS_AS(anova_f_scores(x, std::vector<std::size_t>(8, 0)), ConfigError);
  CHECK_THROWS_AS(anova_rank(x, y, 4), ConfigError);
}

TEST_CASE("aggregate_distributions examples") {
  auto agg = [](std::vector<LocalDistribution> l) { return aggregate_distributions(l).p; };
  CHECK(agg({{{{1.0, 0.0}}, 100}, {{{0.0, 1.0}}, 100}}) == std::vector<double>{0.5, 0.5});
  CHECK(agg({{{{0.3, 0.7, 0.1}}, 5}, {{{0.3, 0.7, 0.1}}, 17}, {{{0.3, 0.7, 0.1}}, 2}}) ==
        std::vector<double>{0.3, 0.7, 0.1});
  auto p = agg({{{{0.8, 0.2}}, 100}, {{{0.4, 0.6}}, 300}});
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(agg({{{{0.1}}, 1}, {{{0.1, 0.2}}, 1}}), ContractError);
  CHECK_THROWS_AS(agg({{{{0.1}}, 0}}), ContractError);
  CHECK_THROWS_AS(agg({}), ContractError);
}

TEST_CASE("aggregate_distributions is a convex combination") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng() % 9, nodes = 1 + rng() % 12;
    std::vector<LocalDistribution> locals(nodes);
    for (auto& l : locals) {
      l.sample_count = 1 + rng() % 1000;
      l.distribution.p.resize(m);
      for (auto& v : l.distribution.p) v = u(rng);
    }
    auto g = aggregate_distributions(locals);
    REQUIRE(g.size() == m);
    for (std::size_t i = 0; i < m; ++i) {
      double lo = 1.0, hi = 0.0;
      for (const auto& l : locals) {
        lo = std::min(lo, l.distribution.p[i]);
        hi = std::max(hi, l.distribution.p[i]);
      }
      CHECK(g.p[i] >= lo);
      CHECK(g.p[i] <= hi);
    }
  }
}

TEST_CASE("mask_from_distribution") {
  CHECK(mask_from_distribution({{0.9, 0.1, 0.6}}) == FeatureMask{true, false, true});
  CHECK(mask_from_distribution({{0.2, 0.3}}) == FeatureMask{false, true});
  CHECK(mask_from_distribution({{0.5, 0.5}}) == FeatureMask{true, true});
  CHECK(mask_from_distribution({{0.3, 0.3}}) == FeatureMask{true, false});
  CHECK(mask_from_distribution({{0.9, 0.7}}, 0.8) == FeatureMask{true, false});
}
