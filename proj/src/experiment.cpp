#include "quicfed/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>

#include "csv_util.hpp"
#include "quicfed/error.hpp"

namespace quicfed {

namespace {

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
}

template <typename T>
Setter number(std::string_view key, T ExperimentConfig::*field) {
  return [key, field](ExperimentConfig& c, std::string_view v) {
    T out{};
    if (!detail::parse_number(v, out)) bad_value(key, v);
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(out)) bad_value(key, v);
    c.*field = out;
  };
}

Setter text(std::string ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, std::string_view v) { c.*field = std::string(v); };
}

struct Key {
  std::string_view name;
  Setter set;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"trace", text(&ExperimentConfig::trace)},
      {"features", text(&ExperimentConfig::features)},
      {"duration", number("duration", &ExperimentConfig::duration)},
      {"test_duration", number("test_duration", &ExperimentConfig::test_duration)},
      {"test_frac", number("test_frac", &ExperimentConfig::test_frac)},
      {"window", number("window", &ExperimentConfig::window)},
      {"target_service", text(&ExperimentConfig::target_service)},
      {"feature_bins", number("feature_bins", &ExperimentConfig::feature_bins)},
      {"target_bins", number("target_bins", &ExperimentConfig::target_bins)},
      {"methods",
       [](ExperimentConfig& c, std::string_view v) {
         c.methods.clear();
         for (auto part : detail::split_commas(v))
           if (!part.empty()) c.methods.emplace_back(part);
         if (c.methods.empty()) bad_value("methods", v);
       }},
      {"k", number("k", &ExperimentConfig::k)},
      {"ce_samples", number("ce_samples", &ExperimentConfig::ce_samples)},
      {"ce_elite_fraction", number("ce_elite_fraction", &ExperimentConfig::ce_elite_fraction)},
      {"ce_smoothing", number("ce_smoothing", &ExperimentConfig::ce_smoothing)},
      {"ce_initial_p", number("ce_initial_p", &ExperimentConfig::ce_initial_p)},
      {"ce_tolerance", number("ce_tolerance", &ExperimentConfig::ce_tolerance)},
      {"ce_max_iters", number("ce_max_iters", &ExperimentConfig::ce_max_iters)},
      {"ce_chance_penalty", number("ce_chance_penalty", &ExperimentConfig::ce_chance_penalty)},
      {"hidden", number("hidden", &ExperimentConfig::hidden)},
      {"epochs", number("epochs", &ExperimentConfig::epochs)},
      {"local_epochs", number("local_epochs", &ExperimentConfig::local_epochs)},
      {"batch_size", number("batch_size", &ExperimentConfig::batch_size)},
      {"lr", number("lr", &ExperimentConfig::lr)},
      {"gateways", number("gateways", &ExperimentConfig::gateways)},
      {"server_frac", number("server_frac", &ExperimentConfig::server_frac)},
      {"mode",
       [](ExperimentConfig& c, std::string_view v) {
         auto m = fed::mode_from_token(v);
         if (!m) bad_value("mode", v);
         c.mode = std::string(fed::to_token(*m));
       }},
      {"merge_momentum", number("merge_momentum", &ExperimentConfig::merge_momentum)},
      {"max_rounds", number("max_rounds", &ExperimentConfig::max_rounds)},
      {"threshold", number("threshold", &ExperimentConfig::threshold)},
      {"fs_every_round",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "true" || v == "1") c.fs_every_round = true;
         else if (v == "false" || v == "0") c.fs_every_round = false;
         else bad_value("fs_every_round", v);
       }},
      {"seed", number("seed", &ExperimentConfig::seed)},
      {"out", text(&ExperimentConfig::out)},
  };
  return table;
}

enum Stream : std::uint64_t { kTrainTrace = 101, kTestTrace, kSplit, kHoldout, kFitInit, kFitTrain, kSelect };

}  // namespace

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& k : keys())
    if (k.name == key) {
      k.set(config, detail::trim(value));
      return;
    }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string_view> config_keys() {
  std::vector<std::string_view> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

void load_config(ExperimentConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value", line_no);
    try {
      apply_setting(config, detail::trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
}

void load_config(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  load_config(config, in);
}

CeParams ce_params(const ExperimentConfig& c) {
  CeParams p;
  p.samples = c.ce_samples;
  p.elite_fraction = c.ce_elite_fraction;
  p.smoothing = c.ce_smoothing;
  p.initial_p = c.ce_initial_p;
  p.tolerance = c.ce_tolerance;
  p.max_iters = c.ce_max_iters;
  p.chance_penalty = c.ce_chance_penalty;
  p.seed = fed::derive_seed(c.seed, kSelect);
  return p;
}

DiscretizationOptions selection_bins(const ExperimentConfig& c) {
  return {c.feature_bins, c.target_bins, BinStrategy::EqualFrequency};
}

fed::Mode experiment_mode(const ExperimentConfig& c) {
  auto m = fed::mode_from_token(c.mode);
  if (!m) throw ConfigError("unknown mode '" + c.mode + "'");
  return *m;
}

fed::FederationConfig federation_config(const ExperimentConfig& c) {
  fed::FederationConfig f;
  f.hidden = c.hidden;
  f.pretrain_epochs = c.epochs;
  f.local_epochs = c.local_epochs;
  f.batch_size = c.batch_size;
  f.lr = c.lr;
  f.merge_momentum = c.merge_momentum;
  f.max_rounds = c.max_rounds;
  f.threshold = c.threshold;
  f.fs_every_round = c.fs_every_round;
  f.ce = ce_params(c);
  f.fs_bins = selection_bins(c);
  f.seed = c.seed;
  return f;
}

ExperimentData holdout_split(std::span<const FeatureRow> rows, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw ConfigError("test_frac must be in (0,1)");
  if (rows.size() < 2) throw ConfigError("need at least two rows for a held-out split");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(rows.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
  ExperimentData d;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_test ? d.test : d.train).push_back(rows[order[i]]);
  return d;
}

ExperimentData prepare_data(const ExperimentConfig& c) {
  auto service = service_from_token(c.target_service);
  if (!service) throw ConfigError("unknown target_service '" + c.target_service + "'");
  ExtractOptions opts;
  opts.window_s = c.window;
  opts.target_service = *service;

  if (!c.features.empty())
    return holdout_split(read_feature_csv(std::filesystem::path(c.features)), c.test_frac,
                         fed::derive_seed(c.seed, kHoldout));
  if (!c.trace.empty())
    return holdout_split(extract_features(parse_trace(std::filesystem::path(c.trace)), opts), c.test_frac,
                         fed::derive_seed(c.seed, kHoldout));

  const auto gen = SyntheticTraceConfig::defaults();
  ExperimentData d;
  d.train = extract_features(generate_synthetic_trace(gen, c.duration, fed::derive_seed(c.seed, kTrainTrace)), opts);
  d.test =
      extract_features(generate_synthetic_trace(gen, c.test_duration, fed::derive_seed(c.seed, kTestTrace)), opts);
  return d;
}

fed::Federation make_federation(const ExperimentConfig& c, const ExperimentData& data) {
  auto split = split_dataset(data.train, c.server_frac, c.gateways, fed::derive_seed(c.seed, kSplit));
  return fed::make_federation(split, data.test);
}

fed::ExperimentReport run_experiment(const ExperimentConfig& c) {
  const auto mode = experiment_mode(c);
  const auto data = prepare_data(c);
  return fed::run_experiment(make_federation(c, data), mode, federation_config(c));
}

// ---- selector comparison --------------------------------------------------------------

std::vector<std::string> expand_methods(std::span<const std::string> methods) {
  std::vector<std::string> out;
  auto add = [&](std::string_view name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
  };
  for (const auto& raw : methods) {
    std::string m = raw;
    for (auto& ch : m) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (m == "all") {
      for (auto n : kSelectorNames) add(n);
    } else if (std::find(kSelectorNames.begin(), kSelectorNames.end(), m) != kSelectorNames.end()) {
      add(m);
    } else {
      throw ConfigError("unknown selection method '" + raw + "'");
    }
  }
  if (out.empty()) throw ConfigError("no selection methods given");
  return out;
}

SelectionResult run_selector(std::string_view method, const Matrix& x, std::span<const double> y,
                             const DiscreteDataset& data, std::size_t k, const CeParams& ce) {
  if (method == "ce") return ce_select(data, ce);
  if (method == "anova") return anova_rank(x, y, k);
  if (method == "cmim") return cmim_rank(data, k);
  if (method == "disr") return disr_rank(data, k);
  if (method == "mrmr") return mrmr_rank(data, k);
  throw ConfigError("unknown selection method '" + std::string(method) + "'");
}

TrainedModel fit_regressor(const Matrix& x, std::span<const double> y, std::span<const std::size_t> features,
                           const ExperimentConfig& c) {
  if (features.empty()) throw ContractError("fit_regressor: no features");
  Matrix sub = x.select_columns(features);
  TrainedModel model;
  model.features.assign(features.begin(), features.end());
  model.norm = Normalizer::fit(sub);
  model.params = init_params(features.size(), c.hidden, fed::derive_seed(c.seed, kFitInit));
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.lr = c.lr;
  t.seed = fed::derive_seed(c.seed, kFitTrain);
  train(model.params, sub, y, model.norm, t);
  return model;
}

std::vector<MethodResult> compare_selectors(const Matrix& train_x, std::span<const double> train_y,
                                            const Matrix& test_x, std::span<const double> test_y,
                                            std::span<const std::string> methods, const ExperimentConfig& c) {
  const std::size_t m = train_x.cols();
  if (c.k < 1 || c.k > m)
    throw ConfigError("k must be between 1 and " + std::to_string(m) + ", got " + std::to_string(c.k));
  const auto names = expand_methods(methods);
  const auto data = discretize_dataset(train_x, train_y, selection_bins(c));
  const auto ce = ce_params(c);

  std::vector<MethodResult> out;
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), 0);
  MethodResult none{"none", FeatureMask(m, true), std::vector<double>(m, 1.0), 0.0};
  none.rmse = fit_regressor(train_x, train_y, all, c).rmse(test_x, test_y);
  out.push_back(std::move(none));

  for (const auto& name : names) {
    auto sel = run_selector(name, train_x, train_y, data, c.k, ce);
    MethodResult r{name, sel.mask, std::vector<double>(m, 0.0), 0.0};
    if (name == "ce") {
      r.rank_or_prob = sel.distribution.p;
    } else {
      for (std::size_t i = 0; i < sel.ranking.size(); ++i) r.rank_or_prob[sel.ranking[i]] = static_cast<double>(i + 1);
    }
    r.rmse = fit_regressor(train_x, train_y, mask_indices(sel.mask), c).rmse(test_x, test_y);
    out.push_back(std::move(r));
  }
  return out;
}

void write_selection_csv(std::ostream& out, std::span<const MethodResult> results) {
  out << "method,feature_index,feature_name,selected,rank_or_prob\n";
  for (const auto& r : results) {
    if (r.method == "none") continue;
    for (std::size_t j = 0; j < r.mask.size(); ++j) {
      out << r.method << ',' << j << ',' << (j < kFeatureNames.size() ? kFeatureNames[j] : std::string_view("x"))
          << ',' << (r.mask[j] ? 1 : 0) << ',' << detail::format_double(r.rank_or_prob[j]) << '\n';
    }
  }
}

}  // namespace quicfed
