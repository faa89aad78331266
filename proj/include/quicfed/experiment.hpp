#pragma once

// Experiment configuration shared by the command-line tool and the Python
// module: a flat key=value file, data preparation, and the selector
// comparison.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quicfed/featsel.hpp"
#include "quicfed/federation.hpp"
#include "quicfed/traffic.hpp"

namespace quicfed {

struct ExperimentConfig {
  // Data source. `features` (feature CSV) wins over `trace` (trace CSV); with
  // neither, a synthetic trace of `duration` seconds is generated and a second
  // trace of `test_duration` seconds serves as the held-out set.
  std::string trace;
  std::string features;
  double duration = 8000.0;
  double test_duration = 2000.0;
  double test_frac = 0.2;  // held-out share for file sources
  double window = 1.0;
  std::string target_service = "youtube";

  // Discretization for the information-theoretic selectors.
  std::size_t feature_bins = 3;
  std::size_t target_bins = 3;

  std::vector<std::string> methods = {"all"};
  std::size_t k = 5;

  std::size_t ce_samples = 50;
  double ce_elite_fraction = 0.1;
  double ce_smoothing = 0.7;
  double ce_initial_p = 0.5;
  double ce_tolerance = 0.05;
  std::size_t ce_max_iters = 100;
  double ce_chance_penalty = 1.5;

  std::size_t hidden = 16;
  std::size_t epochs = 50;
  std::size_t local_epochs = 50;
  std::size_t batch_size = 32;
  double lr = 0.001;

  std::size_t gateways = 10;
  double server_frac = 0.2;
  std::string mode = "FR";
  double merge_momentum = 0.5;
  std::size_t max_rounds = 50;
  double threshold = 0.01;
  bool fs_every_round = true;

  std::uint64_t seed = 0;
  std::string out = "out";
};

// Sets one field by name. Throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
// `key = value` lines; blank lines and lines starting with '#' are ignored.
void load_config(ExperimentConfig& config, std::istream& in);
void load_config(ExperimentConfig& config, const std::filesystem::path& path);
// Every key accepted by apply_setting, in declaration order.
std::vector<std::string_view> config_keys();

fed::FederationConfig federation_config(const ExperimentConfig& config);
CeParams ce_params(const ExperimentConfig& config);
DiscretizationOptions selection_bins(const ExperimentConfig& config);
fed::Mode experiment_mode(const ExperimentConfig& config);

struct ExperimentData {
  std::vector<FeatureRow> train;
  std::vector<FeatureRow> test;
};

ExperimentData prepare_data(const ExperimentConfig& config);

fed::Federation make_federation(const ExperimentConfig& config, const ExperimentData& data);
fed::ExperimentReport run_experiment(const ExperimentConfig& config);

// ---- selector comparison ------------------------------------------------------------

inline constexpr std::array<std::string_view, 5> kSelectorNames = {"ce", "anova", "cmim", "disr", "mrmr"};

// Expands "all" and validates names. Throws ConfigError on unknown names.
std::vector<std::string> expand_methods(std::span<const std::string> methods);

struct MethodResult {
  std::string method;  // selector name, or "none" for all features
  FeatureMask mask;
  // Per feature: CE selection probability, or 1-based rank for incremental
  // methods (0 when not ranked).
  std::vector<double> rank_or_prob;
  double rmse = 0.0;
};

// Runs the selectors on `train`, fits one regressor per subset plus one on all
// features and measures RMSE on `test`. Results are ordered "none" first,
// then as requested.
std::vector<MethodResult> compare_selectors(const Matrix& train_x, std::span<const double> train_y,
                                            const Matrix& test_x, std::span<const double> test_y,
                                            std::span<const std::string> methods, const ExperimentConfig& config);

// Train/test split for file sources: seeded shuffle, round(test_frac * n) test rows.
ExperimentData holdout_split(std::span<const FeatureRow> rows, double test_frac, std::uint64_t seed);

// Single-run selection result for one method.
SelectionResult run_selector(std::string_view method, const Matrix& x, std::span<const double> y,
                             const DiscreteDataset& data, std::size_t k, const CeParams& ce);

// Fits a fresh regressor on the listed columns.
TrainedModel fit_regressor(const Matrix& x, std::span<const double> y, std::span<const std::size_t> features,
                           const ExperimentConfig& config);

void write_selection_csv(std::ostream& out, std::span<const MethodResult> results);

}  // namespace quicfed
