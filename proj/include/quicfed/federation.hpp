#pragma once

// In-process simulation of the edge-server / gateway protocol: supervised
// pretraining (step 0), soft labelling, optional federated feature selection,
// local training and model merging, with every message passed through the
// codec so traffic is counted in serialized bytes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quicfed/featsel.hpp"
#include "quicfed/matrix.hpp"
#include "quicfed/regressor.hpp"
#include "quicfed/traffic.hpp"

namespace quicfed::fed {

enum class Mode : std::uint8_t { CR, FR, RFR };

std::string_view to_token(Mode mode);  // "CR", "FR", "RFR"
// Case-insensitive.
std::optional<Mode> mode_from_token(std::string_view token);

struct Traffic {
  std::uint64_t federation = 0;         // models, raw rows
  std::uint64_t feature_selection = 0;  // selection distributions and masks

  std::uint64_t total() const noexcept { return federation + feature_selection; }
  Traffic& operator+=(const Traffic& o) {
    federation += o.federation;
    feature_selection += o.feature_selection;
    return *this;
  }
  friend bool operator==(const Traffic&, const Traffic&) = default;
};

struct RoundReport {
  std::size_t round = 0;  // 0 is the step-0 broadcast
  Traffic uplink;
  Traffic downlink;
  double weight_delta = 0.0;
  double rmse_global = 0.0;  // on the held-out test rows
  bool converged = false;
  std::vector<std::size_t> features;  // columns the global model reads after this round
  std::size_t fs_iterations = 0;      // mean cross-entropy iterations over gateways, rounded up

  Traffic traffic() const {
    Traffic t = uplink;
    t += downlink;
    return t;
  }
};

struct Totals {
  Traffic bytes;
  std::size_t conv_rounds_federation = 0;
  std::size_t conv_rounds_fs = 0;
  double rmse = 0.0;
  bool converged = false;
};

struct ExperimentReport {
  Mode mode = Mode::FR;
  std::vector<RoundReport> rounds;
  Totals totals;
};

struct FederationConfig {
  std::size_t hidden = 16;
  std::size_t pretrain_epochs = 50;  // step 0 and the centralized baseline
  std::size_t local_epochs = 50;
  std::size_t batch_size = 32;
  double lr = 0.001;
  double merge_momentum = 0.5;  // global <- (1 - mu) global + mu average
  std::size_t max_rounds = 50;
  double threshold = 0.01;
  bool fs_every_round = true;
  CeParams ce;
  DiscretizationOptions fs_bins{3, 3, BinStrategy::EqualFrequency};
  std::uint64_t seed = 0;
};

// ---- protocol state -------------------------------------------------------------------

// What a gateway can see: feature rows only. Ground truth for these rows lives
// in HiddenLabels, which the protocol steps never receive.
struct GatewayNode {
  std::size_t id = 0;
  Matrix local_rows;
  MlpParams received_global;  // last model broadcast by the server
  Normalizer norm;            // full-width statistics received at step 0
  FeatureMask mask;           // active mask received from the server
  MlpParams local_model;
  FeatureMask local_model_mask;  // mask local_model was trained for
  std::vector<double> soft_labels;
  SelectionDistribution local_distribution;
};

struct EdgeServer {
  Matrix labeled_x;
  std::vector<double> labeled_y;
  Normalizer norm;  // fitted on the labeled set at step 0
  MlpParams global_model;
  FeatureMask mask;  // columns global_model reads
  SelectionDistribution global_distribution;
  double merge_momentum = 0.5;

  TrainedModel global() const;
};

struct HiddenLabels {
  std::vector<std::vector<double>> per_gateway;
};

struct Federation {
  EdgeServer server;
  std::vector<GatewayNode> gateways;
  HiddenLabels hidden;
  Matrix test_x;
  std::vector<double> test_y;
};

Federation make_federation(const DatasetSplit& split, std::span<const FeatureRow> test_rows);

// ---- protocol steps --------------------------------------------------------------------

// Supervised training on the labeled set and broadcast to every gateway.
RoundReport step0_pretrain(Federation& fed, const FederationConfig& config);

// Steps 1-5 once. Throws ContractError for Mode::CR.
RoundReport run_round(Federation& fed, Mode mode, std::size_t round, const FederationConfig& config);

// Gateways upload their rows once; the server trains on the union with the
// labels it holds for them (centralized labelling).
RoundReport run_centralized(Federation& fed, const FederationConfig& config);

struct Convergence {
  double weight_delta = 0.0;
  bool converged = false;
};

// mean_i |curr_i - prev_i| / (|prev_i| + 1e-12), converged when below threshold.
Convergence check_convergence(const MlpParams& prev, const MlpParams& curr, double threshold = 0.01);

// Step 0 then rounds until convergence or max_rounds (CR: a single upload round).
ExperimentReport run_experiment(Federation fed, Mode mode, const FederationConfig& config);

// ---- reports ---------------------------------------------------------------------------

std::string report_json(const ExperimentReport& report);
void write_round_csv(std::ostream& out, const ExperimentReport& report);
// One line: mode, traffic, rounds, rmse.
std::string totals_line(const ExperimentReport& report);

// Deterministic per-purpose seed streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace quicfed::fed
