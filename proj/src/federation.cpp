#include "quicfed/federation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "csv_util.hpp"
#include "quicfed/codec.hpp"
#include "quicfed/error.hpp"

namespace quicfed::fed {

namespace {

enum Stream : std::uint64_t { kInit = 1, kPretrain, kLocalTrain, kLocalSelect, kCentral };

std::vector<std::size_t> all_columns(std::size_t m) {
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

TrainConfig train_config(const FederationConfig& c, std::size_t epochs, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = c.batch_size;
  t.lr = c.lr;
  t.seed = seed;
  return t;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double test_rmse(const Federation& fed) {
  if (fed.test_x.empty()) return 0.0;
  return fed.server.global().rmse(fed.test_x, fed.test_y);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(splitmix(base) ^ stream) ^ a) ^ b);
}

std::string_view to_token(Mode mode) {
  switch (mode) {
    case Mode::CR: return "CR";
    case Mode::FR: return "FR";
    case Mode::RFR: return "RFR";
  }
  return "?";
}

std::optional<Mode> mode_from_token(std::string_view token) {
  std::string up(token);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "CR") return Mode::CR;
  if (up == "FR") return Mode::FR;
  if (up == "RFR") return Mode::RFR;
  return std::nullopt;
}

TrainedModel EdgeServer::global() const {
  auto cols = mask_indices(mask);
  return TrainedModel{global_model, norm.restrict_to(cols), cols};
}

Federation make_federation(const DatasetSplit& split, std::span<const FeatureRow> test_rows) {
  if (split.server_set.empty()) throw ContractError("make_federation: empty labeled set");
  Federation fed;
  fed.server.labeled_x = feature_matrix(split.server_set);
  fed.server.labeled_y = quic_labels(split.server_set);
  fed.server.mask.assign(kNumFeatures, true);
  for (std::size_t l = 0; l < split.gateway_sets.size(); ++l) {
    GatewayNode g;
    g.id = l;
    g.local_rows = feature_matrix(split.gateway_sets[l]);
    fed.gateways.push_back(std::move(g));
    fed.hidden.per_gateway.push_back(quic_labels(split.gateway_sets[l]));
  }
  fed.test_x = feature_matrix(test_rows);
  fed.test_y = quic_labels(test_rows);
  return fed;
}

Convergence check_convergence(const MlpParams& prev, const MlpParams& curr, double threshold) {
  if (!prev.same_shape(curr)) throw ContractError("check_convergence: shape mismatch");
  auto a = prev.values();
  auto b = curr.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(b[i] - a[i]) / (std::abs(a[i]) + 1e-12);
  Convergence c;
  c.weight_delta = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
  c.converged = c.weight_delta < threshold;
  return c;
}

RoundReport step0_pretrain(Federation& fed, const FederationConfig& config) {
  auto& server = fed.server;
  if (server.labeled_x.empty()) throw ContractError("step0_pretrain: empty labeled set");
  if (config.hidden < 1) throw ConfigError("step0_pretrain: hidden width must be positive");
  const std::size_t m = server.labeled_x.cols();
  server.merge_momentum = config.merge_momentum;
  server.mask.assign(m, true);
  server.norm = Normalizer::fit(server.labeled_x);
  server.global_model = init_params(m, config.hidden, derive_seed(config.seed, kInit));
  train(server.global_model, server.labeled_x, server.labeled_y, server.norm,
        train_config(config, config.pretrain_epochs, derive_seed(config.seed, kPretrain)));

  RoundReport rep;
  rep.round = 0;
  const auto msg = codec::encode_model(server.global_model);
  for (auto& g : fed.gateways) {
    g.received_global = codec::decode_model(msg);
    g.norm = server.norm;
    g.mask = server.mask;
    rep.downlink.federation += msg.size();
  }
  rep.features = all_columns(m);
  rep.rmse_global = test_rmse(fed);
  return rep;
}

RoundReport run_round(Federation& fed, Mode mode, std::size_t round, const FederationConfig& config) {
  if (mode == Mode::CR) throw ContractError("run_round: CR has no federated rounds");
  auto& server = fed.server;
  if (server.global_model.size() == 0) throw ContractError("run_round: step 0 has not run");
  if (fed.gateways.empty()) throw ContractError("run_round: no gateways");

  RoundReport rep;
  rep.round = round;

  // Step 1: soft labels from the model each gateway last received.
  for (auto& g : fed.gateways) {
    auto cols = mask_indices(g.mask);
    g.soft_labels = soft_label(g.received_global, g.local_rows.select_columns(cols), g.norm.restrict_to(cols));
  }

  // Steps 2-3: local selection on soft labels, size-weighted merge, broadcast.
  const bool select = mode == Mode::RFR && (config.fs_every_round || round <= 1);
  FeatureMask new_mask = server.mask;
  if (select) {
    std::vector<LocalDistribution> locals;
    std::size_t iterations = 0;
    for (auto& g : fed.gateways) {
      auto data = discretize_dataset(g.local_rows, g.soft_labels, config.fs_bins);
      CeParams ce = config.ce;
      ce.seed = derive_seed(config.seed, kLocalSelect, round, g.id);
      auto result = ce_select(data, ce);
      g.local_distribution = result.distribution;
      iterations += result.iterations;
      const auto up = codec::encode_distribution(g.local_distribution);
      rep.uplink.feature_selection += up.size();
      locals.push_back({codec::decode_distribution(up), g.local_rows.rows()});
    }
    rep.fs_iterations = (iterations + fed.gateways.size() - 1) / fed.gateways.size();
    server.global_distribution = aggregate_distributions(locals);
    new_mask = mask_from_distribution(server.global_distribution);
    const auto down = codec::encode_selection({server.global_distribution, new_mask});
    for (auto& g : fed.gateways) {
      g.mask = codec::decode_selection(down).mask;
      rep.downlink.feature_selection += down.size();
    }
  }

  // Step 4: local training on the broadcast mask.
  const auto cols = mask_indices(new_mask);
  std::vector<MlpParams> uploaded;
  std::vector<double> weights;
  std::size_t total_rows = 0;
  for (const auto& g : fed.gateways) total_rows += g.local_rows.rows();
  for (auto& g : fed.gateways) {
    if (g.mask != new_mask) throw ContractError("run_round: gateway mask diverged from the broadcast");
    // Start from the received global model when this gateway has trained for
    // the same mask before; otherwise from the shared initialisation.
    const bool warm = g.local_model.size() > 0 && g.local_model_mask == new_mask && g.received_global.inputs() == cols.size();
    g.local_model = warm ? g.received_global : init_params(cols.size(), config.hidden, derive_seed(config.seed, kInit));
    g.local_model_mask = new_mask;
    train(g.local_model, g.local_rows.select_columns(cols), g.soft_labels, g.norm.restrict_to(cols),
          train_config(config, config.local_epochs, derive_seed(config.seed, kLocalTrain, round, g.id)));
    const auto up = codec::encode_model(g.local_model);
    rep.uplink.federation += up.size();
    uploaded.push_back(codec::decode_model(up));
    weights.push_back(static_cast<double>(g.local_rows.rows()) / static_cast<double>(total_rows));
  }

  // Weights may miss 1 by rounding; renormalise exactly as average_models expects.
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= wsum;
  MlpParams avg = average_models(uploaded, weights);

  // Step 5: merge and broadcast.
  if (new_mask == server.mask && avg.same_shape(server.global_model)) {
    MlpParams merged = avg;
    const double mu = server.merge_momentum;
    auto out = merged.values();
    auto prev = server.global_model.values();
    auto a = avg.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - mu) * prev[i] + mu * a[i];
    auto conv = check_convergence(server.global_model, merged, config.threshold);
    rep.weight_delta = conv.weight_delta;
    rep.converged = conv.converged;
    server.global_model = std::move(merged);
  } else {
    // A new mask means a new network; there is nothing to blend with.
    rep.weight_delta = 1.0;
    rep.converged = false;
    server.global_model = std::move(avg);
    server.mask = new_mask;
  }
  const auto down = codec::encode_model(server.global_model);
  for (auto& g : fed.gateways) {
    g.received_global = codec::decode_model(down);
    rep.downlink.federation += down.size();
  }
  rep.features = cols;
  rep.rmse_global = test_rmse(fed);
  return rep;
}

RoundReport run_centralized(Federation& fed, const FederationConfig& config) {
  auto& server = fed.server;
  if (server.labeled_x.empty()) throw ContractError("run_centralized: empty labeled set");
  RoundReport rep;
  rep.round = 1;
  Matrix x = server.labeled_x;
  std::vector<double> y = server.labeled_y;
  for (auto& g : fed.gateways) {
    const auto up = codec::encode_rows(g.local_rows);
    rep.uplink.federation += up.size();
    Matrix rows = codec::decode_rows(up);
    for (std::size_t r = 0; r < rows.rows(); ++r) x.append_row(rows.row(r));
    const auto& labels = fed.hidden.per_gateway.at(g.id);
    y.insert(y.end(), labels.begin(), labels.end());
  }
  const std::size_t m = x.cols();
  server.mask.assign(m, true);
  server.norm = Normalizer::fit(x);
  server.global_model = init_params(m, config.hidden, derive_seed(config.seed, kInit));
  train(server.global_model, x, y, server.norm,
        train_config(config, config.pretrain_epochs, derive_seed(config.seed, kCentral)));
  rep.converged = true;
  rep.features = all_columns(m);
  rep.rmse_global = test_rmse(fed);
  return rep;
}

ExperimentReport run_experiment(Federation fed, Mode mode, const FederationConfig& config) {
  if (config.max_rounds < 1) throw ConfigError("run_experiment: max_rounds must be positive");
  if (!(config.merge_momentum >= 0.0 && config.merge_momentum <= 1.0))
    throw ConfigError("run_experiment: merge momentum must lie in [0,1]");
  ExperimentReport report;
  report.mode = mode;
  auto& t = report.totals;

  if (mode == Mode::CR) {
    report.rounds.push_back(run_centralized(fed, config));
    t.conv_rounds_federation = 1;
    t.converged = true;
  } else {
    report.rounds.push_back(step0_pretrain(fed, config));
    std::size_t fs_iterations = 0, fs_rounds = 0;
    for (std::size_t r = 1; r <= config.max_rounds; ++r) {
      report.rounds.push_back(run_round(fed, mode, r, config));
      const auto& rep = report.rounds.back();
      if (rep.fs_iterations > 0) {
        fs_iterations += rep.fs_iterations;
        ++fs_rounds;
      }
      t.conv_rounds_federation = r;
      if (rep.converged) {
        t.converged = true;
        break;
      }
    }
    t.conv_rounds_fs = fs_rounds == 0 ? 0 : (fs_iterations + fs_rounds - 1) / fs_rounds;
  }
  for (const auto& rep : report.rounds) t.bytes += rep.traffic();
  t.rmse = report.rounds.back().rmse_global;
  return report;
}

// ---- reports ----------------------------------------------------------------------

namespace {

nlohmann::ordered_json traffic_json(const Traffic& t) {
  return {{"federation", t.federation}, {"feature_selection", t.feature_selection}};
}

double megabytes(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

}  // namespace

std::string report_json(const ExperimentReport& report) {
  using nlohmann::ordered_json;
  ordered_json rounds = ordered_json::array();
  for (const auto& r : report.rounds) {
    rounds.push_back({{"round", r.round},
                      {"uplink_bytes", traffic_json(r.uplink)},
                      {"downlink_bytes", traffic_json(r.downlink)},
                      {"weight_delta", r.weight_delta},
                      {"rmse_global", r.rmse_global},
                      {"converged", r.converged},
                      {"features", r.features},
                      {"fs_iterations", r.fs_iterations}});
  }
  const auto& t = report.totals;
  const std::size_t fed_rounds = std::max<std::size_t>(1, t.conv_rounds_federation);
  ordered_json doc = {
      {"mode", std::string(to_token(report.mode))},
      {"rounds", rounds},
      {"totals",
       {{"traffic_mb",
         {{"federation", megabytes(t.bytes.federation)}, {"feature_selection", megabytes(t.bytes.feature_selection)}}},
        {"conv_rounds", {{"federation", t.conv_rounds_federation}, {"feature_selection", t.conv_rounds_fs}}},
        {"rmse", t.rmse},
        {"converged", t.converged},
        {"total_bytes", t.bytes.total()},
        {"avg_round_traffic_mb", megabytes(t.bytes.total()) / static_cast<double>(fed_rounds)}}}};
  return doc.dump(2) + "\n";
}

void write_round_csv(std::ostream& out, const ExperimentReport& report) {
  out << "round,uplink_bytes,downlink_bytes,fs_bytes,weight_delta,rmse\n";
  for (const auto& r : report.rounds) {
    out << r.round << ',' << r.uplink.total() << ',' << r.downlink.total() << ','
        << r.uplink.feature_selection + r.downlink.feature_selection << ',' << detail::format_double(r.weight_delta)
        << ',' << detail::format_double(r.rmse_global) << '\n';
  }
}

std::string totals_line(const ExperimentReport& report) {
  const auto& t = report.totals;
  std::ostringstream s;
  s << to_token(report.mode) << " traffic_mb=" << detail::format_double(megabytes(t.bytes.total()))
    << " (federation=" << detail::format_double(megabytes(t.bytes.federation))
    << " feature_selection=" << detail::format_double(megabytes(t.bytes.feature_selection)) << ")"
    << " rounds=" << t.conv_rounds_federation << "/" << t.conv_rounds_fs
    << " rmse=" << detail::format_double(t.rmse) << (t.converged ? "" : " not-converged");
  return s.str();
}

}  // namespace quicfed::fed
