#pragma once

// Packet traces, 1-second window features and the server/gateway split.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quicfed/matrix.hpp"
#include "quicfed/quantile.hpp"

namespace quicfed {

enum class Service : std::uint8_t { Drive, Docs, Music, Search, YouTube, Other };

inline constexpr std::array<Service, 6> kAllServices = {
    Service::Drive, Service::Docs, Service::Music, Service::Search, Service::YouTube, Service::Other};

std::string_view to_token(Service s);
// Accepts the lowercase tokens written by to_token().
std::optional<Service> service_from_token(std::string_view token);

struct PacketRecord {
  double timestamp = 0.0;  // seconds
  std::uint32_t length = 0;
  bool is_quic = false;
  Service service = Service::Other;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

inline constexpr std::size_t kNumFeatures = 9;

// Column names of the feature matrix, in order.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "n_packets", "iat_p25", "iat_p50", "iat_p75", "iat_p90",
    "len_p25",   "len_p50", "len_p75", "len_p90"};

struct FeatureRow {
  double n_packets = 0.0;
  double iat_p25 = 0.0, iat_p50 = 0.0, iat_p75 = 0.0, iat_p90 = 0.0;
  double len_p25 = 0.0, len_p50 = 0.0, len_p75 = 0.0, len_p90 = 0.0;
  double label_quic = 0.0;
  double label_service = 0.0;

  std::array<double, kNumFeatures> features() const {
    return {n_packets, iat_p25, iat_p50, iat_p75, iat_p90, len_p25, len_p50, len_p75, len_p90};
  }

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

// Feature matrix (n x 9) of the rows, in order.
Matrix feature_matrix(std::span<const FeatureRow> rows);
std::vector<double> quic_labels(std::span<const FeatureRow> rows);

// ---- trace ingestion / synthesis -------------------------------------------

// Reads the trace CSV (`timestamp,length,is_quic,service`). Records are
// stably sorted by timestamp. Throws ParseError naming the 1-based line.
std::vector<PacketRecord> parse_trace(const std::filesystem::path& path);
std::vector<PacketRecord> parse_trace(std::istream& in);
void write_trace(std::ostream& out, std::span<const PacketRecord> records);

// Session model for one service class. Sessions arrive as a Poisson process;
// each lasts an exponential time and is QUIC with probability quic_share.
// Inside a session packets arrive at packet_rate with gamma-distributed sizes.
struct ClassProfile {
  Service service = Service::Other;
  double session_rate = 0.05;      // sessions per second
  double mean_session_s = 20.0;    // mean session duration
  double quic_share = 0.5;         // probability a session runs over QUIC
  double packet_rate = 20.0;       // packets per second while active
  double quic_mean_length = 1200;  // bytes
  double tcp_mean_length = 400;    // bytes, non-QUIC sessions
  double length_cv = 0.25;         // coefficient of variation of sizes
  double quic_iat_scale = 1.0;     // multiplies the IAT of QUIC sessions
};

struct SyntheticTraceConfig {
  std::vector<ClassProfile> classes;
  // Non-QUIC background packets per second (0 disables).
  double background_rate = 2.0;
  double background_mean_length = 200;

  // Five Google-like service classes plus background.
  static SyntheticTraceConfig defaults();
};

std::vector<PacketRecord> generate_synthetic_trace(const SyntheticTraceConfig& config,
                                                   double duration_s, std::uint64_t seed);

// ---- features ----------------------------------------------------------------

struct ExtractOptions {
  double window_s = 1.0;
  Service target_service = Service::YouTube;
};

// One row per non-empty window [t0 + k w, t0 + (k+1) w), t0 = first timestamp.
std::vector<FeatureRow> extract_features(std::span<const PacketRecord> records,
                                         const ExtractOptions& options = {});

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_feature_csv(std::istream& in);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

// ---- split -------------------------------------------------------------------

struct DatasetSplit {
  std::vector<FeatureRow> server_set;
  std::vector<std::vector<FeatureRow>> gateway_sets;
  std::uint64_t seed = 0;
};

// Seeded shuffle; round(server_frac * n) rows to the server, the rest dealt
// over num_gateways sets whose sizes differ by at most one.
DatasetSplit split_dataset(std::span<const FeatureRow> rows, double server_frac,
                           std::size_t num_gateways, std::uint64_t seed);

}  // namespace quicfed
