#include "quicfed/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "csv_util.hpp"
#include "quicfed/error.hpp"

namespace quicfed {

namespace {

constexpr std::string_view kTraceHeader = "timestamp,length,is_quic,service";
constexpr std::string_view kFeatureHeader =
    "n_packets,iat_p25,iat_p50,iat_p75,iat_p90,len_p25,len_p50,len_p75,len_p90,label_quic,"
    "label_service";

[[noreturn]] void fail_line(std::size_t line, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ": " + msg, line);
}

}  // namespace

std::string_view to_token(Service s) {
  switch (s) {
    case Service::Drive: return "drive";
    case Service::Docs: return "docs";
    case Service::Music: return "music";
    case Service::Search: return "search";
    case Service::YouTube: return "youtube";
    case Service::Other: return "other";
  }
  return "other";
}

std::optional<Service> service_from_token(std::string_view token) {
  for (Service s : kAllServices)
    if (to_token(s) == token) return s;
  return std::nullopt;
}

Matrix feature_matrix(std::span<const FeatureRow> rows) {
  Matrix x(rows.size(), kNumFeatures);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto f = rows[i].features();
    std::copy(f.begin(), f.end(), x.row(i).begin());
  }
  return x;
}

std::vector<double> quic_labels(std::span<const FeatureRow> rows) {
  std::vector<double> y(rows.size());
  std::transform(rows.begin(), rows.end(), y.begin(), [](const FeatureRow& r) { return r.label_quic; });
  return y;
}

// ---- trace CSV ---------------------------------------------------------------

std::vector<PacketRecord> parse_trace(std::istream& in) {
  std::vector<PacketRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    if (!seen_header) {
      if (text != kTraceHeader) fail_line(line_no, "expected header '" + std::string(kTraceHeader) + "'");
      seen_header = true;
      continue;
    }
    auto fields = detail::split_commas(text);
    if (fields.size() != 4) fail_line(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    PacketRecord rec;
    if (!detail::parse_number(fields[0], rec.timestamp) || !std::isfinite(rec.timestamp) ||
        rec.timestamp < 0.0)
      fail_line(line_no, "invalid timestamp '" + std::string(fields[0]) + "'");
    long long length = 0;
    if (!detail::parse_number(fields[1], length) || length < 1 || length > 0xFFFFFFFFLL)
      fail_line(line_no, "invalid length '" + std::string(fields[1]) + "' (must be >= 1)");
    rec.length = static_cast<std::uint32_t>(length);
    if (fields[2] == "1") {
      rec.is_quic = true;
    } else if (fields[2] == "0") {
      rec.is_quic = false;
    } else {
      fail_line(line_no, "is_quic must be 0 or 1");
    }
    auto service = service_from_token(fields[3]);
    if (!service) fail_line(line_no, "unknown service '" + std::string(fields[3]) + "'");
    rec.service = *service;
    records.push_back(rec);
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
  return records;
}

std::vector<PacketRecord> parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path.string());
  return parse_trace(in);
}

void write_trace(std::ostream& out, std::span<const PacketRecord> records) {
  out << kTraceHeader << '\n';
  for (const auto& r : records)
    out << detail::format_double(r.timestamp) << ',' << r.length << ',' << (r.is_quic ? 1 : 0) << ','
        << to_token(r.service) << '\n';
}

// ---- synthetic traces --------------------------------------------------------

SyntheticTraceConfig SyntheticTraceConfig::defaults() {
  SyntheticTraceConfig cfg;
  // service, session_rate, mean_session_s, quic_share, packet_rate,
  // quic_mean_length, tcp_mean_length, length_cv, quic_iat_scale
  cfg.classes = {
      {Service::Drive, 0.02, 30.0, 0.4, 30.0, 1250.0, 900.0, 0.25, 0.8},
      {Service::Docs, 0.03, 20.0, 0.5, 10.0, 700.0, 450.0, 0.35, 0.9},
      {Service::Music, 0.02, 60.0, 0.7, 15.0, 1150.0, 800.0, 0.20, 0.7},
      {Service::Search, 0.08, 5.0, 0.8, 8.0, 550.0, 300.0, 0.40, 0.8},
      {Service::YouTube, 0.02, 60.0, 0.8, 40.0, 1300.0, 1100.0, 0.15, 0.6},
  };
  cfg.background_rate = 2.0;
  cfg.background_mean_length = 200.0;
  return cfg;
}

namespace {

std::uint32_t draw_length(std::mt19937_64& rng, double mean, double cv) {
  double shape = 1.0 / (cv * cv);
  std::gamma_distribution<double> gamma(shape, mean / shape);
  double v = std::round(gamma(rng));
  return static_cast<std::uint32_t>(std::clamp(v, 1.0, 65535.0));
}

}  // namespace

std::vector<PacketRecord> generate_synthetic_trace(const SyntheticTraceConfig& config,
                                                   double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw ConfigError("synthetic trace: duration must be positive");
  if (config.classes.empty()) throw ConfigError("synthetic trace: no traffic classes configured");
  for (const auto& c : config.classes) {
    if (!(c.session_rate > 0.0) || !(c.packet_rate > 0.0) || !(c.mean_session_s > 0.0))
      throw ConfigError("synthetic trace: rates of class '" + std::string(to_token(c.service)) +
                        "' must be positive");
    if (c.quic_share < 0.0 || c.quic_share > 1.0 || !(c.length_cv > 0.0) ||
        !(c.quic_mean_length > 0.0) || !(c.tcp_mean_length > 0.0) || !(c.quic_iat_scale > 0.0))
      throw ConfigError("synthetic trace: invalid size/IAT parameters for class '" +
                        std::string(to_token(c.service)) + "'");
  }
  if (config.background_rate < 0.0) throw ConfigError("synthetic trace: negative background rate");

  std::mt19937_64 rng(seed);
  std::vector<PacketRecord> out;

  for (const auto& c : config.classes) {
    std::exponential_distribution<double> next_session(c.session_rate);
    std::exponential_distribution<double> session_len(1.0 / c.mean_session_s);
    std::bernoulli_distribution quic(c.quic_share);
    // Start the arrival process early so the trace begins in steady state.
    double t = -3.0 * c.mean_session_s;
    for (;;) {
      t += next_session(rng);
      if (t >= duration_s) break;
      double end = t + session_len(rng);
      bool is_quic = quic(rng);
      double rate = is_quic ? c.packet_rate / c.quic_iat_scale : c.packet_rate;
      double mean_len = is_quic ? c.quic_mean_length : c.tcp_mean_length;
      std::exponential_distribution<double> gap(rate);
      for (double pt = t + gap(rng); pt < end && pt < duration_s; pt += gap(rng)) {
        std::uint32_t len = draw_length(rng, mean_len, c.length_cv);
        if (pt >= 0.0) out.push_back({pt, len, is_quic, c.service});
      }
    }
  }
  if (config.background_rate > 0.0) {
    std::exponential_distribution<double> gap(config.background_rate);
    for (double pt = gap(rng); pt < duration_s; pt += gap(rng))
      out.push_back({pt, draw_length(rng, config.background_mean_length, 0.5), false, Service::Other});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

// ---- features ----------------------------------------------------------------

namespace {

FeatureRow summarize_window(std::span<const PacketRecord> w, Service target) {
  FeatureRow row;
  std::vector<double> lengths;
  std::vector<double> iats;
  lengths.reserve(w.size());
  std::size_t quic = 0, service = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    lengths.push_back(static_cast<double>(w[i].length));
    if (w[i].is_quic) ++quic;
    if (w[i].service == target) ++service;
    if (i > 0) iats.push_back(w[i].timestamp - w[i - 1].timestamp);
  }
  std::sort(lengths.begin(), lengths.end());
  std::sort(iats.begin(), iats.end());
  double n = static_cast<double>(w.size());
  row.n_packets = n;
  if (!iats.empty()) {
    row.iat_p25 = percentile_sorted(iats, 0.25);
    row.iat_p50 = percentile_sorted(iats, 0.50);
    row.iat_p75 = percentile_sorted(iats, 0.75);
    row.iat_p90 = percentile_sorted(iats, 0.90);
  }
  row.len_p25 = percentile_sorted(lengths, 0.25);
  row.len_p50 = percentile_sorted(lengths, 0.50);
  row.len_p75 = percentile_sorted(lengths, 0.75);
  row.len_p90 = percentile_sorted(lengths, 0.90);
  row.label_quic = static_cast<double>(quic) / n;
  row.label_service = static_cast<double>(service) / n;
  return row;
}

}  // namespace

std::vector<FeatureRow> extract_features(std::span<const PacketRecord> records,
                                         const ExtractOptions& options) {
  if (!(options.window_s > 0.0)) throw ConfigError("extract_features: window must be positive");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].timestamp < records[i - 1].timestamp)
      throw ContractError("extract_features: records are not sorted by timestamp (index " +
                          std::to_string(i) + ")");
  std::vector<FeatureRow> rows;
  if (records.empty()) return rows;

  const double t0 = records.front().timestamp;
  auto window_of = [&](const PacketRecord& r) {
    return static_cast<std::int64_t>(std::floor((r.timestamp - t0) / options.window_s));
  };
  std::size_t start = 0;
  while (start < records.size()) {
    std::int64_t k = window_of(records[start]);
    std::size_t end = start + 1;
    while (end < records.size() && window_of(records[end]) == k) ++end;
    rows.push_back(summarize_window(records.subspan(start, end - start), options.target_service));
    start = end;
  }
  return rows;
}

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows) {
  out << kFeatureHeader << '\n';
  for (const auto& r : rows) {
    auto f = r.features();
    for (double v : f) out << detail::format_double(v) << ',';
    out << detail::format_double(r.label_quic) << ',' << detail::format_double(r.label_service) << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(std::istream& in) {
  std::vector<FeatureRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    if (!seen_header) {
      if (text != kFeatureHeader) fail_line(line_no, "unexpected feature CSV header");
      seen_header = true;
      continue;
    }
    auto fields = detail::split_commas(text);
    if (fields.size() != 11) fail_line(line_no, "expected 11 fields, got " + std::to_string(fields.size()));
    double v[11];
    for (std::size_t i = 0; i < 11; ++i)
      if (!detail::parse_number(fields[i], v[i]) || !std::isfinite(v[i]))
        fail_line(line_no, "invalid number '" + std::string(fields[i]) + "'");
    FeatureRow r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
    if (r.label_quic < 0.0 || r.label_quic > 1.0 || r.label_service < 0.0 || r.label_service > 1.0)
      fail_line(line_no, "labels must lie in [0,1]");
    if (r.n_packets < 1.0) fail_line(line_no, "n_packets must be >= 1");
    rows.push_back(r);
  }
  return rows;
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path.string());
  return read_feature_csv(in);
}

// ---- split -------------------------------------------------------------------

DatasetSplit split_dataset(std::span<const FeatureRow> rows, double server_frac,
                           std::size_t num_gateways, std::uint64_t seed) {
  if (rows.empty()) throw ConfigError("split_dataset: no rows");
  if (!(server_frac > 0.0 && server_frac < 1.0)) throw ConfigError("split_dataset: server_frac must be in (0,1)");
  if (num_gateways < 1) throw ConfigError("split_dataset: need at least one gateway");
  if (rows.size() < num_gateways + 1)
    throw ConfigError("split_dataset: " + std::to_string(rows.size()) + " rows cannot feed " +
                      std::to_string(num_gateways) + " gateways and the server");

  std::size_t n = rows.size();
  auto n_server = static_cast<std::size_t>(std::llround(server_frac * static_cast<double>(n)));
  n_server = std::clamp<std::size_t>(n_server, 1, n - num_gateways);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  split.seed = seed;
  split.server_set.reserve(n_server);
  for (std::size_t i = 0; i < n_server; ++i) split.server_set.push_back(rows[order[i]]);

  std::size_t rest = n - n_server;
  std::size_t base = rest / num_gateways, extra = rest % num_gateways;
  split.gateway_sets.resize(num_gateways);
  std::size_t pos = n_server;
  for (std::size_t g = 0; g < num_gateways; ++g) {
    std::size_t size = base + (g < extra ? 1 : 0);
    auto& set = split.gateway_sets[g];
    set.reserve(size);
    for (std::size_t i = 0; i < size; ++i) set.push_back(rows[order[pos++]]);
  }
  return split;
}

}  // namespace quicfed
