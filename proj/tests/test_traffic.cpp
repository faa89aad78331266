#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "quicfed/error.hpp"
#include "quicfed/traffic.hpp"

using namespace quicfed;

namespace {

// Hyndman-Fan type 7 written from the 1-based definition.
double reference_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p + 1.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= v.size()) return v.back();
  return v[lo - 1] + (h - static_cast<double>(lo)) * (v[lo] - v[lo - 1]);
}

std::vector<PacketRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in);
}

PacketRecord pkt(double t, std::uint32_t len, bool quic, Service s = Service::Other) { return {t, len, quic, s}; }

}  // namespace

TEST_CASE("parse_trace reads rows in order") {
  auto r = parse("timestamp,length,is_quic,service\n0.0,100,1,search\n0.5,200,0,other\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0] == pkt(0.0, 100, true, Service::Search));
  CHECK(r[1] == pkt(0.5, 200, false, Service::Other));
}

TEST_CASE("parse_trace rejects a zero length and names the line") {
  try {
    parse("timestamp,length,is_quic,service\n0.0,100,1,search\n0.5,0,0,other\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("parse_trace sorts stably by timestamp") {
  auto r = parse("timestamp,length,is_quic,service\n2.0,10,0,docs\n1.0,20,0,docs\n2.0,30,1,docs\n");
  REQUIRE(r.size() == 3);
  CHECK(r[0].timestamp == 1.0);
  CHECK(r[1].length == 10);
  CHECK(r[2].length == 30);
}

TEST_CASE("parse_trace edge cases") {
  CHECK(parse("").empty());
  CHECK(parse("timestamp,length,is_quic,service\n").empty());
  CHECK_THROWS_AS(parse("time,length,is_quic,service\n"), ParseError);
  CHECK_THROWS_AS(parse("timestamp,length,is_quic,service\n1.0,10,2,docs\n"), ParseError);
  CHECK_THROWS_AS(parse("timestamp,length,is_quic,service\n1.0,10,1,netflix\n"), ParseError);
  CHECK_THROWS_AS(parse("timestamp,length,is_quic,service\n-1.0,10,1,docs\n"), ParseError);
  CHECK_THROWS_AS(parse("timestamp,length,is_quic,service\nnan,10,1,docs\n"), ParseError);
  CHECK_THROWS_AS(parse_trace(std::filesystem::path("/nonexistent/trace.csv")), IoError);
}

TEST_CASE("write_trace round-trips") {
  auto recs = generate_synthetic_trace(SyntheticTraceConfig::defaults(), 5.0, 3);
  std::stringstream s;
  write_trace(s, recs);
  CHECK(parse_trace(s) == recs);
}

TEST_CASE("synthetic trace with only QUIC sessions") {
  SyntheticTraceConfig cfg = SyntheticTraceConfig::defaults();
  for (auto& c : cfg.classes) c.quic_share = 1.0;
  cfg.background_rate = 0.0;
  auto recs = generate_synthetic_trace(cfg, 10.0, 1);
  REQUIRE(!recs.empty());
  CHECK(std::all_of(recs.begin(), recs.end(), [](const PacketRecord& r) { return r.is_quic; }));
}

TEST_CASE("synthetic trace is deterministic") {
  auto cfg = SyntheticTraceConfig::defaults();
  std::stringstream a, b;
  write_trace(a, generate_synthetic_trace(cfg, 30.0, 42));
  write_trace(b, generate_synthetic_trace(cfg, 30.0, 42));
  CHECK(a.str() == b.str());
  std::stringstream c;
  write_trace(c, generate_synthetic_trace(cfg, 30.0, 43));
  CHECK(a.str() != c.str());
}

TEST_CASE("synthetic sub-population means follow the configuration") {
  SyntheticTraceConfig cfg;
  ClassProfile p;
  p.service = Service::Drive;
  p.session_rate = 0.5;
  p.mean_session_s = 10.0;
  p.quic_share = 0.5;
  p.packet_rate = 30.0;
  p.quic_mean_length = 1200;
  p.tcp_mean_length = 400;
  cfg.classes = {p};
  cfg.background_rate = 0.0;
  auto recs = generate_synthetic_trace(cfg, 60.0, 9);
  double sq = 0, st = 0;
  std::size_t nq = 0, nt = 0;
  for (const auto& r : recs) (r.is_quic ? (sq += r.length, ++nq) : (st += r.length, ++nt));
  REQUIRE(nq > 100);
  REQUIRE(nt > 100);
  CHECK(std::abs(sq / nq - 1200.0) < 120.0);
  CHECK(std::abs(st / nt - 400.0) < 40.0);
}

TEST_CASE("synthetic trace validates its configuration") {
  auto cfg = SyntheticTraceConfig::defaults();
  CHECK_THROWS_AS(generate_synthetic_trace(cfg, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_trace(cfg, -5.0, 1), ConfigError);
  cfg.classes[0].session_rate = 0.0;
  CHECK_THROWS_AS(generate_synthetic_trace(cfg, 10.0, 1), ConfigError);
  cfg = SyntheticTraceConfig::defaults();
  cfg.classes[1].packet_rate = -1.0;
  CHECK_THROWS_AS(generate_synthetic_trace(cfg, 10.0, 1), ConfigError);
}

TEST_CASE("extract_features labels and constant lengths") {
  std::vector<PacketRecord> w;
  for (int i = 0; i < 10; ++i) w.push_back(pkt(0.05 * i, 300, i % 2 == 0, i < 3 ? Service::YouTube : Service::Docs));
  auto rows = extract_features(w);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label_quic == 0.5);
  CHECK(rows[0].label_service == doctest::Approx(0.3));
  CHECK(rows[0].n_packets == 10);
  CHECK(rows[0].len_p25 == 300);
  CHECK(rows[0].len_p50 == 300);
  CHECK(rows[0].len_p75 == 300);
  CHECK(rows[0].len_p90 == 300);
}

TEST_CASE("length percentiles use linear interpolation") {
  std::vector<PacketRecord> w = {pkt(0.0, 100, false), pkt(0.1, 200, false), pkt(0.3, 300, false),
                                 pkt(0.6, 400, false)};
  auto rows = extract_features(w);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].len_p50 == 250.0);
  const std::vector<double> lens = {100, 200, 300, 400};
  CHECK(rows[0].len_p25 == doctest::Approx(reference_quantile(lens, 0.25)).epsilon(1e-15));
  CHECK(rows[0].len_p90 == doctest::Approx(reference_quantile(lens, 0.90)).epsilon(1e-15));
  const std::vector<double> iats = {0.1, 0.2, 0.3};
  CHECK(rows[0].iat_p50 == doctest::Approx(reference_quantile(iats, 0.5)));
  CHECK(rows[0].iat_p75 == doctest::Approx(reference_quantile(iats, 0.75)));
}

TEST_CASE("percentiles agree with the reference quantile on random windows") {
  auto recs = generate_synthetic_trace(SyntheticTraceConfig::defaults(), 30.0, 5);
  auto rows = extract_features(recs);
  const double t0 = recs.front().timestamp;
  std::map<long, std::vector<double>> lens;
  for (const auto& r : recs) lens[static_cast<long>(std::floor(r.timestamp - t0))].push_back(r.length);
  REQUIRE(rows.size() == lens.size());
  std::size_t i = 0;
  for (auto& [k, v] : lens) {
    CHECK(rows[i].len_p75 == doctest::Approx(reference_quantile(v, 0.75)).epsilon(1e-12));
    CHECK(rows[i].n_packets == static_cast<double>(v.size()));
    ++i;
  }
}

TEST_CASE("windows: single packets, gaps and custom widths") {
  std::vector<PacketRecord> recs = {pkt(10.0, 50, true), pkt(12.5, 60, false), pkt(12.7, 70, false)};
  auto rows = extract_features(recs);
  REQUIRE(rows.size() == 2);  // the empty window [11,12) is skipped
  CHECK(rows[0].iat_p25 == 0.0);
  CHECK(rows[0].iat_p90 == 0.0);
  CHECK(rows[0].label_quic == 1.0);
  CHECK(rows[1].n_packets == 2);
  CHECK(rows[1].iat_p50 == doctest::Approx(0.2));

  auto wide = extract_features(recs, {5.0, Service::YouTube});
  REQUIRE(wide.size() == 1);
  CHECK(wide[0].n_packets == 3);
  CHECK(extract_features(std::vector<PacketRecord>{}).empty());
  CHECK_THROWS_AS(extract_features(recs, {0.0, Service::YouTube}), ConfigError);
}

TEST_CASE("extract_features rejects unsorted input") {
  std::vector<PacketRecord> recs = {pkt(2.0, 50, true), pkt(1.0, 60, false)};
  CHECK_THROWS_AS(extract_features(recs), ContractError);
}

TEST_CASE("feature invariants on a synthetic trace") {
  auto recs = generate_synthetic_trace(SyntheticTraceConfig::defaults(), 120.0, 11);
  auto rows = extract_features(recs);
  std::size_t quic_total = 0;
  for (const auto& r : recs) quic_total += r.is_quic;
  double reconstructed = 0.0;
  for (const auto& r : rows) {
    CHECK(r.n_packets >= 1);
    CHECK(r.iat_p25 <= r.iat_p50);
    CHECK(r.iat_p50 <= r.iat_p75);
    CHECK(r.iat_p75 <= r.iat_p90);
    CHECK(r.len_p25 <= r.len_p50);
    CHECK(r.len_p50 <= r.len_p75);
    CHECK(r.len_p75 <= r.len_p90);
    CHECK(r.label_quic >= 0.0);
    CHECK(r.label_quic <= 1.0);
    CHECK(r.label_service >= 0.0);
    CHECK(r.label_service <= 1.0);
    reconstructed += std::round(r.label_quic * r.n_packets);
  }
  CHECK(static_cast<std::size_t>(reconstructed) == quic_total);
  CHECK(extract_features(recs) == rows);
}

TEST_CASE("feature CSV round-trips exactly") {
  auto rows = extract_features(generate_synthetic_trace(SyntheticTraceConfig::defaults(), 60.0, 2));
  std::stringstream s;
  write_feature_csv(s, rows);
  std::string header;
  std::getline(s, header);
  CHECK(header == "n_packets,iat_p25,iat_p50,iat_p75,iat_p90,len_p25,len_p50,len_p75,len_p90,label_quic,label_service");
  s.seekg(0);
  CHECK(read_feature_csv(s) == rows);

  std::istringstream bad("n_packets,iat_p25,iat_p50,iat_p75,iat_p90,len_p25,len_p50,len_p75,len_p90,label_quic,label_service\n"
                         "3,0,0,0,0,1,1,1,1,1.5,0\n");
  CHECK_THROWS_AS(read_feature_csv(bad), ParseError);
}

TEST_CASE("split_dataset sizes") {
  std::vector<FeatureRow> rows(1000);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].n_packets = static_cast<double>(i + 1);
  auto s = split_dataset(rows, 0.2, 10, 7);
  CHECK(s.server_set.size() == 200);
  REQUIRE(s.gateway_sets.size() == 10);
  for (const auto& g : s.gateway_sets) CHECK(g.size() == 80);

  std::vector<FeatureRow> small(rows.begin(), rows.begin() + 101);
  auto t = split_dataset(small, 0.2, 10, 7);
  CHECK(t.server_set.size() == 20);
  std::size_t lo = 1000, hi = 0;
  for (const auto& g : t.gateway_sets) {
    lo = std::min(lo, g.size());
    hi = std::max(hi, g.size());
  }
  CHECK(lo == 8);
  CHECK(hi == 9);
}

TEST_CASE("split_dataset is a seeded partition") {
  std::vector<FeatureRow> rows(257);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].n_packets = static_cast<double>(i % 50 + 1);
  auto a = split_dataset(rows, 0.3, 4, 99);
  auto b = split_dataset(rows, 0.3, 4, 99);
  CHECK(a.server_set == b.server_set);
  CHECK(a.gateway_sets == b.gateway_sets);
  CHECK(a.seed == 99);

  std::multiset<double> in, out;
  for (const auto& r : rows) in.insert(r.n_packets);
  for (const auto& r : a.server_set) out.insert(r.n_packets);
  for (const auto& g : a.gateway_sets)
    for (const auto& r : g) out.insert(r.n_packets);
  CHECK(in == out);

  auto c = split_dataset(rows, 0.3, 4, 100);
  CHECK(c.server_set != a.server_set);
}

TEST_CASE("split_dataset errors") {
  std::vector<FeatureRow> rows(10);
  CHECK_THROWS_AS(split_dataset(rows, 0.2, 10, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset({}, 0.2, 1, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(rows, 0.0, 2, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(rows, 1.0, 2, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(rows, 0.2, 0, 1), ConfigError);
  CHECK_NOTHROW(split_dataset(rows, 0.2, 9, 1));
}
