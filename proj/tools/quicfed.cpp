// quicfed command-line tool: synth, extract, select, federate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quicfed/benchmark.hpp"
#include "quicfed/error.hpp"
#include "quicfed/experiment.hpp"

namespace fs = std::filesystem;
using namespace quicfed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> set;  // extra key=value overrides
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.set, "override any config key, as key=value")->take_all();
}

ExperimentConfig build_config(const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) load_config(c, fs::path(f.config));
  for (const auto& kv : f.set) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  return c;
}

fs::path output_dir(const ExperimentConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated QUIC traffic share estimation: feature extraction, selection and federation"};
  app.require_subcommand(1);

  CommonFlags synth_f, extract_f, select_f, fed_f;
  std::optional<double> duration, window, extract_window;
  std::string trace_in, features_in;
  std::optional<std::string> methods, mode;
  std::optional<std::size_t> k, gateways;
  bool planted = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic packet trace");
  add_common(synth, synth_f);
  synth->add_option("--duration", duration, "trace length in seconds");

  auto* extract = app.add_subcommand("extract", "window a packet trace into the feature CSV");
  add_common(extract, extract_f);
  extract->add_option("trace", trace_in, "trace CSV (timestamp,length,is_quic,service)");
  extract->add_option("--window", extract_window, "window length in seconds");

  auto* select = app.add_subcommand("select", "compare feature selectors and their regressor RMSE");
  add_common(select, select_f);
  select->add_option("features", features_in, "feature CSV (default: synthetic trace)");
  select->add_option("--methods", methods, "comma-separated: ce,anova,cmim,disr,mrmr or all");
  select->add_option("--k", k, "subset size for the ranking methods");
  select->add_option("--window", window, "window length when windowing a trace");
  select->add_flag("--planted", planted, "use the planted-subset benchmark instead of traffic data");

  auto* federate = app.add_subcommand("federate", "run a CR, FR or RFR experiment");
  add_common(federate, fed_f);
  federate->add_option("--mode", mode, "CR, FR or RFR");
  federate->add_option("--gateways", gateways, "number of gateways");
  federate->add_option("--window", window, "window length in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      auto c = build_config(synth_f);
      if (duration) c.duration = *duration;
      auto records = generate_synthetic_trace(SyntheticTraceConfig::defaults(), c.duration, c.seed);
      auto path = output_dir(c) / "trace.csv";
      auto out = open_output(path);
      write_trace(out, records);
      std::cout << "wrote " << records.size() << " packets to " << path.string() << "\n";
    } else if (extract->parsed()) {
      auto c = build_config(extract_f);
      if (extract_window) c.window = *extract_window;
      if (!trace_in.empty()) c.trace = trace_in;
      if (c.trace.empty()) throw ConfigError("extract needs a trace file");
      require_file(c.trace);
      auto service = service_from_token(c.target_service);
      if (!service) throw ConfigError("unknown target_service '" + c.target_service + "'");
      auto rows = extract_features(parse_trace(fs::path(c.trace)), {c.window, *service});
      auto path = output_dir(c) / "features.csv";
      auto out = open_output(path);
      write_feature_csv(out, rows);
      std::cout << "wrote " << rows.size() << " rows to " << path.string() << "\n";
    } else if (select->parsed()) {
      auto c = build_config(select_f);
      if (methods) apply_setting(c, "methods", *methods);
      if (k) c.k = *k;
      if (window) c.window = *window;
      if (!features_in.empty()) c.features = features_in;
      if (!c.features.empty()) require_file(c.features);
      if (!c.trace.empty()) require_file(c.trace);
      // Validate before any data is generated or read.
      expand_methods(c.methods);
      if (c.k < 1 || c.k > kNumFeatures)
        throw ConfigError("--k must be between 1 and " + std::to_string(kNumFeatures));

      Matrix train_x, test_x;
      std::vector<double> train_y, test_y;
      if (planted) {
        auto d = bench::make_planted({}, c.seed);
        std::vector<std::size_t> tr, te;
        const std::size_t n_test = d.x.rows() / 5;
        for (std::size_t i = 0; i < d.x.rows(); ++i) (i < d.x.rows() - n_test ? tr : te).push_back(i);
        train_x = d.x.select_rows(tr);
        test_x = d.x.select_rows(te);
        for (auto i : tr) train_y.push_back(d.y[i]);
        for (auto i : te) test_y.push_back(d.y[i]);
      } else {
        auto data = prepare_data(c);
        train_x = feature_matrix(data.train);
        train_y = quic_labels(data.train);
        test_x = feature_matrix(data.test);
        test_y = quic_labels(data.test);
      }
      auto results = compare_selectors(train_x, train_y, test_x, test_y, c.methods, c);
      auto dir = output_dir(c);
      {
        auto out = open_output(dir / "selection.csv");
        write_selection_csv(out, results);
      }
      auto out = open_output(dir / "rmse.csv");
      out << "method,n_features,rmse\n" << std::setprecision(17);
      std::printf("%-8s %-10s %s\n", "method", "features", "rmse");
      for (const auto& r : results) {
        auto idx = mask_indices(r.mask);
        std::string set;
        for (auto i : idx) set += std::to_string(i + 1);
        out << r.method << ',' << idx.size() << ',' << r.rmse << '\n';
        std::printf("%-8s %-10s %.6f\n", r.method.c_str(), set.c_str(), r.rmse);
      }
    } else if (federate->parsed()) {
      auto c = build_config(fed_f);
      if (mode) apply_setting(c, "mode", *mode);
      if (gateways) c.gateways = *gateways;
      if (window) c.window = *window;
      if (!c.features.empty()) require_file(c.features);
      if (!c.trace.empty()) require_file(c.trace);
      experiment_mode(c);
      auto report = run_experiment(c);
      auto dir = output_dir(c);
      {
        auto out = open_output(dir / "report.json");
        out << fed::report_json(report);
      }
      auto out = open_output(dir / "rounds.csv");
      fed::write_round_csv(out, report);
      std::cout << fed::totals_line(report) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
