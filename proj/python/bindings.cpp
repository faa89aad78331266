#include <algorithm>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "quicfed/benchmark.hpp"
#include "quicfed/error.hpp"
#include "quicfed/experiment.hpp"
#include "quicfed/infotheory.hpp"

namespace py = pybind11;
using namespace quicfed;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I64Array = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const F64Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
  return m;
}

F64Array from_matrix(const Matrix& m) {
  F64Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const F64Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

F64Array from_vector(const std::vector<double>& v) {
  F64Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Integer labels -> column with n_bins = max + 1.
DiscretizedColumn to_column(const I64Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D integer array");
  DiscretizedColumn c;
  c.bins.reserve(static_cast<std::size_t>(a.size()));
  std::int64_t hi = -1;
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    auto v = a.data()[i];
    if (v < 0) throw py::value_error("bin labels must be non-negative");
    c.bins.push_back(static_cast<std::uint32_t>(v));
    hi = std::max(hi, v);
  }
  c.n_bins = static_cast<std::size_t>(hi + 1);
  return c;
}

std::vector<DiscretizedColumn> to_columns(const std::vector<I64Array>& cols) {
  std::vector<DiscretizedColumn> out;
  for (const auto& c : cols) out.push_back(to_column(c));
  return out;
}

ColumnRefs refs(const std::vector<DiscretizedColumn>& cols) {
  ColumnRefs r;
  for (const auto& c : cols) r.push_back(&c);
  return r;
}

BinStrategy strategy_from(const std::string& s) {
  if (s == "equal_frequency") return BinStrategy::EqualFrequency;
  if (s == "equal_width") return BinStrategy::EqualWidth;
  throw py::value_error("strategy must be 'equal_frequency' or 'equal_width'");
}

ExperimentConfig config_from(const py::dict& settings) {
  ExperimentConfig c;
  for (auto item : settings) {
    auto key = py::str(item.first).cast<std::string>();
    std::string value;
    if (py::isinstance<py::bool_>(item.second))
      value = item.second.cast<bool>() ? "true" : "false";
    else if (py::isinstance<py::list>(item.second) || py::isinstance<py::tuple>(item.second)) {
      for (auto v : item.second) value += (value.empty() ? "" : ",") + py::str(v).cast<std::string>();
    } else {
      value = py::str(item.second).cast<std::string>();
    }
    apply_setting(c, key, value);
  }
  return c;
}

py::dict selection_dict(const SelectionResult& r) {
  py::dict d;
  d["mask"] = std::vector<bool>(r.mask.begin(), r.mask.end());
  d["features"] = mask_indices(r.mask);
  d["distribution"] = r.distribution.p;
  d["ranking"] = r.ranking;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["objective"] = r.objective;
  return d;
}

py::tuple feature_arrays(const std::vector<FeatureRow>& rows) {
  std::vector<double> service(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) service[i] = rows[i].label_service;
  return py::make_tuple(from_matrix(feature_matrix(rows)), from_vector(quic_labels(rows)), from_vector(service));
}

}  // namespace

PYBIND11_MODULE(_quicfed, m) {
  m.doc() = "Native core of the quicfed package";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<EstimatorError>(m, "EstimatorError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("FEATURE_NAMES") = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());

  m.def(
      "synthetic_features",
      [](double duration, std::uint64_t seed, double window, const std::string& target) {
        auto service = service_from_token(target);
        if (!service) throw py::value_error("unknown service '" + target + "'");
        auto records = generate_synthetic_trace(SyntheticTraceConfig::defaults(), duration, seed);
        return feature_arrays(extract_features(records, {window, *service}));
      },
      py::arg("duration"), py::arg("seed") = 0, py::arg("window") = 1.0, py::arg("target") = "youtube",
      "Synthesize a trace and window it: returns (X, label_quic, label_service).");

  m.def(
      "extract_trace",
      [](const std::string& path, double window, const std::string& target) {
        auto service = service_from_token(target);
        if (!service) throw py::value_error("unknown service '" + target + "'");
        return feature_arrays(extract_features(parse_trace(std::filesystem::path(path)), {window, *service}));
      },
      py::arg("path"), py::arg("window") = 1.0, py::arg("target") = "youtube");

  m.def(
      "read_features", [](const std::string& path) { return feature_arrays(read_feature_csv(std::filesystem::path(path))); },
      py::arg("path"));

  m.def(
      "planted_benchmark",
      [](std::uint64_t seed, std::size_t rows) {
        bench::PlantedOptions o;
        o.rows = rows;
        auto d = bench::make_planted(o, seed);
        return py::make_tuple(from_matrix(d.x), from_vector(d.y));
      },
      py::arg("seed") = 0, py::arg("rows") = 4000);

  m.def(
      "discretize",
      [](const F64Array& values, std::size_t n_bins, const std::string& strategy) {
        auto c = discretize(to_vector(values), n_bins, strategy_from(strategy));
        std::vector<std::int64_t> bins(c.bins.begin(), c.bins.end());
        return py::make_tuple(bins, c.n_bins, c.edges);
      },
      py::arg("values"), py::arg("n_bins"), py::arg("strategy") = "equal_frequency");

  m.def(
      "entropy", [](const std::vector<I64Array>& cols) { auto c = to_columns(cols); return joint_entropy(refs(c)); },
      py::arg("columns"), "Joint entropy in bits of integer-labelled columns.");

  m.def(
      "mutual_information",
      [](const std::vector<I64Array>& u, const I64Array& y) {
        auto cols = to_columns(u);
        return mutual_information(refs(cols), to_column(y));
      },
      py::arg("u"), py::arg("y"));

  m.def(
      "conditional_mi",
      [](const I64Array& x, const I64Array& y, const std::vector<I64Array>& u) {
        auto cols = to_columns(u);
        return conditional_mi(to_column(x), to_column(y), refs(cols));
      },
      py::arg("x"), py::arg("y"), py::arg("u"));

  m.def(
      "select",
      [](const F64Array& x, const F64Array& y, const std::string& method, std::size_t k, const py::dict& settings) {
        auto c = config_from(settings);
        auto xm = to_matrix(x);
        auto yv = to_vector(y);
        auto data = discretize_dataset(xm, yv, selection_bins(c));
        return selection_dict(run_selector(method, xm, yv, data, k, ce_params(c)));
      },
      py::arg("x"), py::arg("y"), py::arg("method") = "ce", py::arg("k") = 5, py::arg("settings") = py::dict(),
      "Run one selector (ce, anova, cmim, disr, mrmr). `settings` takes config keys.");

  m.def(
      "aggregate_distributions",
      [](const std::vector<std::pair<std::vector<double>, std::size_t>>& locals) {
        std::vector<LocalDistribution> in;
        for (const auto& [p, n] : locals) in.push_back({SelectionDistribution{p}, n});
        return aggregate_distributions(in).p;
      },
      py::arg("locals"), "Size-weighted merge of (p, sample_count) pairs.");

  py::class_<TrainedModel>(m, "Regressor")
      .def_property_readonly("features", [](const TrainedModel& t) { return t.features; })
      .def_property_readonly("params", [](const TrainedModel& t) {
        return from_vector(std::vector<double>(t.params.values().begin(), t.params.values().end()));
      })
      .def("predict", [](const TrainedModel& t, const F64Array& x) { return from_vector(t.predict(to_matrix(x))); })
      .def("rmse", [](const TrainedModel& t, const F64Array& x, const F64Array& y) {
        return t.rmse(to_matrix(x), to_vector(y));
      });

  m.def(
      "fit_regressor",
      [](const F64Array& x, const F64Array& y, std::vector<std::size_t> features, const py::dict& settings) {
        auto xm = to_matrix(x);
        if (features.empty())
          for (std::size_t j = 0; j < xm.cols(); ++j) features.push_back(j);
        return fit_regressor(xm, to_vector(y), features, config_from(settings));
      },
      py::arg("x"), py::arg("y"), py::arg("features") = std::vector<std::size_t>{}, py::arg("settings") = py::dict());

  m.def(
      "check_convergence",
      [](const TrainedModel& prev, const TrainedModel& curr, double threshold) {
        auto c = fed::check_convergence(prev.params, curr.params, threshold);
        return py::make_tuple(c.weight_delta, c.converged);
      },
      py::arg("prev"), py::arg("curr"), py::arg("threshold") = 0.01);

  m.def(
      "run_experiment_json",
      [](const py::dict& settings) {
        auto c = config_from(settings);
        py::gil_scoped_release release;
        return fed::report_json(run_experiment(c));
      },
      py::arg("settings") = py::dict());

  m.def("config_keys", [] {
    auto k = config_keys();
    return std::vector<std::string>(k.begin(), k.end());
  });
}
