#include "quicfed/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "quicfed/error.hpp"

namespace quicfed {

MlpParams::MlpParams(std::size_t m_in, std::size_t hidden)
    : m_in_(m_in), h_(hidden), values_(count_for(m_in, hidden), 0.0) {}

// ---- normalization --------------------------------------------------------------

Normalizer Normalizer::fit(const Matrix& x) {
  if (x.rows() == 0) throw ContractError("Normalizer::fit: no rows");
  Normalizer n;
  n.mean_.assign(x.cols(), 0.0);
  n.scale_.assign(x.cols(), 1.0);
  const double rows = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) sum += x(r, c);
    double mean = sum / rows;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    double sd = std::sqrt(ss / rows);
    n.mean_[c] = mean;
    n.scale_[c] = sd > 0.0 ? sd : 1.0;
  }
  return n;
}

Normalizer Normalizer::identity(std::size_t width) {
  Normalizer n;
  n.mean_.assign(width, 0.0);
  n.scale_.assign(width, 1.0);
  return n;
}

Normalizer Normalizer::restrict_to(std::span<const std::size_t> columns) const {
  Normalizer n;
  for (auto c : columns) {
    if (c >= width()) throw ContractError("Normalizer::restrict_to: column out of range");
    n.mean_.push_back(mean_[c]);
    n.scale_.push_back(scale_[c]);
  }
  return n;
}

void Normalizer::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != width() || out.size() != width()) throw ContractError("Normalizer::apply: width mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean_[i]) / scale_[i];
}

// ---- network -----------------------------------------------------------------------

AdamState AdamState::zeros_like(const MlpParams& p, const AdamConfig& config) {
  AdamState s;
  s.m = MlpParams(p.inputs(), p.hidden());
  s.v = MlpParams(p.inputs(), p.hidden());
  s.config = config;
  return s;
}

MlpParams init_params(std::size_t m_in, std::size_t hidden, std::uint64_t seed) {
  if (m_in < 1 || hidden < 1) throw ConfigError("init_params: widths must be positive");
  MlpParams p(m_in, hidden);
  std::mt19937_64 rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(m_in + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  for (auto& w : p.w1()) w = u1(rng);
  for (auto& w : p.w2()) w = u2(rng);
  return p;
}

double sigmoid(double z) {
  double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  // Keep the output inside the open interval even when exp saturates.
  constexpr double kTiny = 0x1p-53;
  return std::clamp(s, kTiny, 1.0 - kTiny);
}

namespace {

struct Activations {
  std::vector<double> x;       // normalized input
  std::vector<double> pre;     // hidden pre-activation
  std::vector<double> hidden;  // relu(pre)
  double out = 0.0;
};

void check_width(const MlpParams& params, std::size_t width, const Normalizer& norm) {
  if (width != params.inputs() || norm.width() != params.inputs())
    throw ContractError("regressor: input width " + std::to_string(width) + " does not match model width " +
                        std::to_string(params.inputs()));
}

void run_forward(const MlpParams& params, std::span<const double> raw, const Normalizer& norm, Activations& a) {
  const std::size_t m = params.inputs(), h = params.hidden();
  a.x.resize(m);
  a.pre.assign(params.b1().begin(), params.b1().end());
  a.hidden.resize(h);
  norm.apply(raw, a.x);
  auto w1 = params.w1();
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = a.x[i];
    const double* row = w1.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) a.pre[j] += xi * row[j];
  }
  double z = params.b2();
  auto w2 = params.w2();
  for (std::size_t j = 0; j < h; ++j) {
    a.hidden[j] = a.pre[j] > 0.0 ? a.pre[j] : 0.0;
    z += w2[j] * a.hidden[j];
  }
  a.out = sigmoid(z);
}

// Accumulates the gradient of sum_rows (yhat - y)^2 / n_total into grad.
double accumulate(const MlpParams& params, const Matrix& x, std::span<const double> y, const Normalizer& norm,
                  std::span<const std::size_t> rows, MlpParams& grad) {
  const std::size_t m = params.inputs(), h = params.hidden();
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  Activations a;
  double loss = 0.0;
  auto gw1 = grad.w1();
  auto gb1 = grad.b1();
  auto gw2 = grad.w2();
  auto w2 = params.w2();
  for (auto r : rows) {
    run_forward(params, x.row(r), norm, a);
    const double resid = a.out - y[r];
    if (!std::isfinite(resid)) throw ContractError("regressor: non-finite prediction or target");
    loss += resid * resid;
    const double delta = 2.0 * resid * a.out * (1.0 - a.out) * inv_n;
    grad.b2() += delta;
    for (std::size_t j = 0; j < h; ++j) {
      gw2[j] += delta * a.hidden[j];
      const double dh = a.pre[j] > 0.0 ? delta * w2[j] : 0.0;
      gb1[j] += dh;
      if (dh == 0.0) continue;
      for (std::size_t i = 0; i < m; ++i) gw1[i * h + j] += a.x[i] * dh;
    }
  }
  return loss * inv_n;
}

}  // namespace

double forward(const MlpParams& params, std::span<const double> x, const Normalizer& norm) {
  check_width(params, x.size(), norm);
  Activations a;
  run_forward(params, x, norm, a);
  return a.out;
}

LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& x, std::span<const double> y,
                          const Normalizer& norm) {
  if (x.rows() == 0) throw ContractError("loss_and_grad: empty batch");
  if (x.rows() != y.size()) throw ContractError("loss_and_grad: rows and targets differ");
  check_width(params, x.cols(), norm);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  LossAndGrad out{0.0, MlpParams(params.inputs(), params.hidden())};
  out.loss = accumulate(params, x, y, norm, rows, out.grad);
  return out;
}

void adam_step(MlpParams& params, const MlpParams& grad, AdamState& state) {
  if (!params.same_shape(grad) || !params.same_shape(state.m) || !params.same_shape(state.v))
    throw ContractError("adam_step: shape mismatch");
  const auto& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  auto theta = params.values();
  auto g = grad.values();
  auto m = state.m.values();
  auto v = state.v.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    theta[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

TrainLog train(MlpParams& params, const Matrix& x, std::span<const double> y, const Normalizer& norm,
               const TrainConfig& config) {
  if (x.rows() == 0) throw ContractError("train: no data");
  if (x.rows() != y.size()) throw ContractError("train: rows and targets differ");
  if (config.batch_size < 1) throw ConfigError("train: batch size must be positive");
  check_width(params, x.cols(), norm);

  TrainLog log;
  AdamConfig adam;
  adam.lr = config.lr;
  AdamState state = AdamState::zeros_like(params, adam);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  MlpParams grad(params.inputs(), params.hidden());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sq = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      std::fill(grad.values().begin(), grad.values().end(), 0.0);
      sq += accumulate(params, x, y, norm, batch, grad) * static_cast<double>(len);
      adam_step(params, grad, state);
    }
    log.epoch_loss.push_back(sq / static_cast<double>(order.size()));
  }
  return log;
}

std::vector<double> soft_label(const MlpParams& params, const Matrix& x, const Normalizer& norm) {
  check_width(params, x.cols(), norm);
  std::vector<double> out(x.rows());
  Activations a;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    run_forward(params, x.row(r), norm, a);
    out[r] = a.out;
  }
  return out;
}

MlpParams average_models(std::span<const MlpParams> models, std::span<const double> weights) {
  if (models.empty()) throw ContractError("average_models: no models");
  if (!weights.empty() && weights.size() != models.size())
    throw ContractError("average_models: one weight per model required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractError("average_models: weights must be non-negative");
    total += w;
  }
  if (!weights.empty() && std::abs(total - 1.0) > 1e-9) throw ContractError("average_models: weights must sum to 1");
  for (const auto& m : models)
    if (!m.same_shape(models.front())) throw ContractError("average_models: shape mismatch");

  MlpParams out(models.front().inputs(), models.front().hidden());
  auto acc = out.values();
  const double uniform = 1.0 / static_cast<double>(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double w = weights.empty() ? uniform : weights[k];
    auto v = models[k].values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
  return out;
}

double rmse(const MlpParams& params, const Matrix& x, std::span<const double> y, const Normalizer& norm) {
  if (x.rows() == 0) throw ContractError("rmse: no data");
  if (x.rows() != y.size()) throw ContractError("rmse: rows and targets differ");
  auto pred = soft_label(params, x, norm);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - y[i]) * (pred[i] - y[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double TrainedModel::predict(std::span<const double> full_row) const {
  std::vector<double> x(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i] >= full_row.size()) throw ContractError("TrainedModel: row too narrow");
    x[i] = full_row[features[i]];
  }
  return forward(params, x, norm);
}

std::vector<double> TrainedModel::predict(const Matrix& full) const {
  return soft_label(params, full.select_columns(features), norm);
}

double TrainedModel::rmse(const Matrix& full, std::span<const double> y) const {
  return quicfed::rmse(params, full.select_columns(features), y, norm);
}

}  // namespace quicfed
