#pragma once

// Single-hidden-layer regressor: z-score inputs -> ReLU hidden layer ->
// sigmoid output, trained on squared error with ADAM.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "quicfed/matrix.hpp"

namespace quicfed {

// Flat parameter vector laid out as w1 (m_in x h, row-major), b1 (h), w2 (h), b2.
class MlpParams {
 public:
  MlpParams() = default;
  MlpParams(std::size_t m_in, std::size_t hidden);

  std::size_t inputs() const noexcept { return m_in_; }
  std::size_t hidden() const noexcept { return h_; }
  std::size_t size() const noexcept { return values_.size(); }
  static std::size_t count_for(std::size_t m_in, std::size_t hidden) { return m_in * hidden + 2 * hidden + 1; }

  std::span<double> w1() { return {values_.data(), m_in_ * h_}; }
  std::span<const double> w1() const { return {values_.data(), m_in_ * h_}; }
  std::span<double> b1() { return {values_.data() + m_in_ * h_, h_}; }
  std::span<const double> b1() const { return {values_.data() + m_in_ * h_, h_}; }
  std::span<double> w2() { return {values_.data() + m_in_ * h_ + h_, h_}; }
  std::span<const double> w2() const { return {values_.data() + m_in_ * h_ + h_, h_}; }
  double& b2() { return values_.back(); }
  double b2() const { return values_.back(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const MlpParams& o) const noexcept { return m_in_ == o.m_in_ && h_ == o.h_; }
  friend bool operator==(const MlpParams&, const MlpParams&) = default;

 private:
  std::size_t m_in_ = 0;
  std::size_t h_ = 0;
  std::vector<double> values_;
};

// Per-feature z-score statistics. Only fit() produces them from data; the
// federation ships the Step-0 statistics alongside the model.
class Normalizer {
 public:
  Normalizer() = default;
  static Normalizer fit(const Matrix& x);
  static Normalizer identity(std::size_t width);

  std::size_t width() const noexcept { return mean_.size(); }
  // Statistics of the listed columns only.
  Normalizer restrict_to(std::span<const std::size_t> columns) const;
  void apply(std::span<const double> x, std::span<double> out) const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& scale() const noexcept { return scale_; }
  friend bool operator==(const Normalizer&, const Normalizer&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t t = 0;
  AdamConfig config;

  static AdamState zeros_like(const MlpParams& p, const AdamConfig& config = {});
};

// Glorot-uniform weights, zero biases.
MlpParams init_params(std::size_t m_in, std::size_t hidden, std::uint64_t seed);

double sigmoid(double z);

double forward(const MlpParams& params, std::span<const double> x, const Normalizer& norm);

struct LossAndGrad {
  double loss = 0.0;  // mean squared error
  MlpParams grad;
};

LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& x, std::span<const double> y,
                          const Normalizer& norm);

// In-place update; returns nothing because params/state are owned by the caller.
void adam_step(MlpParams& params, const MlpParams& grad, AdamState& state);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 0.001;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean squared error seen during each epoch
};

TrainLog train(MlpParams& params, const Matrix& x, std::span<const double> y, const Normalizer& norm,
               const TrainConfig& config);

std::vector<double> soft_label(const MlpParams& params, const Matrix& x, const Normalizer& norm);

// Convex combination; uniform weights when `weights` is empty.
MlpParams average_models(std::span<const MlpParams> models, std::span<const double> weights = {});

double rmse(const MlpParams& params, const Matrix& x, std::span<const double> y, const Normalizer& norm);

// A model together with the feature columns it reads and its input statistics.
struct TrainedModel {
  MlpParams params;
  Normalizer norm;                     // restricted to `features`
  std::vector<std::size_t> features;   // columns of the full feature matrix

  double predict(std::span<const double> full_row) const;
  std::vector<double> predict(const Matrix& full) const;
  double rmse(const Matrix& full, std::span<const double> y) const;
};

}  // namespace quicfed
