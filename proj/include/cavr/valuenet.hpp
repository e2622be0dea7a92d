/*
 * Copyright 2026 The cavr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CAVR_VALUENET_HPP
#define CAVR_VALUENET_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavr/rng.hpp"

namespace cavr {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct NetShape {
  int input_dim = 0;
  int hidden = 128;
  int num_actions = 0;
  int num_quantiles = 1;
  bool dueling = false;

  int output_rows() const { return num_actions * num_quantiles; }
  void validate() const;
  friend bool operator==(const NetShape&, const NetShape&) = default;
};

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;
};

template <typename Scalar>
struct TensorView {
  const char* name;
  Scalar* data;
  Eigen::Index rows;
  Eigen::Index cols;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Shared 2-layer trunk, a value head (hidden -> N) and an advantage head
/// (hidden -> |A| N). Output row a * N + i holds quantile i of action a.
/// The value head is carried but unused when `shape.dueling` is false.
template <typename Scalar>
struct NetParams {
  NetShape shape;
  DenseLayer<Scalar> trunk1;
  DenseLayer<Scalar> trunk2;
  DenseLayer<Scalar> value;
  DenseLayer<Scalar> advantage;

  static NetParams zeros(const NetShape& shape);
  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, weights and biases.
  static NetParams initialized(const NetShape& shape, Rng& rng);

  std::vector<TensorView<Scalar>> tensors();
  std::vector<TensorView<const Scalar>> tensors() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename Other>
  NetParams<Other> cast() const {
    NetParams<Other> out;
    out.shape = shape;
    out.trunk1 = {trunk1.weight.template cast<Other>(), trunk1.bias.template cast<Other>()};
    out.trunk2 = {trunk2.weight.template cast<Other>(), trunk2.bias.template cast<Other>()};
    out.value = {value.weight.template cast<Other>(), value.bias.template cast<Other>()};
    out.advantage = {advantage.weight.template cast<Other>(),
                     advantage.bias.template cast<Other>()};
    return out;
  }
};

/// Activations kept for the backward pass.
template <typename Scalar>
struct ForwardCache {
  Matrix<Scalar> input;  // in x B
  Matrix<Scalar> h1;     // hidden x B, post-ReLU
  Matrix<Scalar> h2;
};

/// Batched forward. `features` is in x B (one column per state); the result
/// is (|A| N) x B. Dueling combine per quantile: V_i + (A_i(a) - mean_a A_i).
template <typename Scalar>
Matrix<Scalar> forward(const NetParams<Scalar>& params, const Matrix<Scalar>& features,
                       ForwardCache<Scalar>* cache = nullptr);

/// Parameter gradients given dL/dtheta for the batch cached by `forward`.
template <typename Scalar>
NetParams<Scalar> backward(const NetParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                           const Matrix<Scalar>& dtheta);

/// Raw value stream and mean-centred advantage stream of the dueling head.
template <typename Scalar>
struct DuelingParts {
  Matrix<Scalar> value;               // N x B
  Matrix<Scalar> centered_advantage;  // (|A| N) x B
};

template <typename Scalar>
DuelingParts<Scalar> dueling_parts(const NetParams<Scalar>& params,
                                   const Matrix<Scalar>& features);

/// Quantile midpoints (2i - 1) / (2N), i = 1..N.
std::vector<double> tau_hat(int num_quantiles);

/// Return distribution for one state: theta(a, i) and the quantile levels.
struct QuantileValue {
  Matrix<double> theta;  // |A| x N
  std::vector<double> tau_hat;

  int num_actions() const { return static_cast<int>(theta.rows()); }
  int num_quantiles() const { return static_cast<int>(theta.cols()); }
};

template <typename Scalar>
QuantileValue evaluate(const NetParams<Scalar>& params, std::span<const double> features);

/// Q(a) = (1/N) sum_i theta(a, i).
std::vector<double> mean_q(const QuantileValue& value);

struct HuberTerm {
  double rho = 0.0;
  double drho_du = 0.0;
};

/// Asymmetric Huber penalty rho_tau^kappa(u) and its derivative. At u = 0
/// the weight is tau (1[0 < 0] = 0); at |u| = kappa the quadratic branch is used.
inline HuberTerm quantile_huber(double u, double tau, double kappa) {
  const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  const double au = std::abs(u);
  if (au <= kappa) return {0.5 * u * u * weight, u * weight};
  return {kappa * (au - 0.5 * kappa) * weight, (u < 0.0 ? -kappa : kappa) * weight};
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dpred
};

/// (1/N) sum_i sum_j rho_{tau_i}^kappa(target_j - pred_i).
LossGrad quantile_huber_loss(std::span<const double> pred, std::span<const double> target,
                             std::span<const double> tau_hat, double kappa);

/// Batch mean of (y - Q)^2.
LossGrad mse_td_loss(std::span<const double> pred_q, std::span<const double> target_y);

/// Quantile Huber loss for one sample written into `dpred` (length N);
/// returns the loss. Used by the batched training path.
template <typename Scalar>
double quantile_huber_sample(const Scalar* pred, const Scalar* target, const Scalar* tau,
                             int n, Scalar kappa, Scalar* dpred);

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamOptions {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update on flat buffers; `step` is 1-based.
template <typename Scalar>
void adam_update(std::span<Scalar> params, std::span<const Scalar> grads,
                 std::span<Scalar> first_moment, std::span<Scalar> second_moment,
                 std::int64_t step, const AdamOptions& options);

template <typename Scalar>
class Adam {
 public:
  Adam(const NetShape& shape, AdamOptions options);

  /// Throws NonFiniteGradient (parameters untouched) if any gradient entry
  /// is NaN or infinite.
  void step(NetParams<Scalar>& params, const NetParams<Scalar>& grads);

  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  NetParams<Scalar> first_;
  NetParams<Scalar> second_;
  std::int64_t steps_ = 0;
};

/// Text checkpoint with hex-float payload; round trips bit-exactly.
template <typename Scalar>
void save_checkpoint(const NetParams<Scalar>& params, std::ostream& out);
template <typename Scalar>
NetParams<Scalar> load_checkpoint(std::istream& in);

}  // namespace cavr

#endif  // CAVR_VALUENET_HPP
