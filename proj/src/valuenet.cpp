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

#include "cavr/valuenet.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace cavr {

void NetShape::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be positive");
  if (hidden < 1) throw std::invalid_argument("hidden must be positive");
  if (num_actions < 1) throw std::invalid_argument("num_actions must be positive");
  if (num_quantiles < 1) throw std::invalid_argument("num_quantiles must be positive");
}

namespace {

template <typename Scalar>
DenseLayer<Scalar> zero_layer(int out, int in) {
  return {Matrix<Scalar>::Zero(out, in), Vector<Scalar>::Zero(out)};
}

template <typename Scalar>
void init_layer(DenseLayer<Scalar>& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
  auto draw = [&]() { return static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound); };
  // Row-major fill order keeps initialization independent of Eigen storage.
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = draw();
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = draw();
}

template <typename Scalar>
void affine(const DenseLayer<Scalar>& layer, const Matrix<Scalar>& in, Matrix<Scalar>& out) {
  out.noalias() = layer.weight * in;
  out.colwise() += layer.bias;
}

}  // namespace

template <typename Scalar>
NetParams<Scalar> NetParams<Scalar>::zeros(const NetShape& shape) {
  shape.validate();
  NetParams p;
  p.shape = shape;
  p.trunk1 = zero_layer<Scalar>(shape.hidden, shape.input_dim);
  p.trunk2 = zero_layer<Scalar>(shape.hidden, shape.hidden);
  p.value = zero_layer<Scalar>(shape.num_quantiles, shape.hidden);
  p.advantage = zero_layer<Scalar>(shape.output_rows(), shape.hidden);
  return p;
}

template <typename Scalar>
NetParams<Scalar> NetParams<Scalar>::initialized(const NetShape& shape, Rng& rng) {
  NetParams p = zeros(shape);
  init_layer(p.trunk1, rng);
  init_layer(p.trunk2, rng);
  init_layer(p.value, rng);
  init_layer(p.advantage, rng);
  return p;
}

template <typename Scalar>
std::vector<TensorView<Scalar>> NetParams<Scalar>::tensors() {
  auto w = [](const char* name, Matrix<Scalar>& m) {
    return TensorView<Scalar>{name, m.data(), m.rows(), m.cols()};
  };
  auto b = [](const char* name, Vector<Scalar>& v) {
    return TensorView<Scalar>{name, v.data(), v.size(), 1};
  };
  return {w("trunk1.weight", trunk1.weight),       b("trunk1.bias", trunk1.bias),
          w("trunk2.weight", trunk2.weight),       b("trunk2.bias", trunk2.bias),
          w("value.weight", value.weight),         b("value.bias", value.bias),
          w("advantage.weight", advantage.weight), b("advantage.bias", advantage.bias)};
}

template <typename Scalar>
std::vector<TensorView<const Scalar>> NetParams<Scalar>::tensors() const {
  std::vector<TensorView<const Scalar>> out;
  for (const auto& t : const_cast<NetParams*>(this)->tensors()) {
    out.push_back({t.name, t.data, t.rows, t.cols});
  }
  return out;
}

template <typename Scalar>
std::size_t NetParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

template <typename Scalar>
bool NetParams<Scalar>::all_finite() const {
  for (const auto& t : tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

template <typename Scalar>
Matrix<Scalar> forward(const NetParams<Scalar>& params, const Matrix<Scalar>& features,
                       ForwardCache<Scalar>* cache) {
  const NetShape& s = params.shape;
  if (features.rows() != s.input_dim) {
    throw std::invalid_argument("feature length " + std::to_string(features.rows()) +
                                " does not match input_dim " + std::to_string(s.input_dim));
  }
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  c.input = features;
  affine(params.trunk1, features, c.h1);
  c.h1 = c.h1.cwiseMax(Scalar(0));
  affine(params.trunk2, c.h1, c.h2);
  c.h2 = c.h2.cwiseMax(Scalar(0));

  Matrix<Scalar> theta;
  affine(params.advantage, c.h2, theta);
  if (!s.dueling) return theta;

  const int n = s.num_quantiles;
  const int a_count = s.num_actions;
  Matrix<Scalar> value;
  affine(params.value, c.h2, value);
  Matrix<Scalar> mean = theta.topRows(n);
  for (int a = 1; a < a_count; ++a) mean += theta.middleRows(a * n, n);
  mean /= static_cast<Scalar>(a_count);
  value -= mean;
  for (int a = 0; a < a_count; ++a) theta.middleRows(a * n, n) += value;
  return theta;
}

template <typename Scalar>
NetParams<Scalar> backward(const NetParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                           const Matrix<Scalar>& dtheta) {
  const NetShape& s = params.shape;
  const int n = s.num_quantiles;
  const int a_count = s.num_actions;
  if (dtheta.rows() != s.output_rows() || dtheta.cols() != cache.input.cols()) {
    throw std::invalid_argument("dtheta shape does not match the cached batch");
  }
  NetParams<Scalar> g;
  g.shape = s;

  Matrix<Scalar> dh2;
  if (s.dueling) {
    Matrix<Scalar> dvalue = dtheta.topRows(n);
    for (int a = 1; a < a_count; ++a) dvalue += dtheta.middleRows(a * n, n);
    Matrix<Scalar> dadv = dtheta;
    const Matrix<Scalar> shift = dvalue / static_cast<Scalar>(a_count);
    for (int a = 0; a < a_count; ++a) dadv.middleRows(a * n, n) -= shift;

    g.value.weight.noalias() = dvalue * cache.h2.transpose();
    g.value.bias = dvalue.rowwise().sum();
    g.advantage.weight.noalias() = dadv * cache.h2.transpose();
    g.advantage.bias = dadv.rowwise().sum();
    dh2.noalias() = params.advantage.weight.transpose() * dadv;
    dh2.noalias() += params.value.weight.transpose() * dvalue;
  } else {
    g.value = zero_layer<Scalar>(n, s.hidden);
    g.advantage.weight.noalias() = dtheta * cache.h2.transpose();
    g.advantage.bias = dtheta.rowwise().sum();
    dh2.noalias() = params.advantage.weight.transpose() * dtheta;
  }
  dh2 = (cache.h2.array() > Scalar(0)).select(dh2, Scalar(0));

  g.trunk2.weight.noalias() = dh2 * cache.h1.transpose();
  g.trunk2.bias = dh2.rowwise().sum();
  Matrix<Scalar> dh1;
  dh1.noalias() = params.trunk2.weight.transpose() * dh2;
  dh1 = (cache.h1.array() > Scalar(0)).select(dh1, Scalar(0));

  g.trunk1.weight.noalias() = dh1 * cache.input.transpose();
  g.trunk1.bias = dh1.rowwise().sum();
  return g;
}

template <typename Scalar>
DuelingParts<Scalar> dueling_parts(const NetParams<Scalar>& params,
                                   const Matrix<Scalar>& features) {
  if (!params.shape.dueling) throw std::invalid_argument("network has no dueling head");
  ForwardCache<Scalar> c;
  forward(params, features, &c);
  const int n = params.shape.num_quantiles;
  const int a_count = params.shape.num_actions;
  DuelingParts<Scalar> parts;
  affine(params.value, c.h2, parts.value);
  affine(params.advantage, c.h2, parts.centered_advantage);
  Matrix<Scalar> mean = parts.centered_advantage.topRows(n);
  for (int a = 1; a < a_count; ++a) mean += parts.centered_advantage.middleRows(a * n, n);
  mean /= static_cast<Scalar>(a_count);
  for (int a = 0; a < a_count; ++a) parts.centered_advantage.middleRows(a * n, n) -= mean;
  return parts;
}

std::vector<double> tau_hat(int num_quantiles) {
  if (num_quantiles < 1) throw std::invalid_argument("num_quantiles must be positive");
  std::vector<double> tau(static_cast<std::size_t>(num_quantiles));
  for (int i = 1; i <= num_quantiles; ++i) {
    tau[static_cast<std::size_t>(i - 1)] = (2.0 * i - 1.0) / (2.0 * num_quantiles);
  }
  return tau;
}

template <typename Scalar>
QuantileValue evaluate(const NetParams<Scalar>& params, std::span<const double> features) {
  Matrix<Scalar> x(static_cast<Eigen::Index>(features.size()), 1);
  for (std::size_t i = 0; i < features.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(features[i]);
  }
  const Matrix<Scalar> theta = forward(params, x);
  const int n = params.shape.num_quantiles;
  QuantileValue out;
  out.theta.resize(params.shape.num_actions, n);
  for (int a = 0; a < params.shape.num_actions; ++a) {
    for (int i = 0; i < n; ++i) out.theta(a, i) = static_cast<double>(theta(a * n + i, 0));
  }
  out.tau_hat = tau_hat(n);
  return out;
}

std::vector<double> mean_q(const QuantileValue& value) {
  std::vector<double> q(static_cast<std::size_t>(value.num_actions()));
  for (int a = 0; a < value.num_actions(); ++a) {
    q[static_cast<std::size_t>(a)] = value.theta.row(a).mean();
  }
  return q;
}

LossGrad quantile_huber_loss(std::span<const double> pred, std::span<const double> target,
                             std::span<const double> tau_hat, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (pred.size() != tau_hat.size()) {
    throw std::invalid_argument("pred and tau_hat differ in length");
  }
  const double n = static_cast<double>(pred.size());
  LossGrad out;
  out.grad.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (double t : target) {
      const HuberTerm h = quantile_huber(t - pred[i], tau_hat[i], kappa);
      out.loss += h.rho;
      out.grad[i] -= h.drho_du;
    }
  }
  out.loss /= n;
  for (double& g : out.grad) g /= n;
  return out;
}

LossGrad mse_td_loss(std::span<const double> pred_q, std::span<const double> target_y) {
  if (pred_q.size() != target_y.size() || pred_q.empty()) {
    throw std::invalid_argument("pred and target must be nonempty and equal length");
  }
  const double b = static_cast<double>(pred_q.size());
  LossGrad out;
  out.grad.resize(pred_q.size());
  for (std::size_t i = 0; i < pred_q.size(); ++i) {
    const double e = target_y[i] - pred_q[i];
    out.loss += e * e;
    out.grad[i] = -2.0 * e / b;
  }
  out.loss /= b;
  return out;
}

template <typename Scalar>
double quantile_huber_sample(const Scalar* pred, const Scalar* target, const Scalar* tau,
                             int n, Scalar kappa, Scalar* dpred) {
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Map<const Arr> p(pred, n);
  const Eigen::Map<const Arr> t(tau, n);
  Arr l = Arr::Zero(n);
  Arr g = Arr::Zero(n);
  const Arr tc = Scalar(1) - t;
  Arr u(n), au(n), c(n), w(n);
  for (int j = 0; j < n; ++j) {
    u = target[j] - p;
    au = u.abs();
    c = au.min(kappa);
    w = (u < Scalar(0)).select(tc, t);
    l += c * (au - Scalar(0.5) * c) * w;
    g += u.max(-kappa).min(kappa) * w;
  }
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss += static_cast<double>(l[i]);
    dpred[i] = -g[i] / static_cast<Scalar>(n);
  }
  return loss / n;
}

template <typename Scalar>
void adam_update(std::span<Scalar> params, std::span<const Scalar> grads,
                 std::span<Scalar> first_moment, std::span<Scalar> second_moment,
                 std::int64_t step, const AdamOptions& o) {
  if (grads.size() != params.size() || first_moment.size() != params.size() ||
      second_moment.size() != params.size()) {
    throw std::invalid_argument("adam buffers differ in length");
  }
  if (step < 1) throw std::invalid_argument("adam step is 1-based");
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  const Scalar b1 = static_cast<Scalar>(o.beta1);
  const Scalar b2 = static_cast<Scalar>(o.beta2);
  const Scalar step_size = static_cast<Scalar>(o.learning_rate / bc1);
  const Scalar inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
  const Scalar eps = static_cast<Scalar>(o.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Scalar g = grads[i];
    first_moment[i] = b1 * first_moment[i] + (Scalar(1) - b1) * g;
    second_moment[i] = b2 * second_moment[i] + (Scalar(1) - b2) * g * g;
    params[i] -= step_size * first_moment[i] /
                 (std::sqrt(second_moment[i]) * inv_sqrt_bc2 + eps);
  }
}

template <typename Scalar>
Adam<Scalar>::Adam(const NetShape& shape, AdamOptions options)
    : options_(options),
      first_(NetParams<Scalar>::zeros(shape)),
      second_(NetParams<Scalar>::zeros(shape)) {}

template <typename Scalar>
void Adam<Scalar>::step(NetParams<Scalar>& params, const NetParams<Scalar>& grads) {
  if (!(params.shape == grads.shape) || !(params.shape == first_.shape)) {
    throw std::invalid_argument("optimizer, parameter and gradient shapes differ");
  }
  if (!grads.all_finite()) throw NonFiniteGradient("non-finite gradient; step aborted");
  ++steps_;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = first_.tensors();
  auto v = second_.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    adam_update<Scalar>({p[t].data, p[t].size()}, {g[t].data, g[t].size()},
                        {m[t].data, m[t].size()}, {v[t].data, v[t].size()}, steps_, options_);
  }
}

namespace {

constexpr const char* kMagic = "cavr-valuenet";

template <typename Scalar>
constexpr const char* scalar_name() {
  return std::is_same_v<Scalar, float> ? "float32" : "float64";
}

std::string expect_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error(std::string("checkpoint truncated before ") + what);
  return tok;
}

long expect_int(std::istream& in, const char* key) {
  const std::string k = expect_token(in, key);
  if (k != key) throw std::runtime_error("checkpoint: expected '" + std::string(key) + "'");
  return std::stol(expect_token(in, key));
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const NetParams<Scalar>& params, std::ostream& out) {
  const NetShape& s = params.shape;
  out << kMagic << " 1\n"
      << "scalar " << scalar_name<Scalar>() << '\n'
      << "input_dim " << s.input_dim << '\n'
      << "hidden " << s.hidden << '\n'
      << "num_actions " << s.num_actions << '\n'
      << "num_quantiles " << s.num_quantiles << '\n'
      << "dueling " << (s.dueling ? 1 : 0) << '\n';
  char buf[64];
  for (const auto& t : params.tensors()) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    // Row-major, one row per line.
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        std::snprintf(buf, sizeof buf, "%a", static_cast<double>(t.data[c * t.rows + r]));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

template <typename Scalar>
NetParams<Scalar> load_checkpoint(std::istream& in) {
  if (expect_token(in, "magic") != kMagic) throw std::runtime_error("not a cavr checkpoint");
  if (expect_token(in, "version") != "1") throw std::runtime_error("unsupported version");
  if (expect_token(in, "scalar") != "scalar") throw std::runtime_error("checkpoint: expected 'scalar'");
  expect_token(in, "scalar type");  // payload is exact in either precision
  NetShape s;
  s.input_dim = static_cast<int>(expect_int(in, "input_dim"));
  s.hidden = static_cast<int>(expect_int(in, "hidden"));
  s.num_actions = static_cast<int>(expect_int(in, "num_actions"));
  s.num_quantiles = static_cast<int>(expect_int(in, "num_quantiles"));
  s.dueling = expect_int(in, "dueling") != 0;
  NetParams<Scalar> p = NetParams<Scalar>::zeros(s);
  for (auto& t : p.tensors()) {
    if (expect_token(in, "tensor") != "tensor") throw std::runtime_error("checkpoint: expected tensor");
    if (expect_token(in, "name") != t.name) {
      throw std::runtime_error(std::string("checkpoint: expected tensor ") + t.name);
    }
    const long rows = std::stol(expect_token(in, "rows"));
    const long cols = std::stol(expect_token(in, "cols"));
    if (rows != t.rows || cols != t.cols) {
      throw std::runtime_error(std::string("checkpoint: shape mismatch for ") + t.name);
    }
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        const std::string tok = expect_token(in, "value");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
          throw std::runtime_error("checkpoint: bad number '" + tok + "'");
        }
        t.data[c * t.rows + r] = static_cast<Scalar>(v);
      }
    }
  }
  if (expect_token(in, "end") != "end") throw std::runtime_error("checkpoint: missing end marker");
  return p;
}

#define CAVR_INSTANTIATE(S)                                                                    \
  template struct NetParams<S>;                                                                \
  template Matrix<S> forward<S>(const NetParams<S>&, const Matrix<S>&, ForwardCache<S>*);      \
  template NetParams<S> backward<S>(const NetParams<S>&, const ForwardCache<S>&,               \
                                    const Matrix<S>&);                                         \
  template DuelingParts<S> dueling_parts<S>(const NetParams<S>&, const Matrix<S>&);            \
  template QuantileValue evaluate<S>(const NetParams<S>&, std::span<const double>);            \
  template double quantile_huber_sample<S>(const S*, const S*, const S*, int, S, S*);          \
  template void adam_update<S>(std::span<S>, std::span<const S>, std::span<S>, std::span<S>,   \
                               std::int64_t, const AdamOptions&);                              \
  template class Adam<S>;                                                                      \
  template void save_checkpoint<S>(const NetParams<S>&, std::ostream&);                        \
  template NetParams<S> load_checkpoint<S>(std::istream&);

CAVR_INSTANTIATE(float)
CAVR_INSTANTIATE(double)

#undef CAVR_INSTANTIATE

}  // namespace cavr
