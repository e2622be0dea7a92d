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


// Reference implementations written directly from the model definitions.
// They share no code with the library and serve as test oracles.

#ifndef CAVR_TESTS_REFERENCE_HPP
#define CAVR_TESTS_REFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ref {

struct Source {
  int tx = 0;
  int rx = 1;
  int v = 0;
};

// Plain simulator of one source under a per-slot transmit probability q.
// Arrivals refresh the buffered packet at slot start; a delivery in the
// slot sets the receiver age to the packet age plus one.
class Simulator {
 public:
  Simulator(double p_gen, double p_succ, double q, int zeta, int dmax, int kmax,
            std::uint64_t seed)
      : p_gen_(p_gen), p_succ_(p_succ), q_(q), zeta_(zeta), dmax_(dmax), kmax_(kmax),
        gen_(seed) {}

  const Source& state() const { return s_; }

  void advance() {
    const bool transmit = coin(q_);
    const bool ok = transmit && coin(p_succ_);
    const bool arrival = coin(p_gen_);
    const int rx = ok ? std::min(s_.tx + 1, dmax_) : std::min(s_.rx + 1, dmax_);
    s_.v = rx > zeta_ ? std::min(s_.v + 1, kmax_) : 0;
    s_.rx = rx;
    s_.tx = arrival ? 0 : std::min(s_.tx + 1, dmax_);
  }

 private:
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_) < p; }

  double p_gen_, p_succ_, q_;
  int zeta_, dmax_, kmax_;
  Source s_;
  std::mt19937_64 gen_;
};

// Violation counter from a receiver-age sequence by rescanning runs.
inline std::vector<int> counters_by_rescan(const std::vector<int>& rx, int zeta, int kmax) {
  std::vector<int> out(rx.size());
  for (std::size_t t = 0; t < rx.size(); ++t) {
    int run = 0;
    for (std::size_t s = t + 1; s-- > 0;) {
      if (rx[s] > zeta) {
        ++run;
      } else {
        break;
      }
    }
    out[t] = std::min(run, kmax);
  }
  return out;
}

// Sliding-window persistence counts from receiver ages. rx[t][m] for
// slot t+1; counts[k-1] = #{(t, m) : t >= k, rx over slots t-k+1..t all > zeta}.
inline std::vector<std::int64_t> window_counts_by_scan(const std::vector<std::vector<int>>& rx,
                                                       int zeta, int kmax) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(kmax), 0);
  const std::size_t T = rx.size();
  const std::size_t M = T ? rx[0].size() : 0;
  for (int k = 1; k <= kmax; ++k) {
    for (std::size_t t = static_cast<std::size_t>(k) - 1; t < T; ++t) {
      for (std::size_t m = 0; m < M; ++m) {
        bool all = true;
        for (std::size_t s = t + 1 - static_cast<std::size_t>(k); s <= t; ++s) {
          all = all && rx[s][m] > zeta;
        }
        counts[static_cast<std::size_t>(k - 1)] += all ? 1 : 0;
      }
    }
  }
  return counts;
}

inline int sigma_scan(const std::vector<double>& psi, double eps) {
  int best = static_cast<int>(psi.size()) + 1;
  for (int k = static_cast<int>(psi.size()); k >= 1; --k) {
    if (psi[static_cast<std::size_t>(k - 1)] <= eps) best = k;
  }
  return best;
}

// Standard error of the mean of a stationary series by non-overlapping
// batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t batches = 100) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < len; ++i) means[b] += x[b * len + i];
    means[b] /= static_cast<double>(len);
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

// Central finite difference of f at x along coordinate i.
template <typename F>
double central_difference(F&& f, std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace ref

#endif  // CAVR_TESTS_REFERENCE_HPP
