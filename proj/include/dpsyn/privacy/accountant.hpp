// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Renyi-DP accounting for the Poisson-subsampled Gaussian mechanism.
//
// All quantities are natural-log based. Orders are integers; the default
// grid is {2, ..., 64, 128, 256, 512}.

#ifndef DPSYN_PRIVACY_ACCOUNTANT_HPP_
#define DPSYN_PRIVACY_ACCOUNTANT_HPP_

#include <cstdint>
#include <limits>
#include <vector>

namespace dpsyn::privacy {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// An (epsilon, delta) guarantee. epsilon = +inf is the non-private mode.
struct PrivacyBudget {
  double epsilon = kInfinity;
  double delta = 0.0;

  // Throws DomainError unless epsilon >= 0 and delta in [0, 1).
  void validate() const;
  bool is_private() const { return epsilon < kInfinity; }

  static PrivacyBudget non_private() { return {kInfinity, 0.0}; }
};

bool operator==(const PrivacyBudget& a, const PrivacyBudget& b);

// Per-order RDP values. Orders are strictly ascending and > 1.
class RdpCurve {
 public:
  RdpCurve() = default;
  // Throws DomainError when the invariants do not hold.
  RdpCurve(std::vector<double> orders, std::vector<double> values);

  // All-zero curve on the given orders.
  static RdpCurve zeros(std::vector<double> orders);

  const std::vector<double>& orders() const { return orders_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return orders_.size(); }
  bool empty() const { return orders_.empty(); }

  // Pointwise sum; both curves must share the same orders.
  RdpCurve operator+(const RdpCurve& other) const;

 private:
  std::vector<double> orders_;
  std::vector<double> values_;
};

std::vector<double> default_orders();

// Plain Gaussian mechanism with L2 sensitivity 1: alpha / (2 sigma^2).
double rdp_gaussian(double order, double noise_multiplier);

// Poisson-subsampled Gaussian at an integer order >= 2, evaluated as
//   1/(a-1) * log sum_k C(a,k) (1-q)^(a-k) q^k exp((k^2-k)/(2 sigma^2))
// entirely in log space.
double rdp_subsampled_gaussian(double order, double sample_rate,
                               double noise_multiplier);

// Curve of one subsampled-Gaussian step over `orders`.
RdpCurve rdp_curve(double sample_rate, double noise_multiplier,
                   const std::vector<double>& orders = default_orders());

// Additive composition over `num_steps` identical steps.
RdpCurve compose(const RdpCurve& curve, std::int64_t num_steps);

struct EpsilonAtOrder {
  double epsilon;
  double best_order;
};

// Classic conversion: min over orders of eps(a) + log(1/delta)/(a-1).
EpsilonAtOrder to_epsilon_delta(const RdpCurve& curve, double delta);

// Epsilon of `num_steps` subsampled-Gaussian steps at `delta`.
double epsilon_for(double noise_multiplier, double sample_rate,
                   std::int64_t num_steps, double delta,
                   const std::vector<double>& orders = default_orders());

inline constexpr double kMinNoiseMultiplier = 0.3;
inline constexpr double kMaxNoiseMultiplier = 256.0;
inline constexpr double kNoiseTolerance = 1e-3;

// Smallest noise multiplier in [0.3, 256] (bisection to 1e-3) whose accounted
// epsilon does not exceed target.epsilon at target.delta. Throws
// UnsatisfiableError when sigma = 256 is not enough.
double calibrate_noise(const PrivacyBudget& target, double sample_rate,
                       std::int64_t num_steps,
                       const std::vector<double>& orders = default_orders());

// 1 / (10 n).
double default_delta(std::int64_t num_training_samples);

// Guarantee for groups of k records: (k eps, min(1, k e^((k-1) eps) delta)).
PrivacyBudget group_privacy(const PrivacyBudget& budget, std::int64_t group_size);

}  // namespace dpsyn::privacy

#endif  // DPSYN_PRIVACY_ACCOUNTANT_HPP_
