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

#include "dpsyn/privacy/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpsyn/errors.hpp"

namespace dpsyn::privacy {
namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

}  // namespace

void PrivacyBudget::validate() const {
  if (!(epsilon >= 0.0)) {
    throw DomainError("epsilon must be >= 0, got " + std::to_string(epsilon));
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw DomainError("delta must lie in [0, 1), got " + std::to_string(delta));
  }
}

bool operator==(const PrivacyBudget& a, const PrivacyBudget& b) {
  return a.epsilon == b.epsilon && a.delta == b.delta;
}

RdpCurve::RdpCurve(std::vector<double> orders, std::vector<double> values)
    : orders_(std::move(orders)), values_(std::move(values)) {
  if (orders_.size() != values_.size()) {
    throw DomainError("RdpCurve: orders and values differ in length");
  }
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    if (!(orders_[i] > 1.0)) throw DomainError("RdpCurve: orders must be > 1");
    if (i > 0 && !(orders_[i] > orders_[i - 1])) {
      throw DomainError("RdpCurve: orders must be strictly ascending");
    }
    if (!(values_[i] >= 0.0)) {
      throw DomainError("RdpCurve: values must be non-negative");
    }
  }
}

RdpCurve RdpCurve::zeros(std::vector<double> orders) {
  std::vector<double> values(orders.size(), 0.0);
  return RdpCurve(std::move(orders), std::move(values));
}

RdpCurve RdpCurve::operator+(const RdpCurve& other) const {
  if (orders_ != other.orders_) {
    throw DomainError("RdpCurve: cannot add curves over different orders");
  }
  std::vector<double> values(values_.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = values_[i] + other.values_[i];
  }
  return RdpCurve(orders_, std::move(values));
}

std::vector<double> default_orders() {
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.insert(orders.end(), {128.0, 256.0, 512.0});
  return orders;
}

double rdp_gaussian(double order, double noise_multiplier) {
  if (!(order > 1.0)) throw DomainError("rdp_gaussian: order must be > 1");
  if (!(noise_multiplier > 0.0)) {
    throw DomainError("rdp_gaussian: noise multiplier must be > 0");
  }
  return order / (2.0 * noise_multiplier * noise_multiplier);
}

double rdp_subsampled_gaussian(double order, double sample_rate,
                               double noise_multiplier) {
  if (!is_integer(order) || order < 2.0) {
    throw DomainError("rdp_subsampled_gaussian: order must be an integer >= 2");
  }
  if (!(sample_rate >= 0.0 && sample_rate <= 1.0)) {
    throw DomainError("rdp_subsampled_gaussian: sample rate must lie in [0, 1]");
  }
  if (!(noise_multiplier > 0.0)) {
    throw DomainError("rdp_subsampled_gaussian: noise multiplier must be > 0");
  }
  if (sample_rate == 0.0) return 0.0;
  const int alpha = static_cast<int>(order);
  if (sample_rate == 1.0) return rdp_gaussian(order, noise_multiplier);

  const double log_q = std::log(sample_rate);
  const double log_1mq = std::log1p(-sample_rate);
  const double inv_two_var = 1.0 / (2.0 * noise_multiplier * noise_multiplier);

  std::vector<double> terms(alpha + 1);
  for (int k = 0; k <= alpha; ++k) {
    const double kk = k;
    terms[k] = log_binomial(alpha, k) + (alpha - k) * log_1mq + k * log_q +
               (kk * kk - kk) * inv_two_var;
  }
  // log-sum-exp with the largest term factored out; log1p keeps precision
  // when the remainder is small against it.
  const auto max_it = std::max_element(terms.begin(), terms.end());
  const double max_term = *max_it;
  double rest = 0.0;
  for (auto it = terms.begin(); it != terms.end(); ++it) {
    if (it != max_it) rest += std::exp(*it - max_term);
  }
  const double log_sum = max_term + std::log1p(rest);
  const double rdp = log_sum / (alpha - 1);
  // The exact sum is >= 1; rounding can leave a tiny negative.
  return std::max(rdp, 0.0);
}

RdpCurve rdp_curve(double sample_rate, double noise_multiplier,
                   const std::vector<double>& orders) {
  std::vector<double> values;
  values.reserve(orders.size());
  for (double a : orders) {
    values.push_back(rdp_subsampled_gaussian(a, sample_rate, noise_multiplier));
  }
  return RdpCurve(orders, std::move(values));
}

RdpCurve compose(const RdpCurve& curve, std::int64_t num_steps) {
  if (num_steps < 1) throw DomainError("compose: num_steps must be >= 1");
  std::vector<double> values(curve.values());
  for (double& v : values) v *= static_cast<double>(num_steps);
  return RdpCurve(curve.orders(), std::move(values));
}

EpsilonAtOrder to_epsilon_delta(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("to_epsilon_delta: delta must lie in (0, 1)");
  }
  if (curve.empty()) throw DomainError("to_epsilon_delta: empty curve");
  const double log_inv_delta = -std::log(delta);
  EpsilonAtOrder best{kInfinity, curve.orders().front()};
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double a = curve.orders()[i];
    const double eps = curve.values()[i] + log_inv_delta / (a - 1.0);
    if (eps < best.epsilon) best = {eps, a};
  }
  best.epsilon = std::max(best.epsilon, 0.0);
  return best;
}

double epsilon_for(double noise_multiplier, double sample_rate,
                   std::int64_t num_steps, double delta,
                   const std::vector<double>& orders) {
  return to_epsilon_delta(
             compose(rdp_curve(sample_rate, noise_multiplier, orders), num_steps),
             delta)
      .epsilon;
}

double calibrate_noise(const PrivacyBudget& target, double sample_rate,
                       std::int64_t num_steps, const std::vector<double>& orders) {
  target.validate();
  if (!target.is_private() || !(target.epsilon > 0.0)) {
    throw DomainError("calibrate_noise: target epsilon must be finite and > 0");
  }
  if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
    throw DomainError("calibrate_noise: sample rate must lie in (0, 1]");
  }
  if (num_steps < 1) throw DomainError("calibrate_noise: num_steps must be >= 1");

  auto eps_at = [&](double sigma) {
    return epsilon_for(sigma, sample_rate, num_steps, target.delta, orders);
  };
  double hi = kMaxNoiseMultiplier;
  if (eps_at(hi) > target.epsilon) {
    throw UnsatisfiableError(
        "calibrate_noise: even noise multiplier 256 exceeds the target epsilon");
  }
  double lo = kMinNoiseMultiplier;
  if (eps_at(lo) <= target.epsilon) return lo;
  // Invariant: eps_at(lo) > target >= eps_at(hi).
  while (hi - lo > kNoiseTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) <= target.epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double default_delta(std::int64_t num_training_samples) {
  if (num_training_samples < 1) {
    throw DomainError("default_delta: need at least one training sample");
  }
  return 1.0 / (10.0 * static_cast<double>(num_training_samples));
}

PrivacyBudget group_privacy(const PrivacyBudget& budget, std::int64_t group_size) {
  if (group_size < 1) throw DomainError("group_privacy: group size must be >= 1");
  if (!budget.is_private()) return budget;
  if (group_size == 1) return budget;
  const double k = static_cast<double>(group_size);
  const double delta =
      std::min(1.0, k * std::exp((k - 1.0) * budget.epsilon) * budget.delta);
  return {k * budget.epsilon, delta};
}

}  // namespace dpsyn::privacy
