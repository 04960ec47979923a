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

// The Gaussian mechanism of DP-SGD: Poisson lots, per-example clipping and
// noising of the clipped sum.

#ifndef DPSYN_DPSGD_MECHANISM_HPP_
#define DPSYN_DPSGD_MECHANISM_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dpsyn/errors.hpp"
#include "dpsyn/rng.hpp"
#include "json.hpp"

namespace dpsyn::dpsgd {

// Fully determines the private mechanism.
struct DpSgdConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  double sample_rate = 1.0;
  std::int64_t num_steps = 1;
  double expected_lot_size = 1.0;

  // Throws DomainError on out-of-range fields.
  void validate() const;

  // q = L / N and num_steps = epochs * ceil(N / L).
  static DpSgdConfig for_dataset(std::size_t dataset_size, double expected_lot_size,
                                 double epochs, double clip_norm = 1.0);

  nlohmann::json to_json() const;
};

// Poisson-sampled lot; may be empty.
struct Lot {
  std::vector<std::size_t> indices;
  double expected_size = 0.0;
};

// Each of [0, N) enters independently with probability q.
Lot poisson_lot(std::size_t dataset_size, double sample_rate, Rng& rng);

template <typename Scalar>
class PerExampleGradient {
 public:
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  PerExampleGradient() = default;
  explicit PerExampleGradient(VectorType values)
      : values_(std::move(values)), l2_norm_(values_.norm()) {}

  const VectorType& values() const { return values_; }
  Scalar l2_norm() const { return l2_norm_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  VectorType values_;
  Scalar l2_norm_ = 0;
};

// g * min(1, C / |g|).
template <typename Scalar>
PerExampleGradient<Scalar> clip_gradient(const PerExampleGradient<Scalar>& g,
                                         Scalar clip_norm) {
  if (!(clip_norm > 0)) throw DomainError("clip_gradient: clip norm must be > 0");
  if (g.l2_norm() <= clip_norm) return g;
  typename PerExampleGradient<Scalar>::VectorType scaled = g.values() * (clip_norm / g.l2_norm());
  // Rounding can leave the norm an ulp above C; shrink until it is not, so
  // clipping is idempotent and the sensitivity bound holds exactly.
  while (scaled.norm() > clip_norm) {
    scaled *= Scalar(1) - std::numeric_limits<Scalar>::epsilon();
  }
  return PerExampleGradient<Scalar>(std::move(scaled));
}

// Slack for norms that land a few ulps above C after scaling.
template <typename Scalar>
Scalar clip_tolerance(Scalar clip_norm) {
  return clip_norm * Scalar(1e-9) + Scalar(1e-12);
}

// (sum of clipped + N(0, sigma^2 C^2 I)) / L with L the expected lot size.
// `dimension` sizes the result when the lot is empty.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> privatize_lot(
    const std::vector<PerExampleGradient<Scalar>>& clipped, const DpSgdConfig& config,
    Eigen::Index dimension, Rng& rng) {
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Scalar clip = static_cast<Scalar>(config.clip_norm);
  VectorType sum = VectorType::Zero(dimension);
  for (std::size_t i = 0; i < clipped.size(); ++i) {
    const auto& g = clipped[i];
    if (g.size() != dimension) {
      throw ContractViolation("privatize_lot: gradient dimension mismatch");
    }
    if (g.values().norm() > clip + clip_tolerance(clip)) {
      throw ContractViolation("privatize_lot: gradient " + std::to_string(i) +
                              " has norm above the clip norm");
    }
    sum += g.values();
  }
  if (config.noise_multiplier > 0.0) {
    std::normal_distribution<Scalar> normal(
        Scalar(0), static_cast<Scalar>(config.noise_multiplier * config.clip_norm));
    for (Eigen::Index j = 0; j < dimension; ++j) sum(j) += normal(rng);
  }
  return sum / static_cast<Scalar>(config.expected_lot_size);
}

}  // namespace dpsyn::dpsgd

#endif  // DPSYN_DPSGD_MECHANISM_HPP_
