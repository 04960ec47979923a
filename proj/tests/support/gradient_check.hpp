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

// Central finite differences against an analytic gradient.

#ifndef DPSYN_TESTS_SUPPORT_GRADIENT_CHECK_HPP_
#define DPSYN_TESTS_SUPPORT_GRADIENT_CHECK_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace dpsyn::testing {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  Eigen::Index worst_index = -1;
};

// Compares `analytic` with (f(x + h e_i) - f(x - h e_i)) / 2h at each of
// `indices`. Relative error is |a - n| / max(|a|, |n|, floor), so
// coordinates whose true gradient is numerically zero are held to an
// absolute `floor`-scaled bound.
inline GradientCheckResult check_gradient_at(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    const Eigen::VectorXd& analytic, const std::vector<Eigen::Index>& indices,
    double h = 1e-5, double floor = 1e-6) {
  GradientCheckResult result;
  for (Eigen::Index i : indices) {
    const double saved = x(i);
    x(i) = saved + h;
    const double up = f(x);
    x(i) = saved - h;
    const double down = f(x);
    x(i) = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
    const double rel = std::abs(analytic(i) - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
    }
    ++result.checked;
  }
  return result;
}

// As above on `count` coordinates drawn without replacement.
inline GradientCheckResult check_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    const Eigen::VectorXd& analytic, int count, unsigned seed, double h = 1e-5,
    double floor = 1e-6) {
  std::vector<Eigen::Index> indices(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) indices[i] = i;
  std::mt19937 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  indices.resize(std::min<std::size_t>(count, indices.size()));
  return check_gradient_at(f, std::move(x), analytic, indices, h, floor);
}

}  // namespace dpsyn::testing

#endif  // DPSYN_TESTS_SUPPORT_GRADIENT_CHECK_HPP_
