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

#ifndef DPSYN_DPSGD_OBJECTIVE_HPP_
#define DPSYN_DPSGD_OBJECTIVE_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>

namespace dpsyn::dpsgd {

// A training set paired with a per-example differentiable loss. Each call
// evaluates exactly one example, which is what per-example clipping needs.
class PerExampleObjective {
 public:
  virtual ~PerExampleObjective() = default;

  virtual std::size_t num_examples() const = 0;
  virtual Eigen::Index num_parameters() const = 0;

  // Loss of example `index` at `params`. When `grad` is non-null it is
  // overwritten with d loss / d params. Stochastic losses draw all of their
  // randomness from `example_seed`.
  virtual double loss(std::size_t index, const Eigen::VectorXd& params,
                      std::uint64_t example_seed, Eigen::VectorXd* grad) const = 0;

  // 1 where private training may update a parameter, 0 where the parameter
  // is frozen because it has no per-example gradient.
  virtual Eigen::VectorXd private_trainable_mask() const {
    return Eigen::VectorXd::Ones(num_parameters());
  }
};

}  // namespace dpsyn::dpsgd

#endif  // DPSYN_DPSGD_OBJECTIVE_HPP_
