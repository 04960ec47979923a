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

// Flat parameter storage. Every model keeps all trainable tensors in one
// Eigen::VectorXd so that gradients, clipping and noise act on a single
// vector; tensors are column-major views into it.

#ifndef DPSYN_NN_PARAMETERS_HPP_
#define DPSYN_NN_PARAMETERS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dpsyn::nn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct TensorSpec {
  std::string name;
  Index rows;
  Index cols;
  Index offset;
  // Shared across every position of every example (positional tables).
  // Frozen during private training.
  bool positional;
};

class ParameterLayout {
 public:
  // Registers a rows x cols tensor and returns its id.
  int add(std::string name, Index rows, Index cols, bool positional = false);

  Index size() const { return size_; }
  int count() const { return static_cast<int>(specs_.size()); }
  const TensorSpec& spec(int id) const { return specs_.at(id); }
  // -1 when absent.
  int find(const std::string& name) const;

  ConstMatrixMap view(const Vector& flat, int id) const {
    const auto& s = specs_[id];
    return ConstMatrixMap(flat.data() + s.offset, s.rows, s.cols);
  }
  MatrixMap view(Vector& flat, int id) const {
    const auto& s = specs_[id];
    return MatrixMap(flat.data() + s.offset, s.rows, s.cols);
  }

  // 1 where private training may update the parameter, 0 where frozen.
  Vector private_trainable_mask() const;

 private:
  std::vector<TensorSpec> specs_;
  Index size_ = 0;
};

}  // namespace dpsyn::nn

#endif  // DPSYN_NN_PARAMETERS_HPP_
