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

#include "dpsyn/nn/parameters.hpp"

#include <stdexcept>

namespace dpsyn::nn {

int ParameterLayout::add(std::string name, Index rows, Index cols, bool positional) {
  if (find(name) >= 0) throw std::logic_error("duplicate tensor name: " + name);
  specs_.push_back({std::move(name), rows, cols, size_, positional});
  size_ += rows * cols;
  return static_cast<int>(specs_.size()) - 1;
}

int ParameterLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Vector ParameterLayout::private_trainable_mask() const {
  Vector mask = Vector::Ones(size_);
  for (const auto& s : specs_) {
    if (s.positional) mask.segment(s.offset, s.rows * s.cols).setZero();
  }
  return mask;
}

}  // namespace dpsyn::nn
