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

// Pre-norm transformer encoder stack with explicit reverse-mode gradients.
//
// Sequences are (positions x features) matrices. A linear map stores its
// weight as (out x in) and computes Y = X W^T + 1 b^T.

#ifndef DPSYN_NN_TRANSFORMER_HPP_
#define DPSYN_NN_TRANSFORMER_HPP_

#include <string>
#include <vector>

#include "dpsyn/nn/parameters.hpp"
#include "dpsyn/rng.hpp"

namespace dpsyn::nn {

inline constexpr double kLayerNormEps = 1e-5;

// tanh approximation of GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

struct LayerNormCache {
  Matrix normalized;  // (x - mean) / std
  Vector inv_std;     // per row
};

Matrix layer_norm_forward(const Matrix& x, const Eigen::Ref<const Matrix>& gamma,
                          const Eigen::Ref<const Matrix>& beta, LayerNormCache* cache);
// Accumulates into dgamma/dbeta; returns dx.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache,
                           const Eigen::Ref<const Matrix>& gamma,
                           Eigen::Ref<Matrix> dgamma, Eigen::Ref<Matrix> dbeta);

// Sinusoidal features of a scalar position or timestep.
Vector sinusoidal_features(double position, Index dim);

struct TransformerConfig {
  int d_model = 32;
  int num_heads = 4;
  int num_layers = 2;
  int d_ff = 64;
  bool causal = false;
};

class TransformerStack {
 public:
  struct LayerCache {
    Matrix input;
    LayerNormCache ln1;
    Matrix attn_in, q, k, v;
    std::vector<Matrix> probs;  // per head
    Matrix heads;               // concatenated head outputs
    Matrix mid;                 // input + attention
    LayerNormCache ln2;
    Matrix ff_in, hidden_pre, hidden;
  };
  struct Cache {
    std::vector<LayerCache> layers;
    LayerNormCache final_ln;
  };

  TransformerStack() = default;
  // Registers the stack's tensors in `layout` under `prefix`.
  TransformerStack(ParameterLayout& layout, const TransformerConfig& config,
                   const std::string& prefix);

  const TransformerConfig& config() const { return config_; }

  void initialize(const ParameterLayout& layout, Vector& params, Rng& rng) const;

  // x: (positions x d_model). Includes the final layer norm. `cache` may be
  // null for inference.
  Matrix forward(const ParameterLayout& layout, const Vector& params,
                 const Matrix& x, Cache* cache) const;

  // Accumulates parameter gradients into `grad`; returns d loss / d x.
  Matrix backward(const ParameterLayout& layout, const Vector& params,
                  const Cache& cache, const Matrix& dy, Vector& grad) const;

 private:
  struct LayerIds {
    int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  TransformerConfig config_;
  std::vector<LayerIds> layers_;
  int final_g_ = -1;
  int final_b_ = -1;
};

// Y = X W^T + 1 b^T with W (out x in), b (out x 1).
Matrix linear_forward(const Matrix& x, const Eigen::Ref<const Matrix>& w,
                      const Eigen::Ref<const Matrix>& b);
// Accumulates dW, db; returns dX.
Matrix linear_backward(const Matrix& dy, const Matrix& x,
                       const Eigen::Ref<const Matrix>& w, Eigen::Ref<Matrix> dw,
                       Eigen::Ref<Matrix> db);

// Fills a tensor with N(0, stddev^2).
void fill_normal(Eigen::Ref<Matrix> m, double stddev, Rng& rng);

}  // namespace dpsyn::nn

#endif  // DPSYN_NN_TRANSFORMER_HPP_
