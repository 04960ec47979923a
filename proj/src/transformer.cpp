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

#include "dpsyn/nn/transformer.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace dpsyn::nn {
namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + kGeluCubic * x * x * x)));
}

double gelu_grad(double x) {
  const double inner = kGeluScale * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Matrix layer_norm_forward(const Matrix& x, const Eigen::Ref<const Matrix>& gamma,
                          const Eigen::Ref<const Matrix>& beta, LayerNormCache* cache) {
  const Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  Matrix normalized(x.rows(), x.cols());
  Vector inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).eval();
    const double var = centered.square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(i) = centered * inv_std(i);
  }
  Matrix y = (normalized.array().rowwise() * gamma.col(0).transpose().array())
                 .rowwise() +
             beta.col(0).transpose().array();
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache,
                           const Eigen::Ref<const Matrix>& gamma,
                           Eigen::Ref<Matrix> dgamma, Eigen::Ref<Matrix> dbeta) {
  const auto& xhat = cache.normalized;
  dgamma.col(0) += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
  dbeta.col(0) += dy.colwise().sum().transpose();
  const Matrix dxhat = dy.array().rowwise() * gamma.col(0).transpose().array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / d;
    const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
  }
  return dx;
}

Vector sinusoidal_features(double position, Index dim) {
  Vector out(dim);
  const Index half = dim / 2;
  for (Index i = 0; i < dim; ++i) {
    const Index j = i % std::max<Index>(half, 1);
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(j) / std::max<Index>(half, 1));
    out(i) = i < half ? std::sin(position * freq) : std::cos(position * freq);
  }
  return out;
}

Matrix linear_forward(const Matrix& x, const Eigen::Ref<const Matrix>& w,
                      const Eigen::Ref<const Matrix>& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

Matrix linear_backward(const Matrix& dy, const Matrix& x,
                       const Eigen::Ref<const Matrix>& w, Eigen::Ref<Matrix> dw,
                       Eigen::Ref<Matrix> db) {
  dw.noalias() += dy.transpose() * x;
  db.col(0) += dy.colwise().sum().transpose();
  return dy * w;
}

void fill_normal(Eigen::Ref<Matrix> m, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  }
}

TransformerStack::TransformerStack(ParameterLayout& layout,
                                   const TransformerConfig& config,
                                   const std::string& prefix)
    : config_(config) {
  const Index d = config.d_model;
  const Index f = config.d_ff;
  if (config.num_heads <= 0 || d % config.num_heads != 0) {
    throw std::invalid_argument("d_model must be divisible by num_heads");
  }
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l) + ".";
    LayerIds ids{};
    ids.ln1_g = layout.add(p + "ln1.gamma", d, 1);
    ids.ln1_b = layout.add(p + "ln1.beta", d, 1);
    ids.wq = layout.add(p + "attn.wq", d, d);
    ids.bq = layout.add(p + "attn.bq", d, 1);
    ids.wk = layout.add(p + "attn.wk", d, d);
    ids.bk = layout.add(p + "attn.bk", d, 1);
    ids.wv = layout.add(p + "attn.wv", d, d);
    ids.bv = layout.add(p + "attn.bv", d, 1);
    ids.wo = layout.add(p + "attn.wo", d, d);
    ids.bo = layout.add(p + "attn.bo", d, 1);
    ids.ln2_g = layout.add(p + "ln2.gamma", d, 1);
    ids.ln2_b = layout.add(p + "ln2.beta", d, 1);
    ids.w1 = layout.add(p + "ff.w1", f, d);
    ids.b1 = layout.add(p + "ff.b1", f, 1);
    ids.w2 = layout.add(p + "ff.w2", d, f);
    ids.b2 = layout.add(p + "ff.b2", d, 1);
    layers_.push_back(ids);
  }
  final_g_ = layout.add(prefix + ".final_ln.gamma", d, 1);
  final_b_ = layout.add(prefix + ".final_ln.beta", d, 1);
}

void TransformerStack::initialize(const ParameterLayout& layout, Vector& params,
                                  Rng& rng) const {
  const double d = config_.d_model;
  const double f = config_.d_ff;
  const double residual_scale = 1.0 / std::sqrt(2.0 * std::max(config_.num_layers, 1));
  for (const auto& ids : layers_) {
    layout.view(params, ids.ln1_g).setOnes();
    layout.view(params, ids.ln1_b).setZero();
    layout.view(params, ids.ln2_g).setOnes();
    layout.view(params, ids.ln2_b).setZero();
    for (int w : {ids.wq, ids.wk, ids.wv}) {
      fill_normal(layout.view(params, w), 1.0 / std::sqrt(d), rng);
    }
    fill_normal(layout.view(params, ids.wo), residual_scale / std::sqrt(d), rng);
    fill_normal(layout.view(params, ids.w1), 1.0 / std::sqrt(d), rng);
    fill_normal(layout.view(params, ids.w2), residual_scale / std::sqrt(f), rng);
    for (int b : {ids.bq, ids.bk, ids.bv, ids.bo, ids.b1, ids.b2}) {
      layout.view(params, b).setZero();
    }
  }
  layout.view(params, final_g_).setOnes();
  layout.view(params, final_b_).setZero();
}

Matrix TransformerStack::forward(const ParameterLayout& layout, const Vector& params,
                                 const Matrix& x, Cache* cache) const {
  const Index n = x.rows();
  const int heads = config_.num_heads;
  const Index dh = config_.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (cache != nullptr) cache->layers.assign(layers_.size(), LayerCache{});

  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& ids = layers_[l];
    LayerCache local;
    LayerCache& c = cache != nullptr ? cache->layers[l] : local;
    c.input = h;
    c.attn_in = layer_norm_forward(h, layout.view(params, ids.ln1_g),
                                   layout.view(params, ids.ln1_b), &c.ln1);
    c.q = linear_forward(c.attn_in, layout.view(params, ids.wq), layout.view(params, ids.bq));
    c.k = linear_forward(c.attn_in, layout.view(params, ids.wk), layout.view(params, ids.bk));
    c.v = linear_forward(c.attn_in, layout.view(params, ids.wv), layout.view(params, ids.bv));
    c.heads.resize(n, config_.d_model);
    c.probs.resize(heads);
    for (int hd = 0; hd < heads; ++hd) {
      const auto qh = c.q.middleCols(hd * dh, dh);
      const auto kh = c.k.middleCols(hd * dh, dh);
      const auto vh = c.v.middleCols(hd * dh, dh);
      Matrix scores = (qh * kh.transpose()) * scale;
      if (config_.causal) {
        for (Index i = 0; i < n; ++i) {
          for (Index j = i + 1; j < n; ++j) {
            scores(i, j) = -std::numeric_limits<double>::infinity();
          }
        }
      }
      Matrix& p = c.probs[hd];
      p.resize(n, n);
      for (Index i = 0; i < n; ++i) {
        const double m = scores.row(i).maxCoeff();
        p.row(i) = (scores.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
      }
      c.heads.middleCols(hd * dh, dh) = p * vh;
    }
    c.mid = h + linear_forward(c.heads, layout.view(params, ids.wo),
                               layout.view(params, ids.bo));
    c.ff_in = layer_norm_forward(c.mid, layout.view(params, ids.ln2_g),
                                 layout.view(params, ids.ln2_b), &c.ln2);
    c.hidden_pre =
        linear_forward(c.ff_in, layout.view(params, ids.w1), layout.view(params, ids.b1));
    c.hidden = c.hidden_pre.unaryExpr([](double v) { return gelu(v); });
    h = c.mid +
        linear_forward(c.hidden, layout.view(params, ids.w2), layout.view(params, ids.b2));
  }
  LayerNormCache local_final;
  return layer_norm_forward(h, layout.view(params, final_g_), layout.view(params, final_b_),
                            cache != nullptr ? &cache->final_ln : &local_final);
}

Matrix TransformerStack::backward(const ParameterLayout& layout, const Vector& params,
                                  const Cache& cache, const Matrix& dy,
                                  Vector& grad) const {
  const int heads = config_.num_heads;
  const Index dh = config_.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dh_out = layer_norm_backward(dy, cache.final_ln, layout.view(params, final_g_),
                                      layout.view(grad, final_g_),
                                      layout.view(grad, final_b_));
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& ids = layers_[li];
    const LayerCache& c = cache.layers[li];

    // Feed-forward branch.
    Matrix dmid = dh_out;
    const Matrix dhidden =
        linear_backward(dh_out, c.hidden, layout.view(params, ids.w2),
                        layout.view(grad, ids.w2), layout.view(grad, ids.b2));
    const Matrix dpre =
        dhidden.array() * c.hidden_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    const Matrix dff_in =
        linear_backward(dpre, c.ff_in, layout.view(params, ids.w1),
                        layout.view(grad, ids.w1), layout.view(grad, ids.b1));
    dmid += layer_norm_backward(dff_in, c.ln2, layout.view(params, ids.ln2_g),
                                layout.view(grad, ids.ln2_g), layout.view(grad, ids.ln2_b));

    // Attention branch.
    Matrix dinput = dmid;
    const Matrix dheads =
        linear_backward(dmid, c.heads, layout.view(params, ids.wo),
                        layout.view(grad, ids.wo), layout.view(grad, ids.bo));
    Matrix dq(c.q.rows(), c.q.cols());
    Matrix dk(c.k.rows(), c.k.cols());
    Matrix dv(c.v.rows(), c.v.cols());
    for (int hd = 0; hd < heads; ++hd) {
      const Matrix& p = c.probs[hd];
      const auto qh = c.q.middleCols(hd * dh, dh);
      const auto kh = c.k.middleCols(hd * dh, dh);
      const auto vh = c.v.middleCols(hd * dh, dh);
      const auto dout = dheads.middleCols(hd * dh, dh);
      const Matrix dp = dout * vh.transpose();
      dv.middleCols(hd * dh, dh) = p.transpose() * dout;
      const Vector row_dot = (dp.array() * p.array()).rowwise().sum();
      const Matrix dscores = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
      dq.middleCols(hd * dh, dh) = dscores * kh;
      dk.middleCols(hd * dh, dh) = dscores.transpose() * qh;
    }
    Matrix dattn_in =
        linear_backward(dq, c.attn_in, layout.view(params, ids.wq), layout.view(grad, ids.wq),
                        layout.view(grad, ids.bq));
    dattn_in += linear_backward(dk, c.attn_in, layout.view(params, ids.wk),
                                layout.view(grad, ids.wk), layout.view(grad, ids.bk));
    dattn_in += linear_backward(dv, c.attn_in, layout.view(params, ids.wv),
                                layout.view(grad, ids.wv), layout.view(grad, ids.bv));
    dinput += layer_norm_backward(dattn_in, c.ln1, layout.view(params, ids.ln1_g),
                                  layout.view(grad, ids.ln1_g), layout.view(grad, ids.ln1_b));
    dh_out = std::move(dinput);
  }
  return dh_out;
}

}  // namespace dpsyn::nn
