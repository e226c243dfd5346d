// Copyright 2026 The BridgeAD Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef ORACLES__ATTENTION_ORACLE_HPP_
#define ORACLES__ATTENTION_ORACLE_HPP_

#include "bridgead/layers.hpp"
#include "oracles/memory_oracle.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace bridgead::testing
{

inline nn::Mat apply_linear(const nn::Linear & l, const nn::Mat & x)
{
  nn::Mat y = x * l.weight->value;
  y.rowwise() += l.bias->value.row(0);
  return y;
}

/// Two-layer ReLU MLP.
inline nn::Mat apply_mlp(const nn::Mlp & mlp, const nn::Mat & x)
{
  return apply_linear(mlp.output, apply_linear(mlp.hidden, x).cwiseMax(0.0));
}

inline nn::Mat apply_layer_norm(const nn::LayerNorm & ln, const nn::Mat & x, double eps = 1e-5)
{
  nn::Mat y(x.rows(), x.cols());
  for (nn::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    double var = 0.0;
    for (nn::Index c = 0; c < x.cols(); ++c) {
      var += (x(i, c) - mu) * (x(i, c) - mu);
    }
    var /= static_cast<double>(x.cols());
    for (nn::Index c = 0; c < x.cols(); ++c) {
      y(i, c) = ln.gamma->value(0, c) * (x(i, c) - mu) / std::sqrt(var + eps) + ln.beta->value(0, c);
    }
  }
  return y;
}

/// Residual attention sublayer evaluated row by row on an explicitly gathered
/// key subset, with plain Eigen and the dense softmax reference. Rows with no
/// keys are returned unchanged.
inline nn::Mat reference_block(const nn::AttentionBlock & block, const nn::Mat & x, const nn::Mat & kv,
                               const std::vector<std::vector<int>> & keys)
{
  nn::Mat out = x;
  const nn::Index c = x.cols();
  const nn::Index dh = c / block.heads;
  for (nn::Index i = 0; i < x.rows(); ++i) {
    const auto & rows = keys[static_cast<std::size_t>(i)];
    if (rows.empty()) {
      continue;
    }
    nn::Mat subset(static_cast<nn::Index>(rows.size()), kv.cols());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      subset.row(static_cast<nn::Index>(j)) = kv.row(rows[j]);
    }
    const nn::Mat q = apply_linear(block.query, x.row(i));
    const nn::Mat k = apply_linear(block.key, subset);
    const nn::Mat v = apply_linear(block.value, subset);
    nn::Mat att(1, c);
    for (int h = 0; h < block.heads; ++h) {
      att.middleCols(h * dh, dh) =
        dense_attention_reference(q.middleCols(h * dh, dh), k.middleCols(h * dh, dh), v.middleCols(h * dh, dh));
    }
    const nn::Mat y = x.row(i) + apply_linear(block.out, att);
    out.row(i) = apply_layer_norm(block.norm, y);
  }
  return out;
}

inline std::vector<std::vector<int>> pattern_keys(const nn::AttentionPattern & pattern)
{
  std::vector<std::vector<int>> out;
  for (int q = 0; q < pattern.num_queries(); ++q) {
    const auto k = pattern.keys_of(q);
    out.emplace_back(k.begin(), k.end());
  }
  return out;
}

/// Queue holding a random subset of the `lags` frames before `current`, each
/// with a random subset of agent ids drawn from [0, pool).
inline memory::MemoryQueue random_queue(int current, int lags, int pool, const MemoryDims & d, std::mt19937_64 & rng)
{
  memory::MemoryQueue q(static_cast<std::size_t>(lags));
  std::bernoulli_distribution present(0.75);
  for (int f = current - lags; f < current; ++f) {
    if (f >= 0 && present(rng)) {
      q.push(random_frame(f, random_ids(pool, rng), d, rng));
    }
  }
  return q;
}

}  // namespace bridgead::testing

#endif  // ORACLES__ATTENTION_ORACLE_HPP_
