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

#ifndef BRIDGEAD__LAYERS_HPP_
#define BRIDGEAD__LAYERS_HPP_

#include "bridgead/autodiff.hpp"

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace bridgead::nn
{

/// Owns every trainable matrix of a model under hierarchical dotted names.
/// Addresses are stable for the lifetime of the store.
class ParameterStore
{
public:
  enum class Init { kXavier, kZeros, kOnes, kNormal };

  Parameter & create(const std::string & name, Index rows, Index cols, Init init, std::mt19937_64 & rng);

  Parameter & at(const std::string & name);
  const Parameter & at(const std::string & name) const;
  Parameter * find(const std::string & name);
  bool contains(const std::string & name) const { return by_name_.count(name) != 0; }

  /// Parameters in creation order.
  const std::vector<std::unique_ptr<Parameter>> & parameters() const { return params_; }
  std::vector<Parameter *> with_prefix(const std::string & prefix) const;
  std::size_t scalar_count() const;

  void zero_grad();

private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter *> by_name_;
};

struct Linear
{
  Parameter * weight{nullptr};  // in x out
  Parameter * bias{nullptr};    // 1 x out

  static Linear create(ParameterStore & store, const std::string & name, Index in, Index out, std::mt19937_64 & rng);
  Var operator()(Tape & tape, const Var & x) const;
};

struct LayerNorm
{
  Parameter * gamma{nullptr};
  Parameter * beta{nullptr};

  static LayerNorm create(ParameterStore & store, const std::string & name, Index dim, std::mt19937_64 & rng);
  Var operator()(Tape & tape, const Var & x) const;
};

/// Two-layer perceptron with a ReLU hidden layer.
struct Mlp
{
  Linear hidden;
  Linear output;

  static Mlp create(
    ParameterStore & store, const std::string & name, Index in, Index hidden_dim, Index out, std::mt19937_64 & rng);
  Var operator()(Tape & tape, const Var & x) const;
};

/// Residual attention sublayer: x <- LayerNorm(x + O(attend(Q x, K kv, V kv))).
/// Rows whose key list is empty are passed through bit-for-bit.
struct AttentionBlock
{
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  LayerNorm norm;
  int heads{1};

  static AttentionBlock create(
    ParameterStore & store, const std::string & name, Index dim, int heads, std::mt19937_64 & rng);

  /// Projected attention output only (no residual / normalisation).
  Var attention(Tape & tape, const Var & x, const Var & keys, const Var & values, const AttentionPattern & pattern) const;
  Var operator()(Tape & tape, const Var & x, const Var & keys, const Var & values, const AttentionPattern & pattern) const;
  Var operator()(Tape & tape, const Var & x, const Var & kv, const AttentionPattern & pattern) const
  {
    return (*this)(tape, x, kv, kv, pattern);
  }
};

/// Residual feed-forward sublayer: x <- LayerNorm(x + Mlp(x)).
struct FeedForwardBlock
{
  Mlp mlp;
  LayerNorm norm;

  static FeedForwardBlock create(ParameterStore & store, const std::string & name, Index dim, std::mt19937_64 & rng);
  Var operator()(Tape & tape, const Var & x) const;
};

}  // namespace bridgead::nn

#endif  // BRIDGEAD__LAYERS_HPP_
