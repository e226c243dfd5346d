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

#include "bridgead/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace bridgead::nn
{

Parameter & ParameterStore::create(const std::string & name, Index rows, Index cols, Init init, std::mt19937_64 & rng)
{
  if (by_name_.count(name) != 0) {
    throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->grad = Mat::Zero(rows, cols);
  switch (init) {
    case Init::kXavier: {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] = dist(rng);
      }
      break;
    }
    case Init::kNormal: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Index i = 0; i < p->value.size(); ++i) {
        p->value.data()[i] = dist(rng);
      }
      break;
    }
    case Init::kOnes:
      p->value.setOnes();
      break;
    case Init::kZeros:
      break;
  }
  Parameter & ref = *p;
  by_name_.emplace(name, p.get());
  params_.push_back(std::move(p));
  return ref;
}

Parameter & ParameterStore::at(const std::string & name)
{
  auto * p = find(name);
  if (p == nullptr) {
    throw std::out_of_range("ParameterStore: unknown parameter '" + name + "'");
  }
  return *p;
}

const Parameter & ParameterStore::at(const std::string & name) const
{
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw std::out_of_range("ParameterStore: unknown parameter '" + name + "'");
  }
  return *it->second;
}

Parameter * ParameterStore::find(const std::string & name)
{
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter *> ParameterStore::with_prefix(const std::string & prefix) const
{
  std::vector<Parameter *> out;
  for (const auto & p : params_) {
    if (p->name.compare(0, prefix.size(), prefix) == 0) {
      out.push_back(p.get());
    }
  }
  return out;
}

std::size_t ParameterStore::scalar_count() const
{
  std::size_t n = 0;
  for (const auto & p : params_) {
    n += static_cast<std::size_t>(p->value.size());
  }
  return n;
}

void ParameterStore::zero_grad()
{
  for (auto & p : params_) {
    p->grad.setZero(p->value.rows(), p->value.cols());
  }
}

Linear Linear::create(ParameterStore & store, const std::string & name, Index in, Index out, std::mt19937_64 & rng)
{
  Linear l;
  l.weight = &store.create(name + ".weight", in, out, ParameterStore::Init::kXavier, rng);
  l.bias = &store.create(name + ".bias", 1, out, ParameterStore::Init::kZeros, rng);
  return l;
}

Var Linear::operator()(Tape & tape, const Var & x) const
{
  return linear(x, tape.parameter(*weight), tape.parameter(*bias));
}

LayerNorm LayerNorm::create(ParameterStore & store, const std::string & name, Index dim, std::mt19937_64 & rng)
{
  LayerNorm ln;
  ln.gamma = &store.create(name + ".gamma", 1, dim, ParameterStore::Init::kOnes, rng);
  ln.beta = &store.create(name + ".beta", 1, dim, ParameterStore::Init::kZeros, rng);
  return ln;
}

Var LayerNorm::operator()(Tape & tape, const Var & x) const
{
  return layer_norm(x, tape.parameter(*gamma), tape.parameter(*beta));
}

Mlp Mlp::create(
  ParameterStore & store, const std::string & name, Index in, Index hidden_dim, Index out, std::mt19937_64 & rng)
{
  return Mlp{Linear::create(store, name + ".hidden", in, hidden_dim, rng),
             Linear::create(store, name + ".output", hidden_dim, out, rng)};
}

Var Mlp::operator()(Tape & tape, const Var & x) const { return output(tape, relu(hidden(tape, x))); }

AttentionBlock AttentionBlock::create(
  ParameterStore & store, const std::string & name, Index dim, int heads, std::mt19937_64 & rng)
{
  if (heads <= 0 || dim % heads != 0) {
    throw std::invalid_argument("AttentionBlock: dim must be divisible by heads");
  }
  AttentionBlock b;
  b.query = Linear::create(store, name + ".query", dim, dim, rng);
  b.key = Linear::create(store, name + ".key", dim, dim, rng);
  b.value = Linear::create(store, name + ".value", dim, dim, rng);
  b.out = Linear::create(store, name + ".out", dim, dim, rng);
  b.norm = LayerNorm::create(store, name + ".norm", dim, rng);
  b.heads = heads;
  return b;
}

Var AttentionBlock::attention(
  Tape & tape, const Var & x, const Var & keys, const Var & values, const AttentionPattern & pattern) const
{
  const Var q = query(tape, x);
  const Var k = key(tape, keys);
  const Var v = value(tape, values);
  return out(tape, attend(q, k, v, pattern, heads));
}

Var AttentionBlock::operator()(
  Tape & tape, const Var & x, const Var & keys, const Var & values, const AttentionPattern & pattern) const
{
  const auto mask = pattern.query_mask();
  bool any = false;
  for (const auto m : mask) {
    any = any || m != 0;
  }
  if (!any) {
    return x;
  }
  const Var updated = norm(tape, add(x, attention(tape, x, keys, values, pattern)));
  return row_where(mask, updated, x);
}

FeedForwardBlock FeedForwardBlock::create(ParameterStore & store, const std::string & name, Index dim, std::mt19937_64 & rng)
{
  return FeedForwardBlock{Mlp::create(store, name + ".mlp", dim, 2 * dim, dim, rng),
                          LayerNorm::create(store, name + ".norm", dim, rng)};
}

Var FeedForwardBlock::operator()(Tape & tape, const Var & x) const { return norm(tape, add(x, mlp(tape, x))); }

}  // namespace bridgead::nn
