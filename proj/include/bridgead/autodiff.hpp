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

#ifndef BRIDGEAD__AUTODIFF_HPP_
#define BRIDGEAD__AUTODIFF_HPP_

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bridgead::nn
{

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Trainable matrix with an accumulated gradient.
struct Parameter
{
  std::string name;
  Mat value;
  Mat grad;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var
{
public:
  Var() = default;

  const Mat & value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;
  Tape & tape() const { return *tape_; }
  int id() const { return id_; }

private:
  friend class Tape;
  Var(Tape * tape, int id) : tape_(tape), id_(id) {}

  Tape * tape_{nullptr};
  int id_{-1};
};

/// Reverse-mode autodiff recording. One tape per forward pass.
class Tape
{
public:
  using BackwardFn = std::function<void(Tape &, const Mat & out_grad)>;

  /// With `record_gradients == false` nothing is retained for backward.
  explicit Tape(bool record_gradients = true);
  Tape(const Tape &) = delete;
  Tape & operator=(const Tape &) = delete;

  Var constant(Mat value);
  Var parameter(Parameter & p);
  /// Record an op. `inputs` decides whether the node needs a gradient.
  Var record(Mat value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Mat value, std::span<const Var> inputs, BackwardFn backward);

  /// Seeds d(scalar)/d(scalar) = 1 and accumulates into Parameter::grad.
  void backward(const Var & scalar);

  const Mat & value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool recording() const { return record_gradients_; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient of `v` if it requires one.
  template <typename Derived>
  void accumulate(const Var & v, const Eigen::MatrixBase<Derived> & g)
  {
    if (!requires_grad(v.id())) {
      return;
    }
    Node & n = nodes_[static_cast<std::size_t>(v.id())];
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
      return;
    }
    n.grad += g;
  }
  /// Mutable gradient slot (zero-initialised on first use) for scatter-style updates.
  Mat & grad_slot(int id);

private:
  struct Node
  {
    Mat value;
    Mat grad;
    bool requires_grad{false};
    bool has_grad{false};
    Parameter * param{nullptr};
    BackwardFn backward;
  };

  bool record_gradients_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter *, int> param_nodes_;
};

// ---------------------------------------------------------------------------
// Elementary ops. All inputs must live on the same tape.

Var add(const Var & a, const Var & b);
Var sub(const Var & a, const Var & b);
Var cmul(const Var & a, const Var & b);
Var scale(const Var & a, double s);
/// a (n x c) + row (1 x c) broadcast over rows.
Var add_row(const Var & a, const Var & row);
Var matmul(const Var & a, const Var & b);
/// x W + b, W: (in x out), b: (1 x out).
Var linear(const Var & x, const Var & weight, const Var & bias);
Var relu(const Var & a);
Var sigmoid(const Var & a);
Var tanh(const Var & a);
Var layer_norm(const Var & x, const Var & gamma, const Var & beta, double eps = 1e-5);

Var gather_rows(const Var & x, std::span<const int> rows);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var & x, Index col0, Index ncols);
/// Reinterpret the row-major buffer with a new shape.
Var reshape(const Var & x, Index rows, Index cols);
/// Row i of the result is a.row(i) where take_a[i] != 0, else b.row(i).
Var row_where(std::span<const std::uint8_t> take_a, const Var & a, const Var & b);
/// Rows grouped in consecutive blocks of `block`; running sum within each block.
Var cumsum_blocks(const Var & x, Index block);
/// Mean of consecutive row blocks: (n*block x c) -> (n x c).
Var block_mean_rows(const Var & x, Index block);
/// Softmax of a column vector over consecutive blocks of `block` rows.
Var softmax_blocks(const Var & x, Index block);
/// Rescales columns (c0, c1) of every row to unit Euclidean norm.
Var normalize_col_pair(const Var & x, Index c0, Index c1);

Var sum(const Var & x);
Var mean(const Var & x);

// ---------------------------------------------------------------------------
// Fused losses.

/// Mean |pred - target| over entries where mask != 0. Requires a non-empty mask.
Var l1_masked_mean(const Var & pred, const Mat & target, const Mat & mask);
/// Sum of focal terms over all entries of `prob` (probabilities); target in {0,1}.
/// Probabilities are clamped to [eps, 1 - eps].
Var focal_loss_sum(const Var & prob, const Mat & target, double alpha, double gamma, double eps = 1e-7);

// ---------------------------------------------------------------------------
// Attention.

/// Per-query key lists in CSR form.
class AttentionPattern
{
public:
  AttentionPattern() : offsets_{0} {}

  void add_query(std::span<const int> keys);
  void add_query(std::initializer_list<int> keys) { add_query(std::span<const int>(keys.begin(), keys.size())); }

  int num_queries() const { return static_cast<int>(offsets_.size()) - 1; }
  std::span<const int> keys_of(int q) const
  {
    return {keys_.data() + offsets_[static_cast<std::size_t>(q)],
            static_cast<std::size_t>(offsets_[static_cast<std::size_t>(q) + 1] - offsets_[static_cast<std::size_t>(q)])};
  }
  bool has_keys(int q) const { return !keys_of(q).empty(); }
  /// 1 for queries with at least one key.
  std::vector<std::uint8_t> query_mask() const;
  std::size_t num_entries() const { return keys_.size(); }

private:
  std::vector<int> offsets_;
  std::vector<int> keys_;
};

/// Scaled dot-product attention over already-projected q, k, v with `heads`
/// heads. Queries without keys produce zero rows. Keys are reduced in an
/// order determined by their content, so permuting key rows permutes
/// nothing in the output.
Var attend(const Var & q, const Var & k, const Var & v, const AttentionPattern & pattern, int heads);

}  // namespace bridgead::nn

#endif  // BRIDGEAD__AUTODIFF_HPP_
