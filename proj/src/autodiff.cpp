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

#include "bridgead/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bridgead::nn
{

const Mat & Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Tape::Tape(bool record_gradients) : record_gradients_(record_gradients) { nodes_.reserve(1024); }

Var Tape::constant(Mat value)
{
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter & p)
{
  if (const auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.value = p.value;
  n.requires_grad = record_gradients_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Mat value, std::initializer_list<Var> inputs, BackwardFn backward)
{
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Mat value, std::span<const Var> inputs, BackwardFn backward)
{
  Node n;
  n.value = std::move(value);
  if (record_gradients_) {
    for (const auto & in : inputs) {
      if (&in.tape() != this) {
        throw std::logic_error("Tape::record: input from a different tape");
      }
      n.requires_grad = n.requires_grad || requires_grad(in.id());
    }
    if (n.requires_grad) {
      n.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat & Tape::grad_slot(int id)
{
  Node & n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var & scalar)
{
  if (!record_gradients_) {
    throw std::logic_error("Tape::backward: tape does not record gradients");
  }
  if (scalar.rows() != 1 || scalar.cols() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be 1x1");
  }
  if (!requires_grad(scalar.id())) {
    return;
  }
  grad_slot(scalar.id())(0, 0) += 1.0;
  for (int id = scalar.id(); id >= 0; --id) {
    Node & n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.requires_grad) {
      continue;
    }
    if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
  for (auto & [param, id] : param_nodes_) {
    const Node & n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
      continue;
    }
    if (param->grad.rows() != n.grad.rows() || param->grad.cols() != n.grad.cols()) {
      param->grad = Mat::Zero(n.grad.rows(), n.grad.cols());
    }
    param->grad += n.grad;
  }
}

namespace
{

void require_same_shape(const Var & a, const Var & b, const char * op)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

// Each output row is accumulated from its own input row in a fixed order, so
// the result of a row does not depend on where it sits in the matrix.
Mat row_product(const Mat & a, const Mat & b)
{
  Mat out = Mat::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      out.row(i) += a(i, k) * b.row(k);
    }
  }
  return out;
}

}  // namespace

Var add(const Var & a, const Var & b)
{
  require_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape & t, const Mat & g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var & a, const Var & b)
{
  require_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape & t, const Mat & g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var cmul(const Var & a, const Var & b)
{
  require_same_shape(a, b, "cmul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape & t, const Mat & g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var & a, double s)
{
  return a.tape().record(a.value() * s, {a}, [a, s](Tape & t, const Mat & g) { t.accumulate(a, g * s); });
}

Var add_row(const Var & a, const Var & row)
{
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: expected a 1 x cols row");
  }
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape & t, const Mat & g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var matmul(const Var & a, const Var & b)
{
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Mat out = row_product(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape & t, const Mat & g) {
    if (a.requires_grad()) {
      t.accumulate(a, g * b.value().transpose());
    }
    if (b.requires_grad()) {
      t.accumulate(b, a.value().transpose() * g);
    }
  });
}

Var linear(const Var & x, const Var & weight, const Var & bias)
{
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw std::invalid_argument("linear: shape mismatch");
  }
  Mat out = row_product(x.value(), weight.value());
  out.rowwise() += bias.value().row(0);
  return x.tape().record(std::move(out), {x, weight, bias}, [x, weight, bias](Tape & t, const Mat & g) {
    if (x.requires_grad()) {
      t.accumulate(x, g * weight.value().transpose());
    }
    if (weight.requires_grad()) {
      t.accumulate(weight, x.value().transpose() * g);
    }
    t.accumulate(bias, g.colwise().sum());
  });
}

Var relu(const Var & a)
{
  return a.tape().record(a.value().cwiseMax(0.0), {a}, [a](Tape & t, const Mat & g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var sigmoid(const Var & a)
{
  // Scalar std:: functions throughout: Eigen's packet exp/tanh differ from the
  // scalar path in the last bits, which would make results depend on position.
  Mat out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Mat saved = out;
  return a.tape().record(std::move(out), {a}, [a, s = std::move(saved)](Tape & t, const Mat & g) {
    t.accumulate(a, (g.array() * s.array() * (1.0 - s.array())).matrix());
  });
}

Var tanh(const Var & a)
{
  Mat out = a.value().unaryExpr([](double v) { return std::tanh(v); });
  Mat saved = out;
  return a.tape().record(std::move(out), {a}, [a, th = std::move(saved)](Tape & t, const Mat & g) {
    t.accumulate(a, (g.array() * (1.0 - th.array() * th.array())).matrix());
  });
}

Var layer_norm(const Var & x, const Var & gamma, const Var & beta, double eps)
{
  const Index n = x.rows();
  const Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw std::invalid_argument("layer_norm: gamma/beta must be 1 x cols");
  }
  Mat xhat(n, c);
  Eigen::VectorXd inv_std(n);
  // Sequential sums: vectorised reductions group terms by memory alignment.
  for (Index r = 0; r < n; ++r) {
    double mu = 0.0;
    for (Index j = 0; j < c; ++j) {
      mu += x.value()(r, j);
    }
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (Index j = 0; j < c; ++j) {
      const double d = x.value()(r, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = ((x.value().row(r).array() - mu) * inv_std(r)).matrix();
  }
  Mat out = xhat;
  for (Index r = 0; r < n; ++r) {
    out.row(r) = (xhat.row(r).array() * gamma.value().row(0).array() + beta.value().row(0).array()).matrix();
  }
  return x.tape().record(
    std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat = std::move(xhat), inv_std](Tape & t, const Mat & g) {
      const Index rows = g.rows();
      const Index cols = g.cols();
      if (gamma.requires_grad()) {
        t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
      }
      t.accumulate(beta, g.colwise().sum());
      if (x.requires_grad()) {
        Mat dx(rows, cols);
        for (Index r = 0; r < rows; ++r) {
          const Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gamma.value().row(0));
          const double m1 = dxhat.mean();
          const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
          dx.row(r) = inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
        }
        t.accumulate(x, dx);
      }
    });
}

Var gather_rows(const Var & x, std::span<const int> rows)
{
  Mat out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw std::out_of_range("gather_rows: row index out of range");
    }
    out.row(static_cast<Index>(i)) = x.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return x.tape().record(std::move(out), {x}, [x, idx = std::move(idx)](Tape & t, const Mat & g) {
    Mat & dst = t.grad_slot(x.id());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      dst.row(idx[i]) += g.row(static_cast<Index>(i));
    }
  });
}

Var concat_rows(std::span<const Var> parts)
{
  if (parts.empty()) {
    throw std::invalid_argument("concat_rows: no inputs");
  }
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const auto & p : parts) {
    if (p.cols() != cols) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    rows += p.rows();
  }
  Mat out(rows, cols);
  Index r = 0;
  for (const auto & p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs](Tape & t, const Mat & g) {
    Index r0 = 0;
    for (const auto & p : inputs) {
      t.accumulate(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts)
{
  if (parts.empty()) {
    throw std::invalid_argument("concat_cols: no inputs");
  }
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto & p : parts) {
    if (p.rows() != rows) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    cols += p.cols();
  }
  Mat out(rows, cols);
  Index c = 0;
  for (const auto & p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs](Tape & t, const Mat & g) {
    Index c0 = 0;
    for (const auto & p : inputs) {
      t.accumulate(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

Var slice_cols(const Var & x, Index col0, Index ncols)
{
  if (col0 < 0 || ncols < 0 || col0 + ncols > x.cols()) {
    throw std::out_of_range("slice_cols: range out of bounds");
  }
  return x.tape().record(x.value().middleCols(col0, ncols), {x}, [x, col0, ncols](Tape & t, const Mat & g) {
    t.grad_slot(x.id()).middleCols(col0, ncols) += g;
  });
}

Var reshape(const Var & x, Index rows, Index cols)
{
  if (rows * cols != x.rows() * x.cols()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  Mat out = Eigen::Map<const Mat>(x.value().data(), rows, cols);
  const Index r0 = x.rows();
  const Index c0 = x.cols();
  return x.tape().record(std::move(out), {x}, [x, r0, c0](Tape & t, const Mat & g) {
    t.accumulate(x, Eigen::Map<const Mat>(g.data(), r0, c0));
  });
}

Var row_where(std::span<const std::uint8_t> take_a, const Var & a, const Var & b)
{
  require_same_shape(a, b, "row_where");
  if (static_cast<Index>(take_a.size()) != a.rows()) {
    throw std::invalid_argument("row_where: mask length mismatch");
  }
  Mat out = b.value();
  for (Index r = 0; r < a.rows(); ++r) {
    if (take_a[static_cast<std::size_t>(r)] != 0) {
      out.row(r) = a.value().row(r);
    }
  }
  std::vector<std::uint8_t> mask(take_a.begin(), take_a.end());
  return a.tape().record(std::move(out), {a, b}, [a, b, mask = std::move(mask)](Tape & t, const Mat & g) {
    if (a.requires_grad()) {
      Mat & da = t.grad_slot(a.id());
      for (Index r = 0; r < g.rows(); ++r) {
        if (mask[static_cast<std::size_t>(r)] != 0) {
          da.row(r) += g.row(r);
        }
      }
    }
    if (b.requires_grad()) {
      Mat & db = t.grad_slot(b.id());
      for (Index r = 0; r < g.rows(); ++r) {
        if (mask[static_cast<std::size_t>(r)] == 0) {
          db.row(r) += g.row(r);
        }
      }
    }
  });
}

Var cumsum_blocks(const Var & x, Index block)
{
  if (block <= 0 || x.rows() % block != 0) {
    throw std::invalid_argument("cumsum_blocks: rows not divisible by block");
  }
  Mat out = x.value();
  for (Index b0 = 0; b0 < out.rows(); b0 += block) {
    for (Index r = 1; r < block; ++r) {
      out.row(b0 + r) += out.row(b0 + r - 1);
    }
  }
  return x.tape().record(std::move(out), {x}, [x, block](Tape & t, const Mat & g) {
    Mat dx = g;
    for (Index b0 = 0; b0 < dx.rows(); b0 += block) {
      for (Index r = block - 2; r >= 0; --r) {
        dx.row(b0 + r) += dx.row(b0 + r + 1);
      }
    }
    t.accumulate(x, dx);
  });
}

Var block_mean_rows(const Var & x, Index block)
{
  if (block <= 0 || x.rows() % block != 0) {
    throw std::invalid_argument("block_mean_rows: rows not divisible by block");
  }
  const Index n = x.rows() / block;
  Mat out(n, x.cols());
  for (Index i = 0; i < n; ++i) {
    out.row(i) = x.value().row(i * block);
    for (Index r = 1; r < block; ++r) {
      out.row(i) += x.value().row(i * block + r);
    }
    out.row(i) /= static_cast<double>(block);
  }
  return x.tape().record(std::move(out), {x}, [x, block, n](Tape & t, const Mat & g) {
    Mat dx(n * block, g.cols());
    for (Index i = 0; i < n; ++i) {
      for (Index r = 0; r < block; ++r) {
        dx.row(i * block + r) = g.row(i) / static_cast<double>(block);
      }
    }
    t.accumulate(x, dx);
  });
}

Var softmax_blocks(const Var & x, Index block)
{
  if (x.cols() != 1 || block <= 0 || x.rows() % block != 0) {
    throw std::invalid_argument("softmax_blocks: expected a column vector divisible by block");
  }
  Mat out(x.rows(), 1);
  for (Index b0 = 0; b0 < x.rows(); b0 += block) {
    const auto seg = x.value().col(0).segment(b0, block);
    const double m = seg.maxCoeff();
    const Eigen::VectorXd e = seg.unaryExpr([m](double v) { return std::exp(v - m); });
    out.col(0).segment(b0, block) = e / e.sum();
  }
  Mat saved = out;
  return x.tape().record(std::move(out), {x}, [x, block, s = std::move(saved)](Tape & t, const Mat & g) {
    Mat dx(s.rows(), 1);
    for (Index b0 = 0; b0 < s.rows(); b0 += block) {
      const auto sv = s.col(0).segment(b0, block);
      const auto gv = g.col(0).segment(b0, block);
      const double dot = sv.dot(gv);
      dx.col(0).segment(b0, block) = (sv.array() * (gv.array() - dot)).matrix();
    }
    t.accumulate(x, dx);
  });
}

Var normalize_col_pair(const Var & x, Index c0, Index c1)
{
  Mat out = x.value();
  for (Index r = 0; r < out.rows(); ++r) {
    const double a = out(r, c0);
    const double b = out(r, c1);
    const double n = std::sqrt(a * a + b * b);
    if (n < 1e-12) {
      out(r, c0) = 0.0;
      out(r, c1) = 1.0;
    } else {
      out(r, c0) = a / n;
      out(r, c1) = b / n;
    }
  }
  return x.tape().record(std::move(out), {x}, [x, c0, c1](Tape & t, const Mat & g) {
    Mat dx = g;
    for (Index r = 0; r < dx.rows(); ++r) {
      const double a = x.value()(r, c0);
      const double b = x.value()(r, c1);
      const double n2 = a * a + b * b;
      const double n = std::sqrt(n2);
      if (n < 1e-12) {
        dx(r, c0) = 0.0;
        dx(r, c1) = 0.0;
        continue;
      }
      const double n3 = n2 * n;
      const double ga = g(r, c0);
      const double gb = g(r, c1);
      dx(r, c0) = (ga * b * b - gb * a * b) / n3;
      dx(r, c1) = (gb * a * a - ga * a * b) / n3;
    }
    t.accumulate(x, dx);
  });
}

Var sum(const Var & x)
{
  Mat out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(std::move(out), {x}, [x](Tape & t, const Mat & g) {
    t.accumulate(x, Mat::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var & x)
{
  const double n = static_cast<double>(x.rows() * x.cols());
  if (n == 0.0) {
    throw std::invalid_argument("mean: empty input");
  }
  return scale(sum(x), 1.0 / n);
}

Var l1_masked_mean(const Var & pred, const Mat & target, const Mat & mask)
{
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || mask.rows() != target.rows() ||
      mask.cols() != target.cols()) {
    throw std::invalid_argument("l1_masked_mean: shape mismatch");
  }
  double count = 0.0;
  double total = 0.0;
  for (Index r = 0; r < target.rows(); ++r) {
    for (Index c = 0; c < target.cols(); ++c) {
      if (mask(r, c) != 0.0) {
        count += 1.0;
        total += std::abs(pred.value()(r, c) - target(r, c));
      }
    }
  }
  if (count == 0.0) {
    throw std::invalid_argument("l1_masked_mean: empty mask");
  }
  Mat out(1, 1);
  out(0, 0) = total / count;
  return pred.tape().record(std::move(out), {pred}, [pred, target, mask, count](Tape & t, const Mat & g) {
    Mat d = Mat::Zero(target.rows(), target.cols());
    for (Index r = 0; r < target.rows(); ++r) {
      for (Index c = 0; c < target.cols(); ++c) {
        if (mask(r, c) != 0.0) {
          const double diff = pred.value()(r, c) - target(r, c);
          d(r, c) = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * g(0, 0) / count;
        }
      }
    }
    t.accumulate(pred, d);
  });
}

Var focal_loss_sum(const Var & prob, const Mat & target, double alpha, double gamma, double eps)
{
  if (prob.rows() != target.rows() || prob.cols() != target.cols()) {
    throw std::invalid_argument("focal_loss_sum: shape mismatch");
  }
  double total = 0.0;
  for (Index r = 0; r < target.rows(); ++r) {
    for (Index c = 0; c < target.cols(); ++c) {
      const double p = std::clamp(prob.value()(r, c), eps, 1.0 - eps);
      if (target(r, c) != 0.0) {
        total += -alpha * std::pow(1.0 - p, gamma) * std::log(p);
      } else {
        total += -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
      }
    }
  }
  Mat out(1, 1);
  out(0, 0) = total;
  return prob.tape().record(std::move(out), {prob}, [prob, target, alpha, gamma, eps](Tape & t, const Mat & g) {
    Mat d = Mat::Zero(target.rows(), target.cols());
    for (Index r = 0; r < target.rows(); ++r) {
      for (Index c = 0; c < target.cols(); ++c) {
        const double raw = prob.value()(r, c);
        if (raw < eps || raw > 1.0 - eps) {
          continue;  // clamped: flat
        }
        const double p = raw;
        double dp = 0.0;
        if (target(r, c) != 0.0) {
          const double q = 1.0 - p;
          const double pow_term = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0) * std::log(p);
          dp = alpha * (pow_term - std::pow(q, gamma) / p);
        } else {
          const double pow_term = gamma == 0.0 ? 0.0 : gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p);
          dp = -(1.0 - alpha) * (pow_term - std::pow(p, gamma) / (1.0 - p));
        }
        d(r, c) = dp * g(0, 0);
      }
    }
    t.accumulate(prob, d);
  });
}

void AttentionPattern::add_query(std::span<const int> keys)
{
  keys_.insert(keys_.end(), keys.begin(), keys.end());
  offsets_.push_back(static_cast<int>(keys_.size()));
}

std::vector<std::uint8_t> AttentionPattern::query_mask() const
{
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_queries()));
  for (int q = 0; q < num_queries(); ++q) {
    mask[static_cast<std::size_t>(q)] = has_keys(q) ? 1 : 0;
  }
  return mask;
}

Var attend(const Var & q, const Var & k, const Var & v, const AttentionPattern & pattern, int heads)
{
  const Index nq = q.rows();
  const Index c = q.cols();
  if (heads <= 0 || c % heads != 0) {
    throw std::invalid_argument("attend: channel count not divisible by heads");
  }
  if (k.cols() != c || v.cols() != c || k.rows() != v.rows()) {
    throw std::invalid_argument("attend: q/k/v shape mismatch");
  }
  if (pattern.num_queries() != nq) {
    throw std::invalid_argument("attend: pattern query count mismatch");
  }
  const Index dh = c / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat & qv = q.value();
  const Mat & kv = k.value();
  const Mat & vv = v.value();

  // Weights stored per (entry, head) in the order the keys were reduced.
  struct Entry
  {
    int key;
    double weight;
  };
  std::vector<Entry> reduced(pattern.num_entries() * static_cast<std::size_t>(heads));
  std::vector<std::size_t> base(static_cast<std::size_t>(nq) + 1, 0);

  Mat out = Mat::Zero(nq, c);
  std::vector<double> logits;
  std::vector<int> order;
  std::size_t cursor = 0;
  for (Index i = 0; i < nq; ++i) {
    base[static_cast<std::size_t>(i)] = cursor;
    const auto keys = pattern.keys_of(static_cast<int>(i));
    const std::size_t n = keys.size();
    if (n == 0) {
      continue;
    }
    for (Index h = 0; h < heads; ++h) {
      const Index c0 = h * dh;
      logits.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (keys[j] < 0 || keys[j] >= kv.rows()) {
          throw std::out_of_range("attend: key index out of range");
        }
        logits[j] = inv_sqrt * qv.row(i).segment(c0, dh).dot(kv.row(keys[j]).segment(c0, dh));
      }
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (logits[static_cast<std::size_t>(a)] != logits[static_cast<std::size_t>(b)]) {
          return logits[static_cast<std::size_t>(a)] < logits[static_cast<std::size_t>(b)];
        }
        const auto va = vv.row(keys[static_cast<std::size_t>(a)]).segment(c0, dh);
        const auto vb = vv.row(keys[static_cast<std::size_t>(b)]).segment(c0, dh);
        for (Index d = 0; d < dh; ++d) {
          if (va(d) != vb(d)) {
            return va(d) < vb(d);
          }
        }
        return false;
      });
      const double m = logits[static_cast<std::size_t>(order.back())];
      double denom = 0.0;
      for (const int j : order) {
        denom += std::exp(logits[static_cast<std::size_t>(j)] - m);
      }
      for (const int j : order) {
        const double w = std::exp(logits[static_cast<std::size_t>(j)] - m) / denom;
        const int key = keys[static_cast<std::size_t>(j)];
        out.row(i).segment(c0, dh) += w * vv.row(key).segment(c0, dh);
        reduced[cursor++] = Entry{key, w};
      }
    }
  }
  base[static_cast<std::size_t>(nq)] = cursor;

  return q.tape().record(
    std::move(out), {q, k, v},
    [q, k, v, heads, dh, inv_sqrt, reduced = std::move(reduced), base = std::move(base)](Tape & t, const Mat & g) {
      const bool need_q = q.requires_grad();
      const bool need_k = k.requires_grad();
      const bool need_v = v.requires_grad();
      Mat * dq = need_q ? &t.grad_slot(q.id()) : nullptr;
      Mat * dk = need_k ? &t.grad_slot(k.id()) : nullptr;
      Mat * dv = need_v ? &t.grad_slot(v.id()) : nullptr;
      const Mat & qv = q.value();
      const Mat & kv = k.value();
      const Mat & vv = v.value();
      std::vector<double> dw;
      for (Index i = 0; i < g.rows(); ++i) {
        const std::size_t b0 = base[static_cast<std::size_t>(i)];
        const std::size_t b1 = base[static_cast<std::size_t>(i) + 1];
        if (b0 == b1) {
          continue;
        }
        const std::size_t n = (b1 - b0) / static_cast<std::size_t>(heads);
        for (Index h = 0; h < heads; ++h) {
          const Index c0 = h * dh;
          const std::size_t e0 = b0 + static_cast<std::size_t>(h) * n;
          const auto gi = g.row(i).segment(c0, dh);
          dw.resize(n);
          double wdw = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const Entry & e = reduced[e0 + j];
            dw[j] = gi.dot(vv.row(e.key).segment(c0, dh));
            wdw += e.weight * dw[j];
            if (dv != nullptr) {
              dv->row(e.key).segment(c0, dh) += e.weight * gi;
            }
          }
          for (std::size_t j = 0; j < n; ++j) {
            const Entry & e = reduced[e0 + j];
            const double dl = e.weight * (dw[j] - wdw) * inv_sqrt;
            if (dq != nullptr) {
              dq->row(i).segment(c0, dh) += dl * kv.row(e.key).segment(c0, dh);
            }
            if (dk != nullptr) {
              dk->row(e.key).segment(c0, dh) += dl * qv.row(i).segment(c0, dh);
            }
          }
        }
      }
    });
}

}  // namespace bridgead::nn
