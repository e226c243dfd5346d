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

#ifndef BRIDGEAD__TENSOR_HPP_
#define BRIDGEAD__TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bridgead
{

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape & shape);

inline std::size_t shape_numel(const Shape & shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major n-d array. Used for cached query banks, masks and the
/// checkpoint payloads; the autodiff path works on 2-D matrices instead.
template <typename T>
class NdArray
{
public:
  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T{})
  : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
  {
  }
  NdArray(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
  {
    if (data_.size() != shape_numel(shape_)) {
      throw std::invalid_argument("NdArray: data size does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape & shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T * data() { return data_.data(); }
  const T * data() const { return data_.data(); }
  std::vector<T> & values() { return data_; }
  const std::vector<T> & values() const { return data_; }

  std::size_t offset(std::initializer_list<std::size_t> index) const
  {
    if (index.size() > shape_.size()) {
      throw std::out_of_range("NdArray: index rank exceeds array rank");
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (const std::size_t i : index) {
      if (i >= shape_[axis]) {
        throw std::out_of_range("NdArray: index out of range on axis " + std::to_string(axis));
      }
      off = off * shape_[axis] + i;
      ++axis;
    }
    // Partial index addresses the first element of the trailing block.
    for (; axis < shape_.size(); ++axis) {
      off *= shape_[axis];
    }
    return off;
  }

  T & at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  const T & at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

  /// Contiguous trailing block addressed by a partial index.
  std::span<T> block(std::initializer_list<std::size_t> index)
  {
    return {data_.data() + offset(index), block_size(index.size())};
  }
  std::span<const T> block(std::initializer_list<std::size_t> index) const
  {
    return {data_.data() + offset(index), block_size(index.size())};
  }

  std::size_t block_size(std::size_t leading_axes) const
  {
    std::size_t n = 1;
    for (std::size_t a = leading_axes; a < shape_.size(); ++a) {
      n *= shape_[a];
    }
    return n;
  }

  friend bool operator==(const NdArray &, const NdArray &) = default;

private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = NdArray<double>;
using Mask = NdArray<std::uint8_t>;

}  // namespace bridgead

#endif  // BRIDGEAD__TENSOR_HPP_
