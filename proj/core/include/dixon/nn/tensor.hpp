#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dixon/error.hpp"

namespace dixon::nn {

// Cache-line aligned storage. Vectorized kernels peel differently for
// different start addresses, so fixed alignment keeps float results
// independent of where the allocator happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Dense array with a shape. Rank-5 tensors are (batch, channels, x, y, z) and
// are stored x-fastest inside each (batch, channel) block, matching Volume.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    data_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, const std::vector<T>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != count(shape_)) {
      fail(ErrorCode::kShape, "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                  shape_string(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor(std::vector<int>{}, std::vector<T>{v}); }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }
  static std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + ")";
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T& operator[](std::size_t n) noexcept { return data_[n]; }
  T operator[](std::size_t n) const noexcept { return data_[n]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Rank-5 helpers.
  int batch() const { return dim(0); }
  int channels() const { return dim(1); }
  std::array<int, 3> spatial() const { return {dim(2), dim(3), dim(4)}; }
  std::size_t spatial_size() const {
    return static_cast<std::size_t>(dim(2)) * static_cast<std::size_t>(dim(3)) * static_cast<std::size_t>(dim(4));
  }

  std::string shape_string() const { return shape_string(shape_); }

 private:
  std::vector<int> shape_;
  AlignedVector<T> data_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.shape(), T(0));
}

template <typename T>
void require_rank5(const Tensor<T>& t, const char* what) {
  if (t.rank() != 5) {
    fail(ErrorCode::kShape, std::string(what) + " expects a (batch, channels, x, y, z) tensor, got " +
                                t.shape_string());
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShape, std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace dixon::nn
