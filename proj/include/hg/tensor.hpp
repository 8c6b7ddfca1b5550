#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hg/error.hpp"

namespace hg {

// Cache-line aligned allocation so vectorised kernels see the same alignment for every buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename S>
using Storage = std::vector<S, AlignedAllocator<S>>;

// Dense row-major tensor with a dynamic shape. Image batches are NCHW,
// part feature sets are (B, p, C).
template <typename S>
class Tensor {
 public:
  using value_type = S;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, S fill = S(0)) : shape_(std::move(shape)) {
    for (int d : shape_) require(d >= 0, "Tensor: negative dimension");
    data_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, Storage<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == count(shape_), "Tensor: data size does not match shape " + shape_str());
  }
  Tensor(std::vector<int> shape, const std::vector<S>& data)
      : Tensor(std::move(shape), Storage<S>(data.begin(), data.end())) {}

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::span<S> span() { return data_; }
  std::span<const S> span() const { return data_; }
  Storage<S>& vec() { return data_; }
  const Storage<S>& vec() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  template <typename... I>
  S& at(I... idx) { return data_[offset(idx...)]; }
  template <typename... I>
  const S& at(I... idx) const { return data_[offset(idx...)]; }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(S(0)); }

  void reshape(std::vector<int> shape) {
    require(count(shape) == data_.size(), "Tensor::reshape: element count mismatch");
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](S v) { return std::isfinite(v); });
  }

  template <typename T>
  Tensor<T> cast() const {
    Storage<T> out(data_.begin(), data_.end());
    return Tensor<T>(shape_, std::move(out));
  }

  Tensor& operator+=(const Tensor& o) {
    require(same_shape(o), "Tensor +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ')';
    return os.str();
  }

 private:
  template <typename... I>
  std::size_t offset(I... idx) const {
    const std::size_t ids[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(I); ++k) off = off * static_cast<std::size_t>(shape_[k]) + ids[k];
    return off;
  }

  std::vector<int> shape_;
  Storage<S> data_;
};

}  // namespace hg
