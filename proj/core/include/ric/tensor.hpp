#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ric {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

/// Dense row-major array. Activations are NCHW, kernels are [out, in, kh, kw].
///
/// A default-constructed tensor is the empty placeholder (rank 0, no data);
/// every other tensor has extents >= 1 and exactly product(shape) elements.
/// Copies are deep, so tensors behave as values.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  [[nodiscard]] const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t i, std::size_t j);
  const T& at(std::size_t i, std::size_t j) const;
  T& at(std::size_t i, std::size_t j, std::size_t k);
  const T& at(std::size_t i, std::size_t j, std::size_t k) const;
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l);
  const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const;

  /// Same data, new shape with equal element count.
  [[nodiscard]] BasicTensor reshaped(Shape shape) const;

  /// Contiguous slab [first, first + count) along axis 0.
  [[nodiscard]] BasicTensor slice0(std::size_t first, std::size_t count) const;

  template <typename U>
  [[nodiscard]] BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;
using Indices = std::vector<std::size_t>;

template <typename T>
BasicTensor<T> zeros(Shape shape);
template <typename T>
BasicTensor<T> fill(Shape shape, T value);

inline Tensor zeros(Shape shape) { return zeros<double>(std::move(shape)); }
inline Tensor fill(Shape shape, double value) { return fill<double>(std::move(shape), value); }

/// Elementwise arithmetic; shapes must be equal.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// In-place a += scale * b.
template <typename T>
void axpy(T scale, const BasicTensor<T>& b, BasicTensor<T>& a);

/// 2-D matrix product [m,k] x [k,n] -> [m,n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Sums over the listed axes and drops them. Reducing every axis yields shape {1}.
template <typename T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& a, const std::vector<std::size_t>& axes);

/// Sum of all elements.
template <typename T>
T sum(const BasicTensor<T>& a);

/// Index of the maximum along the last axis for every leading row;
/// ties resolve to the first occurrence.
template <typename T>
Indices argmax_lastaxis(const BasicTensor<T>& a);

/// Largest absolute elementwise difference; shapes must be equal.
template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace ric
