#include "ric/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ric/blas.hpp"
#include "ric/error.hpp"

namespace ric {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename T, typename F>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, F f) {
  require_same_shape(a, b, op);
  BasicTensor<T> out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_product(shape_), T{0});
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_product(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

template <typename T>
T& BasicTensor<T>::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}
template <typename T>
const T& BasicTensor<T>::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}
template <typename T>
T& BasicTensor<T>::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
template <typename T>
const T& BasicTensor<T>::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
template <typename T>
T& BasicTensor<T>::at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
  return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}
template <typename T>
const T& BasicTensor<T>::at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
  return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape_product(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice0(std::size_t first, std::size_t count) const {
  if (shape_.empty() || count == 0 || first + count > shape_[0]) {
    throw ShapeError("slice0 [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + to_string(shape_));
  }
  const std::size_t stride = data_.size() / shape_[0];
  Shape s = shape_;
  s[0] = count;
  std::vector<T> d(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                   data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return BasicTensor(std::move(s), std::move(d));
}

template <typename T>
BasicTensor<T> zeros(Shape shape) {
  return BasicTensor<T>(std::move(shape));
}

template <typename T>
BasicTensor<T> fill(Shape shape, T value) {
  BasicTensor<T> t(std::move(shape));
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
void axpy(T scale, const BasicTensor<T>& b, BasicTensor<T>& a) {
  require_same_shape(a, b, "axpy");
  auto x = b.data();
  auto y = a.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * x[i];
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> out({m, n});
  blas::gemm(blas::Op::kNone, blas::Op::kNone, m, n, k, T{1}, a.data().data(), k,
             b.data().data(), n, T{0}, out.data().data(), n);
  return out;
}

template <typename T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& a, const std::vector<std::size_t>& axes) {
  const std::size_t rank = a.rank();
  std::vector<bool> reduced(rank, false);
  for (auto ax : axes) {
    if (ax >= rank) {
      throw ShapeError("reduce_sum: axis " + std::to_string(ax) + " out of range for " +
                       to_string(a.shape()));
    }
    reduced[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < rank; ++i) {
    if (!reduced[i]) out_shape.push_back(a.dim(i));
  }
  if (out_shape.empty()) out_shape = {1};
  BasicTensor<T> out(out_shape);

  // Output strides expressed per input axis (zero on reduced axes).
  std::vector<std::size_t> out_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    if (!reduced[i]) {
      out_stride[i] = s;
      s *= a.dim(i);
    }
  }
  std::vector<std::size_t> idx(rank, 0);
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < rank; ++i) o += idx[i] * out_stride[i];
    dst[o] += src[flat];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < a.dim(i)) break;
      idx[i] = 0;
    }
  }
  return out;
}

template <typename T>
T sum(const BasicTensor<T>& a) {
  return std::accumulate(a.data().begin(), a.data().end(), T{0});
}

template <typename T>
Indices argmax_lastaxis(const BasicTensor<T>& a) {
  if (a.empty()) throw ShapeError("argmax_lastaxis: empty tensor");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.size() / cols;
  Indices out(rows);
  auto d = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = d.subspan(r * cols, cols);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T m{0};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

#define RIC_INSTANTIATE_TENSOR(T)                                                      \
  template class BasicTensor<T>;                                                       \
  template BasicTensor<T> zeros<T>(Shape);                                             \
  template BasicTensor<T> fill<T>(Shape, T);                                           \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> sub<T>(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template void axpy<T>(T, const BasicTensor<T>&, BasicTensor<T>&);                    \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);     \
  template BasicTensor<T> reduce_sum<T>(const BasicTensor<T>&,                         \
                                        const std::vector<std::size_t>&);              \
  template T sum<T>(const BasicTensor<T>&);                                            \
  template Indices argmax_lastaxis<T>(const BasicTensor<T>&);                          \
  template T max_abs_diff<T>(const BasicTensor<T>&, const BasicTensor<T>&);

RIC_INSTANTIATE_TENSOR(double)
RIC_INSTANTIATE_TENSOR(float)

#undef RIC_INSTANTIATE_TENSOR

}  // namespace ric
