#include "ric/conv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "ric/blas.hpp"
#include "ric/error.hpp"
#include "ric/sampler.hpp"

namespace ric::conv {

using ric::to_string;

const char* to_string(Mode mode) { return mode == Mode::kStandard ? "standard" : "ric"; }

Mode parse_mode(const std::string& text) {
  if (text == "standard") return Mode::kStandard;
  if (text == "ric") return Mode::kRic;
  throw ConfigError("unknown architecture '" + text + "' (expected standard or ric)");
}

std::size_t ConvSpec::parameter_count() const {
  return out_channels * in_channels * taps() + (bias ? out_channels : 0);
}

template <typename T>
SamplingPlan<T>::SamplingPlan(int n, std::size_t height, std::size_t blend, std::size_t pad)
    : n_(n),
      height_(height),
      blend_(blend),
      pad_(pad),
      padded_width_(height + 2 * pad) {
  const std::size_t entries = kernel_taps() * pixels();
  base_.assign(entries, 0);
  if (blend_ == 4) {
    fy_.assign(entries, T{0});
    fx_.assign(entries, T{0});
  }
}

template <typename T>
SamplingPlan<T> SamplingPlan<T>::standard(int n, std::size_t height) {
  const auto pad = static_cast<std::size_t>(n);
  SamplingPlan plan(n, height, 1, pad);
  const int h = static_cast<int>(height);
  const int k = 2 * n + 1;
  const auto wp = static_cast<int>(plan.padded_width_);
  std::size_t e = 0;
  for (int kh = 0; kh < k; ++kh) {
    for (int kw = 0; kw < k; ++kw) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < h; ++c, ++e) {
          plan.base_[e] = static_cast<std::uint32_t>((r + kh) * wp + (c + kw));
        }
      }
    }
  }
  return plan;
}

template <typename T>
SamplingPlan<T> SamplingPlan<T>::from_offsets(const geometry::OffsetField& field) {
  const int n = field.n();
  const int h = field.height();
  // Sample points lie within radius n of the output pixel, so their floor is
  // at least n + 1 rows/cols outside the image.
  const auto pad = static_cast<std::size_t>(n + 1);
  SamplingPlan plan(n, static_cast<std::size_t>(h), 4, pad);
  const int k = 2 * n + 1;
  const int p = n + 1;
  const auto wp = static_cast<int>(plan.padded_width_);
  std::size_t e = 0;
  for (int kh = 0; kh < k; ++kh) {
    for (int kw = 0; kw < k; ++kw) {
      const std::size_t slot = geometry::slot_of_kernel_tap(n, kh, kw);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < h; ++c, ++e) {
          // Lattice tap P sits at raster (r + kh - n, c + kw - n).
          const double y = r + kh - n + field.dy(r, c, slot);
          const double x = c + kw - n + field.dx(r, c, slot);
          const double fy = std::floor(y), fx = std::floor(x);
          const int iy = static_cast<int>(fy) + p, ix = static_cast<int>(fx) + p;
          if (iy < 0 || ix < 0 || iy + 1 >= wp || ix + 1 >= wp) {
            throw GeometryError("offset field sample (" + std::to_string(y) + ", " +
                                std::to_string(x) + ") lies outside radius n of its pixel");
          }
          plan.base_[e] = static_cast<std::uint32_t>(iy * wp + ix);
          plan.fy_[e] = static_cast<T>(y - fy);
          plan.fx_[e] = static_cast<T>(x - fx);
        }
      }
    }
  }
  return plan;
}

template <typename T>
void SamplingPlan<T>::pad_planes(const T* planes, std::size_t channels, T* padded) const {
  const std::size_t h = height_, wp = padded_width_;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = planes + c * h * h;
    T* dst = padded + c * wp * wp;
    for (std::size_t r = 0; r < h; ++r) {
      std::copy_n(src + r * h, h, dst + (r + pad_) * wp + pad_);
    }
  }
}

namespace {

// Per-thread buffers reused across calls. Slots 0 and 1 hold column
// matrices; 2 holds padded planes, whose zero border is never written.
template <typename T>
std::vector<T>& scratch(int which, std::size_t size) {
  thread_local std::vector<T> buffers[3];
  auto& buf = buffers[which];
  if (buf.size() < size) buf.resize(size);
  return buf;
}

// Plan entries are walked in tiles small enough to stay in L1 while every
// channel reuses them.
constexpr std::size_t kTile = 512;

}  // namespace

template <typename T>
void SamplingPlan<T>::gather(const T* planes, std::size_t channels, T* cols) const {
  const std::size_t total = kernel_taps() * pixels();
  const std::size_t plane = padded_width_ * padded_width_;
  auto& padded = scratch<T>(2, channels * plane);
  // Stale interiors from other shapes may sit in the border; clear it.
  std::fill_n(padded.data(), channels * plane, T{0});
  pad_planes(planes, channels, padded.data());
  const std::uint32_t* base = base_.data();
  const std::size_t wp = padded_width_;
  for (std::size_t first = 0; first < total; first += kTile) {
    const std::size_t last = std::min(total, first + kTile);
    for (std::size_t c = 0; c < channels; ++c) {
      const T* src = padded.data() + c * plane;
      T* out = cols + c * total;
      if (blend_ == 1) {
        for (std::size_t e = first; e < last; ++e) out[e] = src[base[e]];
      } else {
        const T* fy = fy_.data();
        const T* fx = fx_.data();
        for (std::size_t e = first; e < last; ++e) {
          const T* q = src + base[e];
          const T top = q[0] + fx[e] * (q[1] - q[0]);
          const T bottom = q[wp] + fx[e] * (q[wp + 1] - q[wp]);
          out[e] = top + fy[e] * (bottom - top);
        }
      }
    }
  }
}

template <typename T>
void SamplingPlan<T>::scatter(const T* grad_cols, std::size_t channels, T* grad_planes) const {
  const std::size_t total = kernel_taps() * pixels();
  const std::size_t plane = padded_width_ * padded_width_;
  auto& padded = scratch<T>(2, channels * plane);
  std::fill_n(padded.data(), channels * plane, T{0});
  const std::uint32_t* base = base_.data();
  const std::size_t wp = padded_width_;
  for (std::size_t first = 0; first < total; first += kTile) {
    const std::size_t last = std::min(total, first + kTile);
    for (std::size_t c = 0; c < channels; ++c) {
      T* dst = padded.data() + c * plane;
      const T* g = grad_cols + c * total;
      if (blend_ == 1) {
        for (std::size_t e = first; e < last; ++e) dst[base[e]] += g[e];
      } else {
        const T* fy = fy_.data();
        const T* fx = fx_.data();
        for (std::size_t e = first; e < last; ++e) {
          T* q = dst + base[e];
          const T gy1 = fy[e] * g[e], gy0 = g[e] - gy1;
          q[0] += gy0 - fx[e] * gy0;
          q[1] += fx[e] * gy0;
          q[wp] += gy1 - fx[e] * gy1;
          q[wp + 1] += fx[e] * gy1;
        }
      }
    }
  }
  const std::size_t h = height_;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = padded.data() + c * plane;
    T* out = grad_planes + c * h * h;
    for (std::size_t r = 0; r < h; ++r) {
      const T* row = src + (r + pad_) * wp + pad_;
      for (std::size_t col = 0; col < h; ++col) out[r * h + col] += row[col];
    }
  }
}

template <typename T>
std::shared_ptr<const SamplingPlan<T>> cached_plan(Mode mode, int n, std::size_t height) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, std::size_t>, std::shared_ptr<const SamplingPlan<T>>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{static_cast<int>(mode), n, height}];
  if (!slot) {
    if (mode == Mode::kStandard) {
      slot = std::make_shared<const SamplingPlan<T>>(SamplingPlan<T>::standard(n, height));
    } else {
      const auto field = geometry::cached_offset_field(n, static_cast<int>(height));
      slot = std::make_shared<const SamplingPlan<T>>(SamplingPlan<T>::from_offsets(*field));
    }
  }
  return slot;
}

template <typename T>
std::shared_ptr<const SamplingPlan<T>> make_plan(const ConvSpec& spec, std::size_t height,
                                                 const geometry::OffsetField* offsets) {
  if (spec.mode == Mode::kStandard) {
    if (offsets != nullptr) throw ConfigError("standard convolution does not take an offset field");
    return cached_plan<T>(Mode::kStandard, spec.n, height);
  }
  if (offsets == nullptr) {
    geometry::GridConfig(spec.n, static_cast<int>(height));
    return cached_plan<T>(Mode::kRic, spec.n, height);
  }
  if (static_cast<std::size_t>(offsets->height()) != height || offsets->n() != spec.n) {
    throw ConfigError("offset field (n=" + std::to_string(offsets->n()) +
                      ", H=" + std::to_string(offsets->height()) + ") does not match input H=" +
                      std::to_string(height) + ", n=" + std::to_string(spec.n));
  }
  return std::make_shared<const SamplingPlan<T>>(SamplingPlan<T>::from_offsets(*offsets));
}

std::size_t check_input(const ConvSpec& spec, const Shape& shape) {
  if (shape.size() != 4 || shape[1] != spec.in_channels || shape[2] != shape[3]) {
    throw ShapeError("conv input " + to_string(shape) + " does not match [B, " +
                     std::to_string(spec.in_channels) + ", H, H]");
  }
  if (spec.mode == Mode::kRic && shape[2] % 2 != 0) {
    throw ConfigError("RIC convolution requires an even grid height H, got " +
                      std::to_string(shape[2]));
  }
  return shape[2];
}

namespace {

template <typename T>
void check_params(const ConvSpec& spec, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  if (weights.shape() != spec.weight_shape()) {
    throw ShapeError("conv weights " + to_string(weights.shape()) + " do not match " +
                     to_string(spec.weight_shape()));
  }
  if (spec.bias) {
    if (bias.shape() != Shape{spec.out_channels}) {
      throw ShapeError("conv bias " + to_string(bias.shape()) + " does not match [" +
                       std::to_string(spec.out_channels) + "]");
    }
  } else if (!bias.empty()) {
    throw ShapeError("conv spec has no bias but a bias tensor was supplied");
  }
}

template <typename T>
void check_plan(const SamplingPlan<T>& plan, const ConvSpec& spec, std::size_t height) {
  if (plan.height() != height || plan.n() != spec.n) {
    throw ConfigError("sampling plan (n=" + std::to_string(plan.n()) + ", H=" +
                      std::to_string(plan.height()) + ") does not match input H=" +
                      std::to_string(height));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv_forward(const ConvSpec& spec, const BasicTensor<T>& weights,
                            const BasicTensor<T>& bias, const BasicTensor<T>& input,
                            const SamplingPlan<T>& plan) {
  const std::size_t h = check_input(spec, input.shape());
  check_params(spec, weights, bias);
  check_plan(plan, spec, h);
  const std::size_t batch = input.dim(0);
  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t hw = h * h, k = spec.taps();
  BasicTensor<T> out({batch, cout, h, h});
  std::vector<T>& cols = scratch<T>(0, cin * k * hw);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* in_b = input.data().data() + b * cin * hw;
    plan.gather(in_b, cin, cols.data());
    T* out_b = out.data().data() + b * cout * hw;
    if (spec.bias) {
      for (std::size_t o = 0; o < cout; ++o) std::fill_n(out_b + o * hw, hw, bias[o]);
    }
    blas::gemm(blas::Op::kNone, blas::Op::kNone, cout, hw, cin * k, T{1}, weights.data().data(),
               cin * k, cols.data(), hw, spec.bias ? T{1} : T{0}, out_b, hw);
  }
  return out;
}

Tensor conv_forward(const ConvSpec& spec, const Tensor& weights, const Tensor& bias,
                    const Tensor& input, const geometry::OffsetField* offsets) {
  const std::size_t h = check_input(spec, input.shape());
  const auto plan = make_plan<double>(spec, h, offsets);
  return conv_forward(spec, weights, bias, input, *plan);
}

ConvGradients conv_backward(const ConvSpec& spec, const Tensor& weights, const Tensor& input,
                            const Tensor& upstream, const SamplingPlan<double>& plan,
                            bool need_input_grad) {
  const std::size_t h = check_input(spec, input.shape());
  if (weights.shape() != spec.weight_shape()) {
    throw ShapeError("conv weights " + to_string(weights.shape()) + " do not match " +
                     to_string(spec.weight_shape()));
  }
  const std::size_t batch = input.dim(0);
  const Shape out_shape{batch, spec.out_channels, h, h};
  if (upstream.shape() != out_shape) {
    throw ShapeError("conv upstream " + to_string(upstream.shape()) + " does not match output " +
                     to_string(out_shape));
  }
  check_plan(plan, spec, h);
  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t hw = h * h, k = spec.taps();

  ConvGradients g;
  g.weights = Tensor(spec.weight_shape());
  if (spec.bias) g.bias = Tensor({cout});
  if (need_input_grad) g.input = Tensor(input.shape());

  std::vector<double>& cols = scratch<double>(0, cin * k * hw);
  std::vector<double>& grad_cols = scratch<double>(1, need_input_grad ? cin * k * hw : 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* in_b = input.data().data() + b * cin * hw;
    const double* up_b = upstream.data().data() + b * cout * hw;
    plan.gather(in_b, cin, cols.data());
    blas::gemm(blas::Op::kNone, blas::Op::kTranspose, cout, cin * k, hw, 1.0, up_b, hw,
               cols.data(), hw, 1.0, g.weights.data().data(), cin * k);
    if (spec.bias) {
      for (std::size_t o = 0; o < cout; ++o) {
        double s = 0.0;
        for (std::size_t p = 0; p < hw; ++p) s += up_b[o * hw + p];
        g.bias[o] += s;
      }
    }
    if (need_input_grad) {
      blas::gemm(blas::Op::kTranspose, blas::Op::kNone, cin * k, hw, cout, 1.0,
                 weights.data().data(), cin * k, up_b, hw, 0.0, grad_cols.data(), hw);
      double* gin_b = g.input.data().data() + b * cin * hw;
      plan.scatter(grad_cols.data(), cin, gin_b);
    }
  }
  return g;
}

ConvGradients conv_backward(const ConvSpec& spec, const Tensor& weights, const Tensor& input,
                            const geometry::OffsetField* offsets, const Tensor& upstream) {
  const std::size_t h = check_input(spec, input.shape());
  const auto plan = make_plan<double>(spec, h, offsets);
  return conv_backward(spec, weights, input, upstream, *plan, true);
}

double rotation_discrepancy(const ConvSpec& spec, const Tensor& weights, const Tensor& bias,
                            const Tensor& input, int quarter_turns) {
  const double theta = 90.0 * quarter_turns;
  const Tensor out_f = conv_forward(spec, weights, bias, input, nullptr);
  const Tensor out_g = conv_forward(spec, weights, bias, sampler::rotate_planes(input, theta), nullptr);
  // Phi(R x0, G) sits at pixel R x0 of out_g; rotating out_f moves Phi(x0, F) there too.
  return max_abs_diff(sampler::rotate_planes(out_f, theta), out_g);
}

bool negative_control(const ConvSpec& standard_spec, const Tensor& weights, const Tensor& input,
                      int quarter_turns) {
  if (max_abs_diff(sampler::rotate_planes(input, 90.0 * quarter_turns), input) == 0.0) return false;
  ConvSpec std_spec = standard_spec;
  std_spec.mode = Mode::kStandard;
  std_spec.bias = false;
  ConvSpec ric_spec = std_spec;
  ric_spec.mode = Mode::kRic;
  const double standard = rotation_discrepancy(std_spec, weights, Tensor{}, input, quarter_turns);
  const double ric = rotation_discrepancy(ric_spec, weights, Tensor{}, input, quarter_turns);
  return standard > 10.0 * ric;
}

template class SamplingPlan<double>;
template class SamplingPlan<float>;
template std::shared_ptr<const SamplingPlan<double>> cached_plan<double>(Mode, int, std::size_t);
template std::shared_ptr<const SamplingPlan<float>> cached_plan<float>(Mode, int, std::size_t);
template std::shared_ptr<const SamplingPlan<double>> make_plan<double>(
    const ConvSpec&, std::size_t, const geometry::OffsetField*);
template std::shared_ptr<const SamplingPlan<float>> make_plan<float>(
    const ConvSpec&, std::size_t, const geometry::OffsetField*);
template BasicTensor<double> conv_forward<double>(const ConvSpec&, const BasicTensor<double>&,
                                                  const BasicTensor<double>&,
                                                  const BasicTensor<double>&,
                                                  const SamplingPlan<double>&);
template BasicTensor<float> conv_forward<float>(const ConvSpec&, const BasicTensor<float>&,
                                                const BasicTensor<float>&,
                                                const BasicTensor<float>&,
                                                const SamplingPlan<float>&);

}  // namespace ric::conv
