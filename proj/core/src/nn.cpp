#include "ric/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "ric/blas.hpp"
#include "ric/error.hpp"
#include "ric/sampler.hpp"

namespace ric::nn {

namespace {

template <typename T>
void require_rank4(const BasicTensor<T>& x, const std::string& layer) {
  if (x.rank() != 4) {
    throw ShapeError(layer + ": expected a [B, C, H, W] tensor, got " + to_string(x.shape()));
  }
}

template <typename T>
void require_cached(bool cached, const std::string& layer) {
  if (!cached) throw StateError(layer + ": backward called before forward");
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, conv::ConvSpec spec)
    : Layer<T>(std::move(name)),
      weight(spec.weight_shape()),
      grad_weight(spec.weight_shape()),
      spec_(spec) {
  if (spec_.bias) {
    bias = BasicTensor<T>({spec_.out_channels});
    grad_bias = BasicTensor<T>({spec_.out_channels});
  }
}

template <typename T>
void Conv2d<T>::prepare(std::size_t h) {
  if (!plan_ || plan_->height() != h) plan_ = conv::cached_plan<T>(spec_.mode, spec_.n, h);
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x, bool /*training*/) {
  const std::size_t h = conv::check_input(spec_, x.shape());
  prepare(h);
  input_ = x;
  return conv::conv_forward(spec_, weight, bias, input_, *plan_);
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward_owned(BasicTensor<T>&& x, bool /*training*/) {
  const std::size_t h = conv::check_input(spec_, x.shape());
  prepare(h);
  input_ = std::move(x);
  return conv::conv_forward(spec_, weight, bias, input_, *plan_);
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!input_.empty(), this->name_);
  if constexpr (std::is_same_v<T, double>) {
    auto g = conv::conv_backward(spec_, weight, input_, upstream, *plan_, this->need_input_grad_);
    grad_weight = std::move(g.weights);
    if (spec_.bias) grad_bias = std::move(g.bias);
    input_ = BasicTensor<T>{};
    return std::move(g.input);
  } else {
    throw StateError(this->name_ + ": backward requires 64-bit tensors");
  }
}

template <typename T>
std::vector<ParamRef<T>> Conv2d<T>::parameters() {
  std::vector<ParamRef<T>> out{{this->name_ + ".weight", &weight, &grad_weight}};
  if (spec_.bias) out.push_back({this->name_ + ".bias", &bias, &grad_bias});
  return out;
}

template <typename T>
std::size_t Conv2d<T>::parameter_count() const {
  return spec_.parameter_count();
}

template <typename T>
std::vector<StateRef<T>> Conv2d<T>::state() {
  std::vector<StateRef<T>> out{{this->name_ + ".weight", &weight}};
  if (spec_.bias) out.push_back({this->name_ + ".bias", &bias});
  return out;
}

template <typename T>
std::unique_ptr<Layer<T>> Conv2d<T>::clone() const {
  return std::make_unique<Conv2d>(*this);
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, std::size_t channels, double eps, double momentum)
    : Layer<T>(std::move(name)),
      gamma(fill<T>({channels}, T{1})),
      beta({channels}),
      grad_gamma({channels}),
      grad_beta({channels}),
      running_mean({channels}),
      running_var(fill<T>({channels}, T{1})),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::forward(const BasicTensor<T>& x, bool training) {
  return forward_owned(BasicTensor<T>(x), training);
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::forward_owned(BasicTensor<T>&& x, bool training) {
  require_rank4(x, this->name_);
  if (x.dim(1) != channels_) {
    throw ShapeError(this->name_ + ": expected " + std::to_string(channels_) + " channels, got " +
                     to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), hw = x.dim(2) * x.dim(3);
  if (training && batch == 1) {
    throw ConfigError(this->name_ + ": training-mode batch normalization needs batch size > 1");
  }
  const std::size_t m = batch * hw;
  BasicTensor<T> y = std::move(x);
  if (x_hat_.shape() != y.shape()) x_hat_ = BasicTensor<T>(y.shape());
  has_cache_ = true;
  inv_std_.assign(channels_, T{0});
  cached_training_ = training;
  const T* src = y.data().data();
  T* xh = x_hat_.data().data();
  T* dst = y.data().data();
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = src + (b * channels_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) mean += p[i];
      }
      mean /= double(m);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = src + (b * channels_ + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= double(m);
      running_mean[c] = static_cast<T>((1.0 - momentum_) * running_mean[c] + momentum_ * mean);
      running_var[c] = static_cast<T>((1.0 - momentum_) * running_var[c] +
                                      momentum_ * var * double(m) / double(m - 1));
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = static_cast<T>(inv);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const T v = static_cast<T>((src[off + i] - mean) * inv);
        xh[off + i] = v;
        dst[off + i] = gamma[c] * v + beta[c];
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(has_cache_, this->name_);
  if (upstream.shape() != x_hat_.shape()) {
    throw ShapeError(this->name_ + ": upstream " + to_string(upstream.shape()) +
                     " does not match " + to_string(x_hat_.shape()));
  }
  const std::size_t batch = upstream.dim(0), hw = upstream.dim(2) * upstream.dim(3);
  const double m = double(batch * hw);
  BasicTensor<T> dx(upstream.shape());
  const T* up = upstream.data().data();
  const T* xh = x_hat_.data().data();
  T* out = dx.data().data();
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_up = 0.0, sum_up_xh = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_up += up[off + i];
        sum_up_xh += up[off + i] * xh[off + i];
      }
    }
    grad_beta[c] = static_cast<T>(sum_up);
    grad_gamma[c] = static_cast<T>(sum_up_xh);
    const double scale = double(gamma[c]) * inv_std_[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        if (cached_training_) {
          out[off + i] = static_cast<T>(scale / m * (m * up[off + i] - sum_up - xh[off + i] * sum_up_xh));
        } else {
          out[off + i] = static_cast<T>(scale * up[off + i]);
        }
      }
    }
  }
  has_cache_ = false;
  return dx;
}

template <typename T>
std::vector<ParamRef<T>> BatchNorm2d<T>::parameters() {
  return {{this->name_ + ".weight", &gamma, &grad_gamma},
          {this->name_ + ".bias", &beta, &grad_beta}};
}

template <typename T>
std::size_t BatchNorm2d<T>::parameter_count() const {
  return 2 * channels_;
}

template <typename T>
std::vector<StateRef<T>> BatchNorm2d<T>::state() {
  return {{this->name_ + ".weight", &gamma},
          {this->name_ + ".bias", &beta},
          {this->name_ + ".running_mean", &running_mean},
          {this->name_ + ".running_var", &running_var}};
}

template <typename T>
std::unique_ptr<Layer<T>> BatchNorm2d<T>::clone() const {
  return std::make_unique<BatchNorm2d>(*this);
}

// ------------------------------------------------------------------ ReLU

template <typename T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& x, bool training) {
  return forward_owned(BasicTensor<T>(x), training);
}

template <typename T>
BasicTensor<T> ReLU<T>::forward_owned(BasicTensor<T>&& x, bool /*training*/) {
  BasicTensor<T> y = std::move(x);
  shape_ = y.shape();
  active_.resize(y.size());
  T* v = y.data().data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    // NaN passes through so divergence surfaces in the loss.
    active_[i] = v[i] > T{0};
    if (v[i] < T{0}) v[i] = T{0};
  }
  return y;
}

template <typename T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!shape_.empty(), this->name_);
  if (upstream.shape() != shape_) {
    throw ShapeError(this->name_ + ": upstream shape mismatch " + to_string(upstream.shape()));
  }
  BasicTensor<T> dx = upstream;
  T* g = dx.data().data();
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!active_[i]) g[i] = T{0};
  }
  shape_.clear();
  return dx;
}

template <typename T>
std::unique_ptr<Layer<T>> ReLU<T>::clone() const {
  return std::make_unique<ReLU>(*this);
}

// ------------------------------------------------------------ MaxPool2x2

template <typename T>
BasicTensor<T> MaxPool2x2<T>::forward(const BasicTensor<T>& x, bool /*training*/) {
  require_rank4(x, this->name_);
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError(this->name_ + ": spatial extents must be even, got " + to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  BasicTensor<T> y({b, c, oh, ow});
  argmax_.assign(y.size(), 0);
  input_shape_ = x.shape();
  const T* src = x.data().data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t col = 0; col < ow; ++col, ++o) {
        std::size_t best = base + 2 * r * w + 2 * col;
        for (std::size_t dr = 0; dr < 2; ++dr) {
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t idx = base + (2 * r + dr) * w + 2 * col + dc;
            if (src[idx] > src[best]) best = idx;
          }
        }
        argmax_[o] = best;
        y[o] = src[best];
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> MaxPool2x2<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!input_shape_.empty(), this->name_);
  if (upstream.size() != argmax_.size()) {
    throw ShapeError(this->name_ + ": upstream shape mismatch " + to_string(upstream.shape()));
  }
  BasicTensor<T> dx(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += upstream[o];
  input_shape_.clear();
  return dx;
}

template <typename T>
std::unique_ptr<Layer<T>> MaxPool2x2<T>::clone() const {
  return std::make_unique<MaxPool2x2>(*this);
}

// --------------------------------------------------------------- AvgPool

template <typename T>
BasicTensor<T> AvgPool<T>::forward(const BasicTensor<T>& x, bool /*training*/) {
  require_rank4(x, this->name_);
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % k_ != 0 || w % k_ != 0) {
    throw ShapeError(this->name_ + ": spatial extents of " + to_string(x.shape()) +
                     " are not multiples of " + std::to_string(k_));
  }
  const std::size_t oh = h / k_, ow = w / k_;
  BasicTensor<T> y({b, c, oh, ow});
  input_shape_ = x.shape();
  const T* src = x.data().data();
  const double scale = 1.0 / double(k_ * k_);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const T* p = src + plane * h * w;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t col = 0; col < ow; ++col, ++o) {
        double s = 0.0;
        for (std::size_t dr = 0; dr < k_; ++dr) {
          for (std::size_t dc = 0; dc < k_; ++dc) s += p[(r * k_ + dr) * w + col * k_ + dc];
        }
        y[o] = static_cast<T>(s * scale);
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> AvgPool<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!input_shape_.empty(), this->name_);
  BasicTensor<T> dx(input_shape_);
  const std::size_t h = input_shape_[2], w = input_shape_[3];
  const std::size_t oh = h / k_, ow = w / k_;
  if (upstream.size() != input_shape_[0] * input_shape_[1] * oh * ow) {
    throw ShapeError(this->name_ + ": upstream shape mismatch " + to_string(upstream.shape()));
  }
  const T scale = static_cast<T>(1.0 / double(k_ * k_));
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < input_shape_[0] * input_shape_[1]; ++plane) {
    T* p = dx.data().data() + plane * h * w;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t col = 0; col < ow; ++col, ++o) {
        for (std::size_t dr = 0; dr < k_; ++dr) {
          for (std::size_t dc = 0; dc < k_; ++dc) p[(r * k_ + dr) * w + col * k_ + dc] = upstream[o] * scale;
        }
      }
    }
  }
  input_shape_.clear();
  return dx;
}

template <typename T>
std::unique_ptr<Layer<T>> AvgPool<T>::clone() const {
  return std::make_unique<AvgPool>(*this);
}

// --------------------------------------------------------------- Flatten

template <typename T>
BasicTensor<T> Flatten<T>::forward(const BasicTensor<T>& x, bool /*training*/) {
  input_shape_ = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

template <typename T>
BasicTensor<T> Flatten<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!input_shape_.empty(), this->name_);
  auto dx = upstream.reshaped(input_shape_);
  input_shape_.clear();
  return dx;
}

template <typename T>
std::unique_ptr<Layer<T>> Flatten<T>::clone() const {
  return std::make_unique<Flatten>(*this);
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in, std::size_t out)
    : Layer<T>(std::move(name)),
      weight({out, in}),
      bias({out}),
      grad_weight({out, in}),
      grad_bias({out}) {}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x, bool /*training*/) {
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  if (x.rank() != 2 || x.dim(1) != in) {
    throw ShapeError(this->name_ + ": input " + to_string(x.shape()) + " does not match [B, " +
                     std::to_string(in) + "]");
  }
  const std::size_t batch = x.dim(0);
  BasicTensor<T> y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) y.at(b, o) = bias[o];
  }
  blas::gemm(blas::Op::kNone, blas::Op::kTranspose, batch, out, in, T{1}, x.data().data(), in,
             weight.data().data(), in, T{1}, y.data().data(), out);
  input_ = x;
  return y;
}

template <typename T>
BasicTensor<T> Linear<T>::backward(const BasicTensor<T>& upstream) {
  require_cached<T>(!input_.empty(), this->name_);
  const std::size_t out = weight.dim(0), in = weight.dim(1), batch = input_.dim(0);
  if (upstream.shape() != Shape{batch, out}) {
    throw ShapeError(this->name_ + ": upstream shape mismatch " + to_string(upstream.shape()));
  }
  blas::gemm(blas::Op::kTranspose, blas::Op::kNone, out, in, batch, T{1}, upstream.data().data(),
             out, input_.data().data(), in, T{0}, grad_weight.data().data(), in);
  for (std::size_t o = 0; o < out; ++o) {
    T s{0};
    for (std::size_t b = 0; b < batch; ++b) s += upstream.at(b, o);
    grad_bias[o] = s;
  }
  BasicTensor<T> dx({batch, in});
  blas::gemm(blas::Op::kNone, blas::Op::kNone, batch, in, out, T{1}, upstream.data().data(), out,
             weight.data().data(), in, T{0}, dx.data().data(), in);
  input_ = BasicTensor<T>{};
  return dx;
}

template <typename T>
std::vector<ParamRef<T>> Linear<T>::parameters() {
  return {{this->name_ + ".weight", &weight, &grad_weight},
          {this->name_ + ".bias", &bias, &grad_bias}};
}

template <typename T>
std::size_t Linear<T>::parameter_count() const {
  return weight.size() + bias.size();
}

template <typename T>
std::vector<StateRef<T>> Linear<T>::state() {
  return {{this->name_ + ".weight", &weight}, {this->name_ + ".bias", &bias}};
}

template <typename T>
std::unique_ptr<Layer<T>> Linear<T>::clone() const {
  return std::make_unique<Linear>(*this);
}

// --------------------------------------------------------------- Network

template <typename T>
Network<T>::Network(const Network& other)
    : arch_(other.arch_),
      height_(other.height_),
      training_(other.training_),
      input_grad_(other.input_grad_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Network<T>::add(std::unique_ptr<Layer<T>> layer) {
  layer->set_need_input_grad(input_grad_ || !layers_.empty());
  layers_.push_back(std::move(layer));
}

template <typename T>
void Network<T>::set_input_gradient(bool need) {
  input_grad_ = need;
  if (!layers_.empty()) layers_.front()->set_need_input_grad(need);
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& x) {
  BasicTensor<T> h = x;
  for (auto& l : layers_) h = l->forward_owned(std::move(h), training_);
  has_forward_ = true;
  return h;
}

template <typename T>
std::vector<BasicTensor<T>> Network<T>::forward_trace(const BasicTensor<T>& x) {
  std::vector<BasicTensor<T>> out;
  out.reserve(layers_.size());
  const BasicTensor<T>* h = &x;
  for (auto& l : layers_) {
    out.push_back(l->forward(*h, training_));
    h = &out.back();
  }
  has_forward_ = true;
  return out;
}

template <typename T>
BasicTensor<T> Network<T>::backward(const BasicTensor<T>& upstream) {
  if (!has_forward_) throw StateError("network backward called before forward");
  BasicTensor<T> g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
  }
  has_forward_ = false;
  return g;
}

template <typename T>
Indices Network<T>::predict(const BasicTensor<T>& x) {
  return argmax_lastaxis(forward(x));
}

template <typename T>
std::vector<ParamRef<T>> Network<T>::parameters() {
  std::vector<ParamRef<T>> out;
  for (auto& l : layers_) {
    for (auto& p : l->parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<StateRef<T>> Network<T>::state() {
  std::vector<StateRef<T>> out;
  for (auto& l : layers_) {
    for (auto& s : l->state()) out.push_back(s);
  }
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l->parameter_count();
  return total;
}

template <typename T>
std::vector<std::size_t> Network<T>::conv_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i]->kind() == "conv") out.push_back(i);
  }
  return out;
}

template <typename T>
Network<T> Network<T>::truncated(std::size_t count) const {
  if (count == 0 || count > layers_.size()) {
    throw ConfigError("cannot truncate a " + std::to_string(layers_.size()) +
                      "-layer network to " + std::to_string(count) + " layers");
  }
  Network out(arch_, height_);
  out.training_ = training_;
  out.input_grad_ = input_grad_;
  for (std::size_t i = 0; i < count; ++i) out.add(layers_[i]->clone());
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [B, K], got " + to_string(logits.shape()));
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(double(logits.at(r, j) - mx));
    for (std::size_t j = 0; j < k; ++j) out.at(r, j) = static_cast<T>(std::exp(double(logits.at(r, j) - mx)) / z);
  }
  return out;
}

template <typename T>
Network<T> build_baseline(conv::Mode mode, int height) {
  if (height != 32) {
    throw ConfigError("the baseline architecture needs 32x32 inputs (8x8 average pooling after "
                      "two 2x2 poolings), got H=" + std::to_string(height));
  }
  Network<T> net(mode, height);
  const std::size_t widths[] = {32, 32, 64, 64, 128, 128};
  std::size_t in = 1;
  std::size_t h = static_cast<std::size_t>(height);
  for (int i = 0; i < 6; ++i) {
    const std::string id = std::to_string(i + 1);
    conv::ConvSpec spec{in, widths[i], 1, mode, true};
    auto c = std::make_unique<Conv2d<T>>("conv" + id, spec);
    c->prepare(h);
    net.add(std::move(c));
    net.add(std::make_unique<BatchNorm2d<T>>("bn" + id, widths[i]));
    net.add(std::make_unique<ReLU<T>>("relu" + id));
    if (i == 1 || i == 3) {
      net.add(std::make_unique<MaxPool2x2<T>>("pool" + id));
      h /= 2;
    }
    in = widths[i];
  }
  net.add(std::make_unique<AvgPool<T>>("avgpool", 8));
  net.add(std::make_unique<Flatten<T>>("flatten"));
  net.add(std::make_unique<Linear<T>>("fc", 128, 10));
  return net;
}

void initialize(Network<double>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    if (auto* c = dynamic_cast<Conv2d<double>*>(&l)) {
      const double bound = 1.0 / std::sqrt(double(c->spec().in_channels * c->spec().taps()));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : c->weight.data()) v = dist(rng);
      for (auto& v : c->bias.data()) v = dist(rng);
    } else if (auto* fc = dynamic_cast<Linear<double>*>(&l)) {
      const double bound = 1.0 / std::sqrt(double(fc->weight.dim(1)));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : fc->weight.data()) v = dist(rng);
      for (auto& v : fc->bias.data()) v = dist(rng);
    }
  }
}

void calibrate_batchnorm(Network<double>& net, const Tensor& images, std::size_t chunk) {
  if (images.rank() != 4 || images.dim(0) == 0 || chunk == 0) {
    throw ShapeError("calibrate_batchnorm expects a non-empty [N, C, H, H] batch, got " +
                     to_string(images.shape()));
  }
  const std::size_t n = images.dim(0);
  Tensor h = images;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& layer = net.layer(i);
    if (auto* bn = dynamic_cast<BatchNorm2d<double>*>(&layer)) {
      const std::size_t channels = h.dim(1), hw = h.dim(2) * h.dim(3);
      for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          const double* p = &h[(b * channels + c) * hw];
          for (std::size_t k = 0; k < hw; ++k) {
            sum += p[k];
            sq += p[k] * p[k];
          }
        }
        const double count = double(n * hw);
        const double mean = sum / count;
        bn->running_mean[c] = mean;
        bn->running_var[c] = std::max(sq / count - mean * mean, 0.0);
      }
    }
    std::vector<Tensor> parts;
    for (std::size_t first = 0; first < n; first += chunk) {
      parts.push_back(layer.forward(h.slice0(first, std::min(chunk, n - first)), false));
    }
    Shape shape = parts.front().shape();
    shape[0] = n;
    std::vector<double> joined;
    joined.reserve(shape_product(shape));
    for (const auto& p : parts) joined.insert(joined.end(), p.data().begin(), p.data().end());
    h = Tensor(shape, std::move(joined));
  }
}

Network<double> build_baseline(conv::Mode mode, int height, std::uint64_t seed) {
  auto net = build_baseline<double>(mode, height);
  initialize(net, seed);
  return net;
}

template <typename U>
Network<U> convert_baseline(Network<double>& net) {
  auto out = build_baseline<U>(net.arch(), net.height());
  auto src = net.state();
  auto dst = out.state();
  if (src.size() != dst.size()) throw ShapeError("convert_baseline: network is not a baseline");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].value->shape() != dst[i].value->shape()) {
      throw ShapeError("convert_baseline: state entry '" + src[i].name + "' does not match");
    }
    *dst[i].value = src[i].value->template cast<U>();
  }
  out.set_training(net.training());
  return out;
}

Tensor rotate_feature_map(const Tensor& map, double theta_deg) {
  return sampler::rotate_planes(map, theta_deg);
}

#define RIC_INSTANTIATE_NN(T)                                                \
  template class Conv2d<T>;                                                  \
  template class BatchNorm2d<T>;                                             \
  template class ReLU<T>;                                                    \
  template class MaxPool2x2<T>;                                              \
  template class AvgPool<T>;                                                 \
  template class Flatten<T>;                                                 \
  template class Linear<T>;                                                  \
  template class Network<T>;                                                 \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                 \
  template Network<T> build_baseline<T>(conv::Mode, int);                    \
  template Network<T> convert_baseline<T>(Network<double>&);

RIC_INSTANTIATE_NN(double)
RIC_INSTANTIATE_NN(float)

#undef RIC_INSTANTIATE_NN

}  // namespace ric::nn
