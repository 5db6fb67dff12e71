#pragma once

// Layers and the 6-conv MNIST architecture in standard and RIC variants.
// Networks are templated on the scalar type; training (backward) requires
// double, float exists for throughput measurement.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ric/conv.hpp"
#include "ric/tensor.hpp"

namespace ric::nn {

template <typename T>
struct ParamRef {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;
};

template <typename T>
struct StateRef {
  std::string name;
  BasicTensor<T>* value = nullptr;
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] virtual std::string kind() const = 0;

  virtual BasicTensor<T> forward(const BasicTensor<T>& x, bool training) = 0;
  /// Same result as forward; layers that cache their input may take it over.
  virtual BasicTensor<T> forward_owned(BasicTensor<T>&& x, bool training) {
    return forward(x, training);
  }
  /// Gradient with respect to the last forward input; parameter gradients
  /// are overwritten, not accumulated.
  virtual BasicTensor<T> backward(const BasicTensor<T>& upstream) = 0;

  virtual std::vector<ParamRef<T>> parameters() { return {}; }
  [[nodiscard]] virtual std::size_t parameter_count() const { return 0; }
  /// Trainable parameters followed by non-trainable buffers.
  virtual std::vector<StateRef<T>> state() { return {}; }
  [[nodiscard]] virtual std::unique_ptr<Layer> clone() const = 0;

  /// The first layer of a network never needs an input gradient.
  void set_need_input_grad(bool need) { need_input_grad_ = need; }

 protected:
  Layer(const Layer&) = default;
  Layer& operator=(const Layer&) = default;

  std::string name_;
  bool need_input_grad_ = true;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, conv::ConvSpec spec);

  [[nodiscard]] std::string kind() const override { return "conv"; }
  [[nodiscard]] const conv::ConvSpec& spec() const noexcept { return spec_; }

  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> forward_owned(BasicTensor<T>&& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override;
  [[nodiscard]] std::size_t parameter_count() const override;
  std::vector<StateRef<T>> state() override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

  /// Fetches the shared sampling plan for an input of height h.
  void prepare(std::size_t h);

  BasicTensor<T> weight, bias, grad_weight, grad_bias;

 private:
  conv::ConvSpec spec_;
  std::shared_ptr<const conv::SamplingPlan<T>> plan_;
  BasicTensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(std::string name, std::size_t channels, double eps = 1e-5, double momentum = 0.1);

  [[nodiscard]] std::string kind() const override { return "batchnorm"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> forward_owned(BasicTensor<T>&& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override;
  [[nodiscard]] std::size_t parameter_count() const override;
  std::vector<StateRef<T>> state() override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

  BasicTensor<T> gamma, beta, grad_gamma, grad_beta, running_mean, running_var;

 private:
  std::size_t channels_;
  double eps_;
  double momentum_;
  bool cached_training_ = false;
  bool has_cache_ = false;
  BasicTensor<T> x_hat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  [[nodiscard]] std::string kind() const override { return "relu"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> forward_owned(BasicTensor<T>&& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

 private:
  Shape shape_;
  std::vector<std::uint8_t> active_;
};

/// 2x2 max pooling, stride 2. Ties resolve to the first element in
/// row-major order within the window.
template <typename T>
class MaxPool2x2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  [[nodiscard]] std::string kind() const override { return "maxpool"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

  /// Flat input index that produced each output element.
  [[nodiscard]] const std::vector<std::size_t>& argmax() const noexcept { return argmax_; }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Non-overlapping k x k average pooling.
template <typename T>
class AvgPool final : public Layer<T> {
 public:
  AvgPool(std::string name, std::size_t k) : Layer<T>(std::move(name)), k_(k) {}
  [[nodiscard]] std::string kind() const override { return "avgpool"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

 private:
  std::size_t k_;
  Shape input_shape_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  [[nodiscard]] std::string kind() const override { return "flatten"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

 private:
  Shape input_shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, std::size_t in, std::size_t out);
  [[nodiscard]] std::string kind() const override { return "linear"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, bool training) override;
  BasicTensor<T> backward(const BasicTensor<T>& upstream) override;
  std::vector<ParamRef<T>> parameters() override;
  [[nodiscard]] std::size_t parameter_count() const override;
  std::vector<StateRef<T>> state() override;
  [[nodiscard]] std::unique_ptr<Layer<T>> clone() const override;

  BasicTensor<T> weight, bias, grad_weight, grad_bias;

 private:
  BasicTensor<T> input_;
};

template <typename T>
class Network {
 public:
  Network() = default;
  Network(conv::Mode arch, int height) : arch_(arch), height_(height) {}
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer);

  [[nodiscard]] conv::Mode arch() const noexcept { return arch_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return layers_.size(); }
  [[nodiscard]] Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  [[nodiscard]] const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  void set_training(bool training) noexcept { training_ = training; }
  /// Training never needs d loss / d input, so it is skipped by default.
  void set_input_gradient(bool need);
  [[nodiscard]] bool training() const noexcept { return training_; }

  BasicTensor<T> forward(const BasicTensor<T>& x);
  /// Output of every layer, in order; the last entry is the logits.
  std::vector<BasicTensor<T>> forward_trace(const BasicTensor<T>& x);
  /// Backpropagates upstream and returns the gradient with respect to the
  /// network input, which is empty unless set_input_gradient(true). Throws
  /// StateError when no forward pass has run since construction or the last
  /// backward.
  BasicTensor<T> backward(const BasicTensor<T>& upstream);
  Indices predict(const BasicTensor<T>& x);

  std::vector<ParamRef<T>> parameters();
  std::vector<StateRef<T>> state();
  [[nodiscard]] std::size_t parameter_count() const;

  /// Indices of the conv layers in forward order.
  [[nodiscard]] std::vector<std::size_t> conv_layers() const;

  /// Copy of the first `count` layers.
  [[nodiscard]] Network truncated(std::size_t count) const;

 private:
  conv::Mode arch_ = conv::Mode::kStandard;
  int height_ = 0;
  bool training_ = false;
  bool has_forward_ = false;
  bool input_grad_ = false;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Row-wise softmax of [B, K] logits.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Six 3x3 convs (32, 32, 64, 64, 128, 128), each followed by BatchNorm and
/// ReLU; 2x2 max pooling after the 2nd and 4th; 8x8 average pooling;
/// one linear layer to 10 classes. Only H = 32 is supported.
template <typename T>
Network<T> build_baseline(conv::Mode mode, int height = 32);

/// build_baseline with seeded initialization: conv and linear weights and
/// biases uniform in +-1/sqrt(fan_in), BatchNorm scale 1 and shift 0.
Network<double> build_baseline(conv::Mode mode, int height, std::uint64_t seed);

/// Deterministic initialization of any network's conv and linear layers.
void initialize(Network<double>& net, std::uint64_t seed);

/// Sets every BatchNorm layer's running mean and (biased) variance to the
/// statistics of its input over `images`, layer by layer in eval mode, so a
/// randomly initialized network normalizes like a trained one. Parameters
/// are untouched. images is [N, 1, H, H], processed `chunk` at a time.
void calibrate_batchnorm(Network<double>& net, const Tensor& images, std::size_t chunk = 100);

/// Copies all state of a double network into a freshly built baseline of
/// scalar type U.
template <typename U>
Network<U> convert_baseline(Network<double>& net);

/// Rotates every channel of a [C, h, h] (or [B, C, h, h]) map anticlockwise
/// by theta_deg about its fractional center, bilinear with zero fill; exact
/// at multiples of 90 degrees.
Tensor rotate_feature_map(const Tensor& map, double theta_deg);

}  // namespace ric::nn
