#pragma once

// Sampled convolution. Standard and rotation-invariant coordinate (RIC)
// convolution share one kernel: every output pixel x0 and kernel tap reads
// the input at x0 + P + dP(x0), where dP is zero for standard convolution
// and the constant offset field for RIC. Stride is 1 with same-size output.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ric/geometry.hpp"
#include "ric/tensor.hpp"

namespace ric::conv {

enum class Mode { kStandard, kRic };

const char* to_string(Mode mode);
/// Parses "standard" or "ric"; throws ConfigError otherwise.
Mode parse_mode(const std::string& text);

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  int n = 1;  // kernel is (2n+1) x (2n+1)
  Mode mode = Mode::kStandard;
  bool bias = true;

  [[nodiscard]] std::size_t kernel_size() const { return static_cast<std::size_t>(2 * n + 1); }
  [[nodiscard]] std::size_t taps() const { return kernel_size() * kernel_size(); }
  [[nodiscard]] Shape weight_shape() const {
    return {out_channels, in_channels, kernel_size(), kernel_size()};
  }
  /// out*in*(2n+1)^2 plus out when biased; identical for both modes.
  [[nodiscard]] std::size_t parameter_count() const;
};

/// Precomputed read pattern for one (mode, n, H): for each kernel tap (in
/// row-major kh, kw order) and output pixel, the input pixels and weights
/// to blend. Standard plans have one tap per sample, RIC plans four.
template <typename T>
class SamplingPlan {
 public:
  static SamplingPlan standard(int n, std::size_t height);
  static SamplingPlan from_offsets(const geometry::OffsetField& field);

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] std::size_t height() const noexcept { return height_; }
  [[nodiscard]] std::size_t pixels() const noexcept { return height_ * height_; }
  [[nodiscard]] std::size_t kernel_taps() const noexcept {
    return static_cast<std::size_t>((2 * n_ + 1) * (2 * n_ + 1));
  }
  /// 1 for lattice reads, 4 for bilinear sampling.
  [[nodiscard]] std::size_t blend() const noexcept { return blend_; }

  /// For each of `channels` consecutive planes c:
  /// cols[(c * taps + k) * pixels + p] = sampled value of plane c for tap k at pixel p.
  void gather(const T* planes, std::size_t channels, T* cols) const;
  /// Adjoint of gather: accumulates into grad_planes.
  void scatter(const T* grad_cols, std::size_t channels, T* grad_planes) const;

 private:
  SamplingPlan(int n, std::size_t height, std::size_t blend, std::size_t pad);

  void pad_planes(const T* planes, std::size_t channels, T* padded) const;

  int n_;
  std::size_t height_;
  std::size_t blend_;
  // Reads go to a copy of each plane with a zero border of width pad_, so
  // every tap is in range: the sample for entry e blends padded[base_[e]],
  // [+1], [+padded_width], [+padded_width+1] with fractions fy_[e], fx_[e].
  std::size_t pad_;
  std::size_t padded_width_;
  std::vector<std::uint32_t> base_;
  std::vector<T> fy_;
  std::vector<T> fx_;
};

/// Shared plans: standard plans keyed by (n, H); RIC plans built from the
/// cached rotation-invariant offset field for (n, H).
template <typename T>
std::shared_ptr<const SamplingPlan<T>> cached_plan(Mode mode, int n, std::size_t height);

/// Plan for an explicit call. Standard mode rejects offsets; RIC mode uses
/// the supplied field, or the rotation-invariant field when none is given.
template <typename T>
std::shared_ptr<const SamplingPlan<T>> make_plan(const ConvSpec& spec, std::size_t height,
                                                 const geometry::OffsetField* offsets);

/// Validates [B, Cin, H, H] input against spec and returns H.
std::size_t check_input(const ConvSpec& spec, const Shape& input_shape);

/// output[b,o,x0] = sum_{c,alpha} W[o,c,alpha] * input[b,c](x0 + P_alpha + dP_alpha(x0)) + bias[o].
/// Pass an empty bias tensor when spec.bias is false.
template <typename T>
BasicTensor<T> conv_forward(const ConvSpec& spec, const BasicTensor<T>& weights,
                            const BasicTensor<T>& bias, const BasicTensor<T>& input,
                            const SamplingPlan<T>& plan);

Tensor conv_forward(const ConvSpec& spec, const Tensor& weights, const Tensor& bias,
                    const Tensor& input, const geometry::OffsetField* offsets);

struct ConvGradients {
  Tensor weights;
  Tensor bias;   // empty when the spec has no bias
  Tensor input;  // empty when not requested
};

/// Exact adjoint of conv_forward. Offsets are constants, so no offset gradient.
ConvGradients conv_backward(const ConvSpec& spec, const Tensor& weights, const Tensor& input,
                            const Tensor& upstream, const SamplingPlan<double>& plan,
                            bool need_input_grad = true);

ConvGradients conv_backward(const ConvSpec& spec, const Tensor& weights, const Tensor& input,
                            const geometry::OffsetField* offsets, const Tensor& upstream);

/// max over pixels |conv(rotate(F))(R x0) - conv(F)(x0)| for a rotation by
/// quarter_turns * 90 degrees, with F of shape [B, Cin, H, H].
double rotation_discrepancy(const ConvSpec& spec, const Tensor& weights, const Tensor& bias,
                            const Tensor& input, int quarter_turns);

/// True when standard convolution with these weights breaks rotation
/// invariance on input by more than 10x the RIC discrepancy at the same
/// rotation. Inputs the rotation maps onto themselves carry no signal and
/// return false.
bool negative_control(const ConvSpec& standard_spec, const Tensor& weights, const Tensor& input,
                      int quarter_turns = 1);

}  // namespace ric::conv
