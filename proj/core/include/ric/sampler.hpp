#pragma once

// Bilinear sampling of [C, H, W] images at fractional raster coordinates,
// with zero padding outside [0, H) x [0, W), and its exact adjoint.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "ric/geometry.hpp"
#include "ric/tensor.hpp"

namespace ric::sampler {

/// The four neighbors of a sample point within one H x W plane. Neighbors
/// that fall outside the plane have weight 0 and index 0.
struct BilinearTaps {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};

BilinearTaps bilinear_taps(std::size_t height, std::size_t width, geometry::RasterPoint point);

/// Interpolated value of every channel at point.
std::vector<double> bilinear(const Tensor& image, geometry::RasterPoint point);

struct PixelGradient {
  std::size_t channel = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Gradient of dot(upstream, bilinear(image, point)) with respect to image,
/// as at most four entries per channel.
std::vector<PixelGradient> bilinear_adjoint(const Shape& image_shape, geometry::RasterPoint point,
                                            std::span<const double> upstream);

/// Adds the adjoint contribution into a dense gradient buffer shaped like the image.
void accumulate_adjoint(Tensor& grad_image, geometry::RasterPoint point,
                        std::span<const double> upstream);

/// Rotates every H x H plane of a [..., H, H] tensor anticlockwise by
/// theta_deg about its center (G(y) = F(R_{-theta} y)). Bilinear with zero
/// fill; multiples of 90 degrees are exact pixel permutations.
template <typename T>
BasicTensor<T> rotate_planes(const BasicTensor<T>& planes, double theta_deg);

}  // namespace ric::sampler
