#include "ric/sampler.hpp"

#include <cmath>
#include <numbers>

#include "ric/error.hpp"

namespace ric::sampler {

using geometry::RasterPoint;

BilinearTaps bilinear_taps(std::size_t height, std::size_t width, RasterPoint point) {
  BilinearTaps taps;
  const double r0f = std::floor(point.row);
  const double c0f = std::floor(point.col);
  const double fr = point.row - r0f;
  const double fc = point.col - c0f;
  const std::array<double, 4> w{(1.0 - fr) * (1.0 - fc), (1.0 - fr) * fc, fr * (1.0 - fc),
                                fr * fc};
  const std::array<double, 4> dr{0, 0, 1, 1};
  const std::array<double, 4> dc{0, 1, 0, 1};
  for (std::size_t t = 0; t < 4; ++t) {
    const double r = r0f + dr[t];
    const double c = c0f + dc[t];
    if (r >= 0 && c >= 0 && r < double(height) && c < double(width)) {
      taps.index[t] = static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c);
      taps.weight[t] = w[t];
    }
  }
  return taps;
}

namespace {

void require_chw(const Shape& shape) {
  if (shape.size() != 3) throw ShapeError("expected a [C, H, W] image, got " + to_string(shape));
}

}  // namespace

std::vector<double> bilinear(const Tensor& image, RasterPoint point) {
  require_chw(image.shape());
  const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto taps = bilinear_taps(h, w, point);
  std::vector<double> out(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = image.data().data() + c * h * w;
    double v = 0.0;
    for (std::size_t t = 0; t < 4; ++t) v += taps.weight[t] * plane[taps.index[t]];
    out[c] = v;
  }
  return out;
}

std::vector<PixelGradient> bilinear_adjoint(const Shape& image_shape, RasterPoint point,
                                            std::span<const double> upstream) {
  require_chw(image_shape);
  const std::size_t channels = image_shape[0], h = image_shape[1], w = image_shape[2];
  if (upstream.size() != channels) {
    throw ShapeError("bilinear_adjoint: upstream length " + std::to_string(upstream.size()) +
                     " does not match channel count " + std::to_string(channels));
  }
  const auto taps = bilinear_taps(h, w, point);
  std::vector<PixelGradient> out;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < 4; ++t) {
      if (taps.weight[t] == 0.0) continue;
      out.push_back({c, taps.index[t] / w, taps.index[t] % w, upstream[c] * taps.weight[t]});
    }
  }
  return out;
}

void accumulate_adjoint(Tensor& grad_image, RasterPoint point, std::span<const double> upstream) {
  for (const auto& g : bilinear_adjoint(grad_image.shape(), point, upstream)) {
    grad_image.at(g.channel, g.row, g.col) += g.value;
  }
}

template <typename T>
BasicTensor<T> rotate_planes(const BasicTensor<T>& planes, double theta_deg) {
  if (planes.rank() < 2) throw ShapeError("rotate_planes: need at least two axes");
  const std::size_t h = planes.dim(planes.rank() - 2);
  const std::size_t w = planes.dim(planes.rank() - 1);
  if (h != w) throw ShapeError("rotate_planes: planes must be square, got " + to_string(planes.shape()));
  const std::size_t plane = h * w;
  const std::size_t count = planes.size() / plane;
  BasicTensor<T> out(planes.shape());
  const T* src = planes.data().data();
  T* dst = out.data().data();

  double turns = std::fmod(theta_deg, 360.0);
  if (turns < 0) turns += 360.0;
  if (std::fmod(turns, 90.0) == 0.0) {
    // Output (r, c) reads source (sr, sc) under the inverse rotation.
    const int quarter = static_cast<int>(turns / 90.0);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        std::size_t sr = r, sc = c;
        switch (quarter) {
          case 1: sr = c; sc = h - 1 - r; break;
          case 2: sr = h - 1 - r; sc = w - 1 - c; break;
          case 3: sr = h - 1 - c; sc = r; break;
          default: break;
        }
        for (std::size_t p = 0; p < count; ++p) dst[p * plane + r * w + c] = src[p * plane + sr * w + sc];
      }
    }
    return out;
  }

  const double cc = (double(h) - 1.0) / 2.0;
  const double theta = -theta_deg * std::numbers::pi / 180.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const geometry::Vec2 y{double(c) - cc, cc - double(r)};
      const auto x = geometry::rotate(y, theta);
      const auto taps = bilinear_taps(h, w, {cc - x.x2, cc + x.x1});
      for (std::size_t p = 0; p < count; ++p) {
        const T* s = src + p * plane;
        double v = 0.0;
        for (std::size_t t = 0; t < 4; ++t) v += taps.weight[t] * double(s[taps.index[t]]);
        dst[p * plane + r * w + c] = static_cast<T>(v);
      }
    }
  }
  return out;
}

template BasicTensor<double> rotate_planes<double>(const BasicTensor<double>&, double);
template BasicTensor<float> rotate_planes<float>(const BasicTensor<float>&, double);

}  // namespace ric::sampler
