#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ric/tensor.hpp"

namespace ric::data {

/// Labeled images, [N, 1, H, H] in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<std::uint8_t> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t height() const { return images.dim(2); }

  /// Images and labels at the given positions, in that order.
  [[nodiscard]] Dataset select(const std::vector<std::size_t>& indices) const;
  [[nodiscard]] Dataset slice(std::size_t first, std::size_t count) const;
};

struct Mnist {
  Dataset train;
  Dataset test;
};

inline constexpr std::size_t kImageSize = 32;

/// Reads the four standard MNIST IDX files from dir, accepting either raw
/// or gzip-compressed copies (`name` or `name.gz`). 28x28 digits are
/// centered in 32x32 with a 2-pixel zero margin and scaled by 1/255.
Mnist load_mnist(const std::filesystem::path& dir);

/// One image/label IDX pair.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes an IDX pair (raw, uncompressed) holding the central
/// (H-4)x(H-4) crop of each image quantized to bytes; the inverse of the
/// padding applied by load_idx.
void save_idx(const Dataset& dataset, const std::filesystem::path& images,
              const std::filesystem::path& labels);

/// Rotation of an [C, H, H] (or [N, C, H, H]) image about its fractional
/// center; see sampler::rotate_planes.
Tensor rotate_image(const Tensor& image, double theta_deg);

Dataset rotate_dataset(const Dataset& dataset, double theta_deg);

struct RotatedTestSet {
  std::vector<double> angles;
  std::vector<Dataset> sets;

  [[nodiscard]] std::size_t total_images() const;
};

/// 0, 10, ..., 350 degrees.
std::vector<double> default_angles();

RotatedTestSet build_rotated_test(const Dataset& test, const std::vector<double>& angles);

struct TrainValSplit {
  Dataset train;
  Dataset validation;
};

/// Seeded permutation of the training set; the last validation_size images
/// form the validation set, the rest the training set.
TrainValSplit split_validation(const Dataset& train, std::size_t validation_size,
                               std::uint64_t seed);

/// Raw cache blob: magic "RICDATA1", little-endian u32 N and u32 H, then
/// N*H*H little-endian float64 pixels, then N label bytes.
void save_cache(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_cache(const std::filesystem::path& path);

}  // namespace ric::data
