#pragma once

// Rotation-invariant sampling geometry.
//
// Two coordinate frames are used throughout:
//   * raster: 0-based (row, col) pixel indices, row growing downward;
//   * centered Cartesian: origin at the grid center, axis 1 rightward
//     (along columns) and axis 2 upward (against rows).
// Angles are measured anticlockwise in the centered frame.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

#include "ric/tensor.hpp"

namespace ric::geometry {

/// Point in the centered Cartesian frame.
struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  bool operator==(const Vec2&) const = default;
};

/// Point in raster coordinates; fractional values are allowed.
struct RasterPoint {
  double row = 0.0;
  double col = 0.0;

  bool operator==(const RasterPoint&) const = default;
};

/// Integer lattice point in the centered Cartesian frame.
struct LatticePoint {
  int a = 0;  // axis 1
  int b = 0;  // axis 2

  bool operator==(const LatticePoint&) const = default;
};

Vec2 rotate(Vec2 v, double theta_rad);

/// Kernel half-size n and square grid height H (even).
class GridConfig {
 public:
  /// Throws ConfigError when n < 0 or H is odd or non-positive.
  GridConfig(int n, int height);

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int kernel_size() const noexcept { return 2 * n_ + 1; }
  [[nodiscard]] std::size_t slot_count() const noexcept {
    return static_cast<std::size_t>(kernel_size() * kernel_size());
  }

 private:
  int n_;
  int height_;
};

/// Number of kernel slots, (2n+1)^2.
std::size_t slot_count(int n);

/// Chebyshev ring of a ring-major slot index (slot 0 is ring 0).
int ring_of_slot(std::size_t slot);

/// Grid-square center ((H-1)/2, (H-1)/2) in raster coordinates.
/// Throws ConfigError for odd or non-positive H.
RasterPoint center_of(int height);

Vec2 to_centered(RasterPoint p, RasterPoint center);
RasterPoint to_raster(Vec2 v, RasterPoint center);

/// Angle in (-pi, pi] of the ray from the center to x0.
/// Throws GeometryError when x0 coincides with the center.
double radial_direction(RasterPoint x0, RasterPoint center);
double radial_direction(Vec2 centered);

/// Sample points on the rotation-invariant coordinate system at a location
/// whose radial direction is anchor_angle. Point 0 is the origin; ring r
/// contributes 8r points at radius r, the first on the anchor direction and
/// the rest anticlockwise at spacing 2*pi/(8r).
struct SamplePointSet {
  std::vector<Vec2> points;
  double anchor_angle = 0.0;
};

SamplePointSet sample_points(int n, double anchor_angle);

/// Regular (2n+1)x(2n+1) grid in the same ring-major order as sample_points:
/// center first, then for each Chebyshev ring r the 8r lattice points
/// anticlockwise starting at (r, 0).
std::vector<LatticePoint> regular_grid(int n);

/// Ring-major slot of the kernel tap at (kh, kw), where kh indexes rows of
/// the weight tensor top to bottom and kw indexes columns left to right.
std::size_t slot_of_kernel_tap(int n, int kh, int kw);

/// Constant displacements Q_alpha - P_alpha for every pixel and slot.
///
/// Storage is [2 * slots, H, H]; channel 2*slot holds the raster row
/// displacement (dy, positive downward) and channel 2*slot+1 the raster
/// column displacement (dx).
class OffsetField {
 public:
  OffsetField(GridConfig config, Tensor offsets);

  [[nodiscard]] const GridConfig& config() const noexcept { return config_; }
  [[nodiscard]] int n() const noexcept { return config_.n(); }
  [[nodiscard]] int height() const noexcept { return config_.height(); }
  [[nodiscard]] const Tensor& offsets() const noexcept { return offsets_; }

  [[nodiscard]] double dy(int row, int col, std::size_t slot) const;
  [[nodiscard]] double dx(int row, int col, std::size_t slot) const;

  /// Displacement Q - P in the centered Cartesian frame.
  [[nodiscard]] Vec2 displacement(int row, int col, std::size_t slot) const;

 private:
  GridConfig config_;
  Tensor offsets_;
};

OffsetField offset_field(const GridConfig& config);

/// All-zero field; sampling with it reproduces the regular grid.
OffsetField zero_offset_field(const GridConfig& config);

/// Process-wide cache of offset fields keyed by (n, H). Thread-safe.
std::shared_ptr<const OffsetField> cached_offset_field(int n, int height);

/// CSV export: header `x0_row,x0_col,slot,dy,dx`, one row per (pixel, slot),
/// 17 significant digits.
void write_offset_csv(std::ostream& os, const OffsetField& field);

}  // namespace ric::geometry
