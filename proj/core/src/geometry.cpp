#include "ric/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>

#include "ric/error.hpp"

namespace ric::geometry {

Vec2 rotate(Vec2 v, double theta_rad) {
  const double c = std::cos(theta_rad);
  const double s = std::sin(theta_rad);
  return {c * v.x1 - s * v.x2, s * v.x1 + c * v.x2};
}

GridConfig::GridConfig(int n, int height) : n_(n), height_(height) {
  if (n < 0) throw ConfigError("kernel half-size n must be non-negative, got " + std::to_string(n));
  if (height <= 0 || height % 2 != 0) {
    throw ConfigError("grid height H must be a positive even integer, got " +
                      std::to_string(height));
  }
}

std::size_t slot_count(int n) {
  const auto k = static_cast<std::size_t>(2 * n + 1);
  return k * k;
}

int ring_of_slot(std::size_t slot) {
  // Slots [ (2r-1)^2, (2r+1)^2 ) belong to ring r.
  int r = 0;
  while (slot_count(r) <= slot) ++r;
  return r;
}

RasterPoint center_of(int height) {
  if (height <= 0 || height % 2 != 0) {
    throw ConfigError("grid height H must be a positive even integer, got " +
                      std::to_string(height));
  }
  const double c = (height - 1) / 2.0;
  return {c, c};
}

Vec2 to_centered(RasterPoint p, RasterPoint center) {
  return {p.col - center.col, center.row - p.row};
}

RasterPoint to_raster(Vec2 v, RasterPoint center) {
  return {center.row - v.x2, center.col + v.x1};
}

double radial_direction(Vec2 centered) {
  if (centered.x1 == 0.0 && centered.x2 == 0.0) {
    throw GeometryError("radial direction is undefined at the grid center");
  }
  double phi = std::atan2(centered.x2, centered.x1);
  // atan2 yields -pi for (negative, -0.0); fold onto the half-open range.
  if (phi <= -std::numbers::pi) phi = std::numbers::pi;
  return phi;
}

double radial_direction(RasterPoint x0, RasterPoint center) {
  return radial_direction(to_centered(x0, center));
}

SamplePointSet sample_points(int n, double anchor_angle) {
  if (n < 0) throw ConfigError("kernel half-size n must be non-negative");
  SamplePointSet set;
  set.anchor_angle = anchor_angle;
  set.points.reserve(slot_count(n));
  set.points.push_back({0.0, 0.0});
  for (int r = 1; r <= n; ++r) {
    const double step = 2.0 * std::numbers::pi / (8.0 * r);
    for (int i = 0; i < 8 * r; ++i) {
      const double angle = anchor_angle + i * step;
      set.points.push_back({r * std::cos(angle), r * std::sin(angle)});
    }
  }
  return set;
}

std::vector<LatticePoint> regular_grid(int n) {
  if (n < 0) throw ConfigError("kernel half-size n must be non-negative");
  std::vector<LatticePoint> pts;
  pts.reserve(slot_count(n));
  pts.push_back({0, 0});
  for (int r = 1; r <= n; ++r) {
    for (int b = 0; b <= r; ++b) pts.push_back({r, b});         // right edge, going up
    for (int a = r - 1; a >= -r; --a) pts.push_back({a, r});    // top edge, going left
    for (int b = r - 1; b >= -r; --b) pts.push_back({-r, b});   // left edge, going down
    for (int a = -r + 1; a <= r; ++a) pts.push_back({a, -r});   // bottom edge, going right
    for (int b = -r + 1; b <= -1; ++b) pts.push_back({r, b});   // right edge, below axis
  }
  return pts;
}

std::size_t slot_of_kernel_tap(int n, int kh, int kw) {
  const LatticePoint target{kw - n, n - kh};
  const auto grid = regular_grid(n);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (grid[s] == target) return s;
  }
  throw ConfigError("kernel tap (" + std::to_string(kh) + ", " + std::to_string(kw) +
                    ") outside a kernel of half-size " + std::to_string(n));
}

OffsetField::OffsetField(GridConfig config, Tensor offsets)
    : config_(config), offsets_(std::move(offsets)) {
  const auto h = static_cast<std::size_t>(config_.height());
  const Shape expected{2 * config_.slot_count(), h, h};
  if (offsets_.shape() != expected) {
    throw ShapeError("offset field shape " + to_string(offsets_.shape()) + " does not match " +
                     to_string(expected));
  }
}

double OffsetField::dy(int row, int col, std::size_t slot) const {
  return offsets_.at(2 * slot, static_cast<std::size_t>(row), static_cast<std::size_t>(col));
}

double OffsetField::dx(int row, int col, std::size_t slot) const {
  return offsets_.at(2 * slot + 1, static_cast<std::size_t>(row), static_cast<std::size_t>(col));
}

Vec2 OffsetField::displacement(int row, int col, std::size_t slot) const {
  return {dx(row, col, slot), -dy(row, col, slot)};
}

OffsetField offset_field(const GridConfig& config) {
  const int h = config.height();
  const auto hs = static_cast<std::size_t>(h);
  const auto center = center_of(h);
  const auto grid = regular_grid(config.n());
  Tensor offsets({2 * config.slot_count(), hs, hs});
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < h; ++col) {
      const double phi = radial_direction(RasterPoint{double(row), double(col)}, center);
      const auto q = sample_points(config.n(), phi);
      for (std::size_t s = 0; s < grid.size(); ++s) {
        const double d1 = q.points[s].x1 - grid[s].a;
        const double d2 = q.points[s].x2 - grid[s].b;
        offsets.at(2 * s, std::size_t(row), std::size_t(col)) = -d2;
        offsets.at(2 * s + 1, std::size_t(row), std::size_t(col)) = d1;
      }
    }
  }
  return OffsetField(config, std::move(offsets));
}

OffsetField zero_offset_field(const GridConfig& config) {
  const auto hs = static_cast<std::size_t>(config.height());
  return OffsetField(config, Tensor({2 * config.slot_count(), hs, hs}));
}

std::shared_ptr<const OffsetField> cached_offset_field(int n, int height) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const OffsetField>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{n, height}];
  if (!slot) slot = std::make_shared<const OffsetField>(offset_field(GridConfig(n, height)));
  return slot;
}

void write_offset_csv(std::ostream& os, const OffsetField& field) {
  os << "x0_row,x0_col,slot,dy,dx\n";
  const int h = field.height();
  const std::size_t slots = field.config().slot_count();
  char buf[128];
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < h; ++col) {
      for (std::size_t s = 0; s < slots; ++s) {
        // + 0.0 prints negative zero as 0.
        std::snprintf(buf, sizeof(buf), "%d,%d,%zu,%.17g,%.17g\n", row, col, s,
                      field.dy(row, col, s) + 0.0, field.dx(row, col, s) + 0.0);
        os << buf;
      }
    }
  }
}

}  // namespace ric::geometry
