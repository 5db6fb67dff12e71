#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "ric/data.hpp"
#include "ric/nn.hpp"
#include "ric/tensor.hpp"

namespace ric::metrics {

/// |x - y| / (|x| + |y|) * 100, and 0 when x == y == 0.
double relative_error(double x, double y);

/// Mean relative error (percent) over all entries of two equally shaped maps.
double mre(const Tensor& a, const Tensor& b);
/// mre over the pixels of [B, C, H, H] maps within distance (H-1)/2 of the
/// center, the region a rotation keeps inside the frame.
double disc_mre(const Tensor& a, const Tensor& b);

struct MrePoint {
  double angle_deg = 0.0;
  double mre_percent = 0.0;
};

struct MreCurve {
  int layer = 0;  // 1-based conv layer index
  std::vector<MrePoint> points;

  [[nodiscard]] double max() const;
  [[nodiscard]] double at(double angle_deg) const;
};

/// 10, 20, ..., 350 degrees.
std::vector<double> equivariance_angles();

/// For every conv layer l and angle theta: the conv output on the rotated
/// image, rotated back by -theta, compared with the conv output on the
/// original image by disc_mre. image is [1, 1, H, H]; runs in eval mode.
std::vector<MreCurve> equivariance_curves(nn::Network<double>& net, const Tensor& image,
                                          const std::vector<double>& angles);

/// Fraction of correctly classified images, evaluated in batches.
double accuracy(nn::Network<double>& net, const data::Dataset& dataset, std::size_t batch = 200);

struct AngleAccuracy {
  std::string model;
  std::vector<double> angles;
  std::vector<double> accuracy;
  double aggregate = 0.0;  // over all images of all angles
};

AngleAccuracy angle_sweep_accuracy(nn::Network<double>& net, const data::RotatedTestSet& rotated,
                                   const std::string& model, std::size_t batch = 200);

/// Same result as building the rotated set first, but rotates one angle at a
/// time so only a single rotated copy is held in memory.
AngleAccuracy angle_sweep_accuracy(nn::Network<double>& net, const data::Dataset& test,
                                   const std::vector<double>& angles, const std::string& model,
                                   std::size_t batch = 200);

template <typename T>
std::size_t count_parameters(const nn::Network<T>& net) {
  return net.parameter_count();
}

struct FpsReport {
  double fps = 0.0;  // images per second, median over timed iterations
  std::size_t batch = 0;
  std::size_t iterations = 0;
};

/// Steady-state eval-mode forward throughput on random input; `warmup`
/// untimed iterations precede the timed ones.
template <typename T>
FpsReport benchmark_fps(nn::Network<T>& net, std::size_t batch, std::size_t iters,
                        std::size_t warmup = 2);

/// benchmark_fps for several networks of equal height, timed round-robin on
/// one shared input so machine-load drift affects all of them alike.
template <typename T>
std::vector<FpsReport> benchmark_fps(const std::vector<nn::Network<T>*>& nets, std::size_t batch,
                                     std::size_t iters, std::size_t warmup = 2);

void write_accuracy_csv(std::ostream& os, const AngleAccuracy& acc, bool header = true);
void write_mre_csv(std::ostream& os, const std::vector<MreCurve>& curves);

}  // namespace ric::metrics
