#include "ric/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "ric/error.hpp"

namespace ric::metrics {

double relative_error(double x, double y) {
  const double denom = std::abs(x) + std::abs(y);
  if (denom == 0.0) return 0.0;
  return std::abs(x - y) / denom * 100.0;
}

double mre(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mre: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += relative_error(a[i], b[i]);
  return s / double(a.size());
}

double disc_mre(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 4 || a.dim(2) != a.dim(3)) {
    throw ShapeError("disc_mre: expects matching [B, C, H, H] maps, got " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
  const std::size_t h = a.dim(2);
  const double c = (double(h) - 1.0) / 2.0;
  std::vector<std::size_t> inside;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t q = 0; q < h; ++q) {
      if (std::hypot(double(r) - c, double(q) - c) <= c) inside.push_back(r * h + q);
    }
  }
  const std::size_t planes = a.dim(0) * a.dim(1);
  double s = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i : inside) s += relative_error(a[p * h * h + i], b[p * h * h + i]);
  }
  return s / double(planes * inside.size());
}

double MreCurve::max() const {
  double m = 0.0;
  for (const auto& p : points) m = std::max(m, p.mre_percent);
  return m;
}

double MreCurve::at(double angle_deg) const {
  for (const auto& p : points) {
    if (p.angle_deg == angle_deg) return p.mre_percent;
  }
  throw ConfigError("MRE curve has no point at " + std::to_string(angle_deg) + " degrees");
}

std::vector<double> equivariance_angles() {
  std::vector<double> a;
  for (int d = 10; d < 360; d += 10) a.push_back(d);
  return a;
}

std::vector<MreCurve> equivariance_curves(nn::Network<double>& net, const Tensor& image,
                                          const std::vector<double>& angles) {
  if (image.rank() != 4 || image.dim(0) != 1) {
    throw ShapeError("equivariance_curves expects a [1, C, H, H] image, got " + to_string(image.shape()));
  }
  const bool was_training = net.training();
  net.set_training(false);
  const auto convs = net.conv_layers();
  const auto base = net.forward_trace(image);
  std::vector<MreCurve> curves(convs.size());
  for (std::size_t l = 0; l < convs.size(); ++l) curves[l].layer = int(l + 1);
  for (double theta : angles) {
    const auto trace = net.forward_trace(data::rotate_image(image, theta));
    for (std::size_t l = 0; l < convs.size(); ++l) {
      const Tensor back = nn::rotate_feature_map(trace[convs[l]], -theta);
      curves[l].points.push_back({theta, disc_mre(back, base[convs[l]])});
    }
  }
  net.set_training(was_training);
  return curves;
}

double accuracy(nn::Network<double>& net, const data::Dataset& dataset, std::size_t batch) {
  if (dataset.size() == 0) throw ConfigError("accuracy: empty dataset");
  const bool was_training = net.training();
  net.set_training(false);
  std::size_t correct = 0;
  for (std::size_t first = 0; first < dataset.size(); first += batch) {
    const std::size_t count = std::min(batch, dataset.size() - first);
    const auto pred = net.predict(dataset.images.slice0(first, count));
    for (std::size_t i = 0; i < count; ++i) correct += pred[i] == dataset.labels[first + i];
  }
  net.set_training(was_training);
  return double(correct) / double(dataset.size());
}

AngleAccuracy angle_sweep_accuracy(nn::Network<double>& net, const data::RotatedTestSet& rotated,
                                   const std::string& model, std::size_t batch) {
  AngleAccuracy out;
  out.model = model;
  out.angles = rotated.angles;
  double correct = 0.0;
  std::size_t total = 0;
  for (const auto& set : rotated.sets) {
    const double acc = accuracy(net, set, batch);
    out.accuracy.push_back(acc);
    correct += acc * double(set.size());
    total += set.size();
  }
  out.aggregate = total == 0 ? 0.0 : correct / double(total);
  return out;
}

AngleAccuracy angle_sweep_accuracy(nn::Network<double>& net, const data::Dataset& test,
                                   const std::vector<double>& angles, const std::string& model,
                                   std::size_t batch) {
  if (angles.empty()) throw ConfigError("angle sweep needs at least one angle");
  AngleAccuracy out;
  out.model = model;
  out.angles = angles;
  double correct = 0.0;
  for (double theta : angles) {
    const double acc = accuracy(net, data::rotate_dataset(test, theta), batch);
    out.accuracy.push_back(acc);
    correct += acc * double(test.size());
  }
  out.aggregate = correct / double(test.size() * angles.size());
  return out;
}

template <typename T>
std::vector<FpsReport> benchmark_fps(const std::vector<nn::Network<T>*>& nets, std::size_t batch,
                                     std::size_t iters, std::size_t warmup) {
  if (batch == 0 || iters == 0) throw ConfigError("benchmark_fps: batch and iterations must be positive");
  if (nets.empty()) return {};
  const int height = nets.front()->height();
  for (const auto* net : nets) {
    if (net->height() != height) throw ConfigError("benchmark_fps: networks differ in input height");
  }
  const auto h = static_cast<std::size_t>(height);
  BasicTensor<T> input({batch, 1, h, h});
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (auto& v : input.data()) v = static_cast<T>(dist(rng));
  std::vector<bool> was_training;
  for (auto* net : nets) {
    was_training.push_back(net->training());
    net->set_training(false);
  }
  for (std::size_t i = 0; i < warmup; ++i) {
    for (auto* net : nets) net->forward(input);
  }
  std::vector<std::vector<double>> rates(nets.size());
  for (std::size_t i = 0; i < iters; ++i) {
    for (std::size_t k = 0; k < nets.size(); ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      nets[k]->forward(input);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      rates[k].push_back(double(batch) / dt.count());
    }
  }
  std::vector<FpsReport> out;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    nets[k]->set_training(was_training[k]);
    auto& r = rates[k];
    std::sort(r.begin(), r.end());
    const std::size_t mid = r.size() / 2;
    const double median = r.size() % 2 ? r[mid] : 0.5 * (r[mid - 1] + r[mid]);
    out.push_back({median, batch, iters});
  }
  return out;
}

template <typename T>
FpsReport benchmark_fps(nn::Network<T>& net, std::size_t batch, std::size_t iters,
                        std::size_t warmup) {
  return benchmark_fps(std::vector<nn::Network<T>*>{&net}, batch, iters, warmup).front();
}

template std::vector<FpsReport> benchmark_fps<double>(const std::vector<nn::Network<double>*>&,
                                                      std::size_t, std::size_t, std::size_t);
template std::vector<FpsReport> benchmark_fps<float>(const std::vector<nn::Network<float>*>&,
                                                     std::size_t, std::size_t, std::size_t);
template FpsReport benchmark_fps<double>(nn::Network<double>&, std::size_t, std::size_t, std::size_t);
template FpsReport benchmark_fps<float>(nn::Network<float>&, std::size_t, std::size_t, std::size_t);

void write_accuracy_csv(std::ostream& os, const AngleAccuracy& acc, bool header) {
  if (header) os << "model,angle_deg,accuracy\n";
  char buf[128];
  for (std::size_t i = 0; i < acc.angles.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%g,%.6f\n", acc.model.c_str(), acc.angles[i], acc.accuracy[i]);
    os << buf;
  }
}

void write_mre_csv(std::ostream& os, const std::vector<MreCurve>& curves) {
  os << "layer,angle_deg,mre_percent\n";
  char buf[128];
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      std::snprintf(buf, sizeof(buf), "%d,%g,%.9g\n", c.layer, p.angle_deg, p.mre_percent);
      os << buf;
    }
  }
}

}  // namespace ric::metrics
