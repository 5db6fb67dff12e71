#include "ric/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "ric/error.hpp"
#include "ric/metrics.hpp"

namespace ric::optim {

LossResult cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("cross_entropy: logits " + to_string(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  for (auto l : labels) {
    if (l >= k) throw ConfigError("cross_entropy: label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(k) + ")");
  }
  LossResult r;
  r.grad = nn::softmax(logits);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = logits.at(b, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(b, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(b, j) - mx);
    total += std::log(z) + mx - logits.at(b, labels[b]);
    r.grad.at(b, labels[b]) -= 1.0;
  }
  for (auto& g : r.grad.data()) g /= double(batch);
  r.loss = total / double(batch);
  return r;
}

void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (p.shape() != g.shape() || p.shape() != state.m[i].shape()) {
      throw ShapeError("adam_step: shape mismatch " + to_string(p.shape()) + " vs " + to_string(g.shape()));
    }
    double* m = state.m[i].data().data();
    double* v = state.v[i].data().data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

Optimizer::Optimizer(OptimizerKind kind, double momentum) : kind_(kind), momentum_(momentum) {}

void Optimizer::step(std::vector<nn::ParamRef<double>>& params, double lr) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  for (auto& p : params) {
    values.push_back(p.value);
    grads.push_back(p.grad);
  }
  if (kind_ == OptimizerKind::kAdam) {
    adam_step(adam_, values, grads, lr);
    return;
  }
  if (velocity_.empty()) {
    for (const Tensor* p : values) velocity_.emplace_back(p->shape());
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    Tensor& vel = velocity_[i];
    for (std::size_t j = 0; j < vel.size(); ++j) {
      vel[j] = momentum_ * vel[j] + (*grads[i])[j];
      (*values[i])[j] -= lr * vel[j];
    }
  }
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for batch normalization");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
  if (lr_decay_every <= 0) throw ConfigError("lr_decay_every must be positive");
}

double learning_rate(const TrainConfig& config, int epoch) {
  const int drops = (epoch - 1) / config.lr_decay_every;
  return config.lr0 * std::pow(config.lr_decay, drops);
}

std::vector<EpochLog> train(nn::Network<double>& net, const data::Dataset& train_set,
                            const data::Dataset& validation, const TrainConfig& config,
                            const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() < 2) throw ConfigError("training set needs at least two images");
  if (validation.size() == 0) throw ConfigError("validation set is empty");

  std::mt19937_64 rng(config.seed);
  Optimizer opt(config.optimizer, config.optimizer == OptimizerKind::kSgd ? 0.9 : 0.0);
  auto params = net.parameters();
  const data::Dataset val =
      config.val_eval_size > 0 && config.val_eval_size < validation.size()
          ? validation.slice(0, config.val_eval_size)
          : validation;

  std::vector<std::size_t> order(train_set.size());
  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = learning_rate(config, epoch);
    net.set_training(true);
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0, batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      if (count < 2) break;
      const auto batch = train_set.select(
          {order.begin() + std::ptrdiff_t(first), order.begin() + std::ptrdiff_t(first + count)});
      const Tensor logits = net.forward(batch.images);
      auto loss = cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches + 1) + " (lr " + std::to_string(lr) + ")");
      }
      const auto pred = argmax_lastaxis(logits);
      for (std::size_t i = 0; i < count; ++i) correct += pred[i] == batch.labels[i];
      net.backward(loss.grad);
      opt.step(params, lr);
      loss_sum += loss.loss;
      seen += count;
      ++batches;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    entry.train_loss = loss_sum / double(std::max<std::size_t>(batches, 1));
    entry.train_acc = double(correct) / double(std::max<std::size_t>(seen, 1));
    entry.val_acc = metrics::accuracy(net, val);
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  net.set_training(false);
  return log;
}

void write_epoch_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,lr,train_loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.6f,%.6f\n", e.epoch, e.lr, e.train_loss,
                  e.train_acc, e.val_acc);
    os << buf;
  }
}

}  // namespace ric::optim
