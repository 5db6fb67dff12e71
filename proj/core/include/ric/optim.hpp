#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ric/data.hpp"
#include "ric/nn.hpp"
#include "ric/tensor.hpp"

namespace ric::optim {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits, [B, K]
};

/// Batch mean of -log softmax(logits)[label]; gradient (softmax - onehot) / B.
LossResult cross_entropy(const Tensor& logits, std::span<const std::uint8_t> labels);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update of params in place.
void adam_step(AdamState& state, std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, double lr);

enum class OptimizerKind { kAdam, kSgd };

/// Adam or plain SGD (with optional momentum) over a network's parameters.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind, double momentum = 0.0);
  void step(std::vector<nn::ParamRef<double>>& params, double lr);
  [[nodiscard]] const AdamState& adam() const noexcept { return adam_; }

 private:
  OptimizerKind kind_;
  double momentum_;
  AdamState adam_;
  std::vector<Tensor> velocity_;
};

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 100;
  double lr0 = 1e-4;
  double lr_decay = 0.8;
  int lr_decay_every = 10;
  std::uint64_t seed = 0;
  std::size_t subset_size = 0;       // 0: use the whole training split
  std::size_t validation_size = 10000;
  std::size_t val_eval_size = 0;     // 0: evaluate the whole validation split each epoch
  OptimizerKind optimizer = OptimizerKind::kAdam;

  /// Throws ConfigError on non-positive values.
  void validate() const;
};

/// Learning rate for a 1-based epoch: lr0 * decay^floor((epoch - 1) / every).
double learning_rate(const TrainConfig& config, int epoch);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch training with seeded shuffling. A trailing batch of one image
/// is dropped because training-mode BatchNorm needs at least two. Throws
/// DivergenceError on a non-finite loss.
std::vector<EpochLog> train(nn::Network<double>& net, const data::Dataset& train_set,
                            const data::Dataset& validation, const TrainConfig& config,
                            const EpochCallback& on_epoch = {});

void write_epoch_csv(std::ostream& os, const std::vector<EpochLog>& log);

}  // namespace ric::optim
