#pragma once

// Optimization machinery shared by the convolutional network and the MLP
// baseline: step-decay learning rate, validation early stopping, momentum SGD
// (or Adam) over flat parameter blocks, and global gradient-norm clipping.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace uwcsr {

enum class OptimizerKind { sgd_momentum, adam };

struct TrainingConfig {
  double initial_lr = 1e-3;
  double lr_decay = 0.1;
  int decay_every = 40;
  int max_epochs = 100;
  int early_stop_patience = 5;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::sgd_momentum;
  double momentum = 0.9;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;

  void validate() const;
};

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

// initial_lr * decay^floor(epoch / decay_every), epoch 0-based.
double learning_rate_at(const TrainingConfig& cfg, int epoch);

enum class StopReason { max_epochs, early_stop };
std::string to_string(StopReason reason);

struct LossReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> lr;
  int stop_epoch = 0;       // number of epochs run
  int best_val_epoch = -1;  // 0-based index of the best validation loss
  StopReason stop_reason = StopReason::max_epochs;

  // epoch,lr,train_loss,val_loss
  std::string to_csv() const;
};

// Stops once the validation loss has failed to decrease for `patience`
// consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool update(int epoch, double val_loss);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = -1;
  double best_loss_ = 0.0;
  int stale_ = 0;
  bool improved_ = false;
};

struct ParamBlock {
  std::span<double> values;
  bool frozen = false;
};

using Gradients = std::vector<std::vector<double>>;

double gradient_norm(const Gradients& grads);

class Optimizer {
 public:
  explicit Optimizer(const TrainingConfig& cfg) : cfg_(cfg) {}

  // Clips, then applies one update; frozen blocks are left untouched.
  void step(std::span<const ParamBlock> params, Gradients& grads, double lr);

 private:
  TrainingConfig cfg_;
  Gradients velocity_;
  Gradients second_;
  long steps_ = 0;
};

// Hooks for run_training; the model-specific side supplies these.
struct TrainingHooks {
  // One optimization step on the given training indices; returns the batch loss.
  std::function<double(std::span<const std::size_t> batch, double lr)> train_batch;
  std::function<double()> validation_loss;
  std::function<void()> save_best;
  std::function<void()> restore_best;
};

// Epoch loop: seeded shuffle, mini-batches, lr schedule, early stopping,
// best-validation restore.
LossReport run_training(const TrainingConfig& cfg, std::size_t n_train, const TrainingHooks& hooks);

}  // namespace uwcsr
