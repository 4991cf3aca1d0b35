#include "uwcsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "uwcsr/rng.hpp"

namespace uwcsr {

void TrainingConfig::validate() const {
  if (!(initial_lr > 0.0)) throw std::invalid_argument("training: initial_lr must be > 0");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("training: lr_decay must be > 0");
  if (decay_every < 1) throw std::invalid_argument("training: decay_every must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("training: max_epochs must be >= 1");
  if (early_stop_patience < 1 || early_stop_patience >= max_epochs)
    throw std::invalid_argument("training: patience must be in [1, max_epochs)");
  if (batch_size < 1) throw std::invalid_argument("training: batch_size must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("training: momentum in [0, 1)");
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

double learning_rate_at(const TrainingConfig& cfg, int epoch) {
  return cfg.initial_lr * std::pow(cfg.lr_decay, epoch / cfg.decay_every);
}

std::string to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "max_epochs";
}

std::string LossReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,lr,train_loss,val_loss\n";
  for (std::size_t e = 0; e < lr.size(); ++e)
    os << e << ',' << lr[e] << ',' << train_loss[e] << ',' << val_loss[e] << '\n';
  return os.str();
}

bool EarlyStopping::update(int epoch, double val_loss) {
  improved_ = best_epoch_ < 0 || val_loss < best_loss_;
  if (improved_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

double gradient_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  return std::sqrt(sq);
}

void Optimizer::step(std::span<const ParamBlock> params, Gradients& grads, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("optimizer: block count mismatch");
  if (velocity_.empty()) {
    velocity_.resize(params.size());
    second_.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      velocity_[b].assign(params[b].values.size(), 0.0);
      if (cfg_.optimizer == OptimizerKind::adam) second_[b].assign(params[b].values.size(), 0.0);
    }
  }
  for (std::size_t b = 0; b < params.size(); ++b)
    if (params[b].frozen) std::fill(grads[b].begin(), grads[b].end(), 0.0);

  if (cfg_.clip_norm > 0.0) {
    const double norm = gradient_norm(grads);
    if (norm > cfg_.clip_norm) {
      const double k = cfg_.clip_norm / norm;
      for (auto& g : grads)
        for (double& v : g) v *= k;
    }
  }

  ++steps_;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  const double beta1 = cfg_.momentum;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].frozen) continue;
    auto values = params[b].values;
    auto& vel = velocity_[b];
    const auto& g = grads[b];
    if (cfg_.optimizer == OptimizerKind::sgd_momentum) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        vel[i] = cfg_.momentum * vel[i] - lr * g[i];
        values[i] += vel[i];
      }
    } else {
      auto& sec = second_[b];
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
      for (std::size_t i = 0; i < values.size(); ++i) {
        vel[i] = beta1 * vel[i] + (1.0 - beta1) * g[i];
        sec[i] = beta2 * sec[i] + (1.0 - beta2) * g[i] * g[i];
        values[i] -= lr * (vel[i] / c1) / (std::sqrt(sec[i] / c2) + eps);
      }
    }
  }
}

LossReport run_training(const TrainingConfig& cfg, std::size_t n_train, const TrainingHooks& hooks) {
  cfg.validate();
  if (n_train == 0) throw std::invalid_argument("training: empty training set");

  LossReport report;
  EarlyStopping stopper(cfg.early_stop_patience);
  Rng rng = make_rng(cfg.seed, Stream::shuffle);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double weighted = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n_train - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      weighted += hooks.train_batch(batch, lr) * static_cast<double>(len);
    }
    const double val = hooks.validation_loss();

    report.lr.push_back(lr);
    report.train_loss.push_back(weighted / static_cast<double>(n_train));
    report.val_loss.push_back(val);
    report.stop_epoch = epoch + 1;

    const bool stop = stopper.update(epoch, val);
    if (stopper.improved() && hooks.save_best) hooks.save_best();
    if (stop) {
      report.stop_reason = StopReason::early_stop;
      break;
    }
  }
  report.best_val_epoch = stopper.best_epoch();
  if (hooks.restore_best) hooks.restore_best();
  return report;
}

}  // namespace uwcsr
