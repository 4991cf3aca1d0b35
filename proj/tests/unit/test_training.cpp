#include <catch_amalgamated.hpp>

#include <cmath>

#include "uwcsr/training.hpp"

using namespace uwcsr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TrainingHooks constant_hooks(std::function<double()> val) {
  TrainingHooks h;
  h.train_batch = [](std::span<const std::size_t>, double) { return 1.0; };
  h.validation_loss = std::move(val);
  h.save_best = [] {};
  h.restore_best = [] {};
  return h;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainingConfig cfg;
  CHECK(learning_rate_at(cfg, 0) == 1e-3);
  CHECK(learning_rate_at(cfg, 39) == 1e-3);
  CHECK_THAT(learning_rate_at(cfg, 40), WithinRel(1e-4, 1e-12));
  CHECK_THAT(learning_rate_at(cfg, 80), WithinRel(1e-5, 1e-12));
  CHECK_THAT(learning_rate_at(cfg, 99), WithinRel(1e-5, 1e-12));
}

TEST_CASE("training config validation") {
  TrainingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.early_stop_patience = cfg.max_epochs;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.initial_lr = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(parse_optimizer(to_string(OptimizerKind::adam)) == OptimizerKind::adam);
  CHECK(parse_optimizer(to_string(OptimizerKind::sgd_momentum)) == OptimizerKind::sgd_momentum);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), std::invalid_argument);
}

TEST_CASE("early stopping on a worsening validation loss") {
  TrainingConfig cfg;
  int calls = 0;
  const auto report = run_training(cfg, 10, constant_hooks([&] { return static_cast<double>(++calls); }));
  CHECK(report.stop_epoch == 6);
  CHECK(report.best_val_epoch == 0);
  CHECK(report.stop_epoch - report.best_val_epoch == cfg.early_stop_patience + 1);
  CHECK(report.stop_reason == StopReason::early_stop);
  CHECK(report.train_loss.size() == 6);
  CHECK(report.val_loss.size() == 6);
  CHECK(report.lr.size() == 6);
}

TEST_CASE("improving validation runs to max epochs with the exact schedule") {
  TrainingConfig cfg;
  int calls = 0;
  const auto report = run_training(cfg, 5, constant_hooks([&] { return 1.0 / ++calls; }));
  CHECK(report.stop_epoch == 100);
  CHECK(report.stop_reason == StopReason::max_epochs);
  CHECK(report.best_val_epoch == 99);
  for (int e = 0; e < 100; ++e)
    CHECK(report.lr[static_cast<std::size_t>(e)] == cfg.initial_lr * std::pow(cfg.lr_decay, e / cfg.decay_every));
}

TEST_CASE("best model is restored") {
  TrainingConfig cfg;
  cfg.max_epochs = 20;
  const std::vector<double> val{5, 3, 1, 2, 4, 6, 7, 8, 9, 10};
  int epoch = 0, saved_at = -1, restored = 0;
  TrainingHooks h = constant_hooks([&] { return val[static_cast<std::size_t>(epoch++)]; });
  h.save_best = [&] { saved_at = epoch - 1; };
  h.restore_best = [&] { ++restored; };
  const auto report = run_training(cfg, 4, h);
  CHECK(report.best_val_epoch == 2);
  CHECK(saved_at == 2);
  CHECK(restored == 1);
  CHECK(report.stop_epoch == 8);
}

TEST_CASE("loss report csv") {
  LossReport r;
  r.lr = {0.1, 0.01};
  r.train_loss = {2, 1};
  r.val_loss = {3, 1.5};
  const auto csv = r.to_csv();
  CHECK(csv.rfind("epoch,lr,train_loss,val_loss\n", 0) == 0);
  CHECK(csv.find("\n1,0.01") != std::string::npos);
}

TEST_CASE("optimizer freezes, clips and steps") {
  std::vector<double> a{1.0, 2.0}, b{3.0};
  std::vector<ParamBlock> blocks{{a, false}, {b, true}};
  TrainingConfig cfg;
  cfg.momentum = 0.0;
  cfg.clip_norm = 0.0;
  Optimizer opt(cfg);
  Gradients g{{1.0, -1.0}, {5.0}};
  opt.step(blocks, g, 0.5);
  CHECK(a == std::vector<double>{0.5, 2.5});
  CHECK(b == std::vector<double>{3.0});

  cfg.clip_norm = 1.0;
  Optimizer clipped(cfg);
  std::vector<double> c{0.0, 0.0};
  std::vector<ParamBlock> one{{c, false}};
  Gradients big{{3.0, 4.0}};
  clipped.step(one, big, 1.0);
  CHECK_THAT(c[0], WithinAbs(-0.6, 1e-15));
  CHECK_THAT(c[1], WithinAbs(-0.8, 1e-15));
  CHECK_THAT(gradient_norm(Gradients{{3.0}, {4.0}}), WithinAbs(5.0, 1e-15));

  // momentum accumulates velocity
  TrainingConfig mcfg;
  mcfg.clip_norm = 0.0;
  Optimizer mom(mcfg);
  std::vector<double> d{0.0};
  std::vector<ParamBlock> dp{{d, false}};
  Gradients unit{{1.0}};
  mom.step(dp, unit, 1.0);
  const double first = d[0];
  unit = {{1.0}};
  mom.step(dp, unit, 1.0);
  CHECK(std::abs(d[0] - first) > std::abs(first));
}
