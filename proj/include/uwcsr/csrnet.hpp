#pragma once

// Channel super-resolution network: a stack of 3x3 same-padded convolutions
// with leaky-ReLU activations between layers and an additive skip from input
// to output, so the stack learns the correction to the raw estimate.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uwcsr/grid.hpp"
#include "uwcsr/training.hpp"

namespace uwcsr {

inline constexpr double kDefaultLreluSlope = 0.3;

double lrelu(double x, double slope = kDefaultLreluSlope);
// 1 for x > 0, slope otherwise (including x == 0).
double lrelu_grad(double x, double slope = kDefaultLreluSlope);

struct ConvLayer {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::vector<double> weights;  // out_ch x in_ch x 3 x 3
  std::vector<double> bias;     // out_ch
  bool frozen = false;

  ConvLayer() = default;
  ConvLayer(std::size_t in, std::size_t out)
      : in_ch(in), out_ch(out), weights(in * out * 9, 0.0), bias(out, 0.0) {}

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

class ConvNetwork {
 public:
  ConvNetwork() = default;

  // depth >= 2 layers chaining channels -> width -> ... -> width -> channels.
  // Weights are He-initialized for the leaky slope; biases start at zero.
  static ConvNetwork make(std::size_t depth, std::size_t width, std::size_t channels,
                          std::uint64_t seed, double slope = kDefaultLreluSlope);
  static ConvNetwork zeros(std::size_t depth, std::size_t width, std::size_t channels,
                           double slope = kDefaultLreluSlope);

  std::size_t depth() const { return layers_.size(); }
  std::size_t width() const { return layers_.empty() ? 0 : layers_.front().out_ch; }
  std::size_t channels() const { return layers_.empty() ? 0 : layers_.front().in_ch; }
  double slope() const { return slope_; }

  std::vector<ConvLayer>& layers() { return layers_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }

  // weights then bias per layer, in layer order
  std::vector<ParamBlock> param_blocks();
  std::size_t n_params() const;

  void validate() const;

  friend bool operator==(const ConvNetwork&, const ConvNetwork&) = default;

 private:
  std::vector<ConvLayer> layers_;
  double slope_ = kDefaultLreluSlope;
};

// Zero-padded cross-correlation plus bias.
Tensor3 conv2d_forward(const Tensor3& input, const ConvLayer& layer);

// input + R(input).
Tensor3 forward(const ConvNetwork& net, const Tensor3& input);

double mse_loss(const Tensor3& pred, const Tensor3& target);
// 2 (pred - target) / N
Tensor3 mse_loss_grad(const Tensor3& pred, const Tensor3& target);

// Per-layer weight/bias gradients of mse_loss(forward(net, input), target),
// in param_blocks() order. Frozen layers get zero blocks but still pass the
// gradient upstream.
Gradients backward(const ConvNetwork& net, const Tensor3& input, const Tensor3& target,
                   double* loss = nullptr);

struct TrainingPair {
  Tensor3 input;
  Tensor3 target;
  double weight = 1.0;  // multiplies this pair's loss
};

// Mean-over-batch gradients; samples are spread over OpenMP threads and the
// per-thread partial sums combined in thread order.
Gradients batch_gradients(const ConvNetwork& net, std::span<const TrainingPair> data,
                          std::span<const std::size_t> indices, double* mean_loss);

double mean_loss(const ConvNetwork& net, std::span<const TrainingPair> data);

LossReport fit(ConvNetwork& net, std::span<const TrainingPair> train,
               std::span<const TrainingPair> val, const TrainingConfig& cfg);

void freeze_layers(ConvNetwork& net, std::size_t n);

// Freezes the first n_frozen layers (depth / 2 by default) of a copy of the
// pretrained net and fine-tunes the rest.
struct TransferResult {
  ConvNetwork net;
  LossReport report;
  std::size_t frozen_layers = 0;
};
TransferResult transfer_train(const ConvNetwork& pretrained, std::span<const TrainingPair> train,
                              std::span<const TrainingPair> val, const TrainingConfig& cfg,
                              std::size_t n_frozen);
TransferResult transfer_train(const ConvNetwork& pretrained, std::span<const TrainingPair> train,
                              std::span<const TrainingPair> val, const TrainingConfig& cfg);

struct CsrnetCheckpoint {
  ConvNetwork net;
  double scaling_factor = 10.0;
};

// "CSRN" container: version, depth, width, channels, slope, scaling factor,
// then per layer (out, in, 3, 3) and float32 weights/bias, little-endian.
// A text manifest is written next to it as <path>.txt.
void save_checkpoint(const std::filesystem::path& path, const ConvNetwork& net,
                     double scaling_factor);
CsrnetCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uwcsr
