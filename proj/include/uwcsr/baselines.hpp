#pragma once

// Comparison estimators: plain LS + time interpolation, and a fully connected
// per-subcarrier network mapping the pilot LS values of one subcarrier to
// the whole row of the frame.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uwcsr/grid.hpp"
#include "uwcsr/ofdm.hpp"
#include "uwcsr/training.hpp"

namespace uwcsr {

// LS at pilots + interpolate_time, complex form.
CsiMatrix ls_baseline(const OfdmFrameGrid& frame);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
  bool frozen = false;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class MlpNetwork {
 public:
  MlpNetwork() = default;

  // Hidden sizes 64, 128, 64 between the 2P input and 2M output.
  static std::vector<std::size_t> default_sizes(std::size_t n_pilots, std::size_t n_symbols);
  static MlpNetwork make(std::span<const std::size_t> sizes, std::uint64_t seed,
                         double slope = 0.3);
  static MlpNetwork zeros(std::span<const std::size_t> sizes, double slope = 0.3);

  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_size() const { return layers_.front().in; }
  std::size_t output_size() const { return layers_.back().out; }
  double slope() const { return slope_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<ParamBlock> param_blocks();

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  std::vector<DenseLayer> layers_;
  double slope_ = 0.3;
};

// Affine layers with LReLU between them; the output layer is linear.
std::vector<double> mlp_forward(const MlpNetwork& net, std::span<const double> features);

// Gradients of mean((forward - target)^2) in param_blocks() order.
Gradients mlp_backward(const MlpNetwork& net, std::span<const double> features,
                       std::span<const double> target, double* loss = nullptr);

struct MlpSample {
  std::vector<double> features;  // 2P: Re of pilot LS values, then Im
  std::vector<double> target;    // 2M: Re of the row, then Im
};

LossReport mlp_fit(MlpNetwork& net, std::span<const MlpSample> train,
                   std::span<const MlpSample> val, const TrainingConfig& cfg);

double mlp_mean_loss(const MlpNetwork& net, std::span<const MlpSample> data);

// One sample per subcarrier of a scaled two-channel raw estimate / target.
std::vector<MlpSample> mlp_samples(const TwoChannelCsi& raw_scaled, const TwoChannelCsi& target_scaled,
                                   const PilotPattern& pattern);
std::vector<double> mlp_features(const TwoChannelCsi& raw_scaled, const PilotPattern& pattern,
                                 std::size_t subcarrier);

// Runs the network on every subcarrier row; returns the scaled two-channel estimate.
TwoChannelCsi mlp_estimate(const MlpNetwork& net, const TwoChannelCsi& raw_scaled,
                           const PilotPattern& pattern);

struct MlpCheckpoint {
  MlpNetwork net;
  double scaling_factor = 10.0;
};

// "MLPB" container: version, layer count, sizes, slope, scaling factor, then
// float32 weights/bias per layer, little-endian; text mirror at <path>.txt.
void save_mlp_checkpoint(const std::filesystem::path& path, const MlpNetwork& net,
                         double scaling_factor);
MlpCheckpoint load_mlp_checkpoint(const std::filesystem::path& path);

}  // namespace uwcsr
