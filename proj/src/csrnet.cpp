#include "uwcsr/csrnet.hpp"

#include <omp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <stdexcept>

#include "uwcsr/binary_io.hpp"
#include "uwcsr/kernels.hpp"
#include "uwcsr/rng.hpp"

namespace uwcsr {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

kernels::ConvShape shape_of(const ConvLayer& layer, const Tensor3& input) {
  return {layer.in_ch, layer.out_ch, input.rows(), input.cols()};
}

// Activations kept for the backward pass: inputs[l] feeds layer l,
// pre[l] is its affine output.
struct ForwardTrace {
  std::vector<Tensor3> inputs;
  std::vector<Tensor3> pre;
};

Tensor3 run_forward(const ConvNetwork& net, const Tensor3& input, ForwardTrace* trace,
                    kernels::fast::Workspace& ws) {
  if (input.channels() != net.channels())
    throw DimensionMismatch("forward: input channels do not match the network");
  const auto& layers = net.layers();
  const double slope = net.slope();
  if (trace != nullptr) {
    trace->inputs.clear();
    trace->pre.clear();
  }

  Tensor3 act = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const ConvLayer& layer = layers[l];
    Tensor3 z(layer.out_ch, input.rows(), input.cols());
    kernels::fast::conv3x3_forward(act.data(), layer.weights.data(), layer.bias.data(), z.data(),
                                   shape_of(layer, input), ws);
    if (trace != nullptr) trace->inputs.push_back(act);
    const bool last = l + 1 == layers.size();
    if (last) {
      if (trace != nullptr) trace->pre.push_back(z);
      act = std::move(z);
    } else {
      Tensor3 a = z;
      for (double& v : a.values()) v = lrelu(v, slope);
      if (trace != nullptr) trace->pre.push_back(std::move(z));
      act = std::move(a);
    }
  }
  for (std::size_t i = 0; i < act.size(); ++i) act.values()[i] += input.values()[i];
  return act;
}

void accumulate_backward(const ConvNetwork& net, const Tensor3& input, const Tensor3& target,
                         Gradients& grads, double& loss, kernels::fast::Workspace& ws,
                         double weight = 1.0) {
  ForwardTrace trace;
  const Tensor3 pred = run_forward(net, input, &trace, ws);
  loss += weight * mse_loss(pred, target);

  const auto& layers = net.layers();
  const double slope = net.slope();
  Tensor3 grad = mse_loss_grad(pred, target);  // d loss / d R (skip is identity)
  if (weight != 1.0)
    for (double& g : grad.values()) g *= weight;

  // below the first trainable layer nothing more is needed
  std::size_t first_trainable = 0;
  while (first_trainable < layers.size() && layers[first_trainable].frozen) ++first_trainable;

  for (std::size_t li = layers.size(); li-- > first_trainable;) {
    const ConvLayer& layer = layers[li];
    if (li + 1 != layers.size()) {
      const auto& z = trace.pre[li].values();
      for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] *= lrelu_grad(z[i], slope);
    }
    const Tensor3& in = trace.inputs[li];
    Tensor3 grad_in;
    double* grad_in_ptr = nullptr;
    if (li > first_trainable) {
      grad_in = Tensor3(layer.in_ch, in.rows(), in.cols());
      grad_in_ptr = grad_in.data();
    }
    auto& gw = grads[2 * li];
    auto& gb = grads[2 * li + 1];
    if (layer.frozen) {
      // upstream gradient only; weight/bias blocks stay zero
      std::vector<double> scratch_w(gw.size(), 0.0), scratch_b(gb.size(), 0.0);
      kernels::fast::conv3x3_backward(in.data(), layer.weights.data(), grad.data(), grad_in_ptr,
                                      scratch_w.data(), scratch_b.data(), shape_of(layer, in), ws);
    } else {
      kernels::fast::conv3x3_backward(in.data(), layer.weights.data(), grad.data(), grad_in_ptr,
                                      gw.data(), gb.data(), shape_of(layer, in), ws);
    }
    if (li > first_trainable) grad = std::move(grad_in);
  }
}

Gradients zero_gradients(const ConvNetwork& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.emplace_back(layer.weights.size(), 0.0);
    g.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

}  // namespace

double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }
double lrelu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

ConvNetwork ConvNetwork::zeros(std::size_t depth, std::size_t width, std::size_t channels,
                               double slope) {
  if (depth < 2) throw std::invalid_argument("ConvNetwork: depth must be >= 2");
  if (width < 1 || channels < 1) throw std::invalid_argument("ConvNetwork: empty layer");
  if (!(slope > 0.0 && slope < 1.0)) throw std::invalid_argument("ConvNetwork: slope in (0, 1)");
  ConvNetwork net;
  net.slope_ = slope;
  net.layers_.emplace_back(channels, width);
  for (std::size_t l = 1; l + 1 < depth; ++l) net.layers_.emplace_back(width, width);
  net.layers_.emplace_back(width, channels);
  return net;
}

ConvNetwork ConvNetwork::make(std::size_t depth, std::size_t width, std::size_t channels,
                              std::uint64_t seed, double slope) {
  ConvNetwork net = zeros(depth, width, channels, slope);
  Rng rng = make_rng(seed, Stream::init);
  for (auto& layer : net.layers_) {
    const double fan_in = static_cast<double>(layer.in_ch * kernels::kTaps);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in)));
    for (double& w : layer.weights) w = dist(rng);
  }
  return net;
}

std::vector<ParamBlock> ConvNetwork::param_blocks() {
  std::vector<ParamBlock> blocks;
  for (auto& layer : layers_) {
    blocks.push_back({layer.weights, layer.frozen});
    blocks.push_back({layer.bias, layer.frozen});
  }
  return blocks;
}

std::size_t ConvNetwork::n_params() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

void ConvNetwork::validate() const {
  if (layers_.size() < 2) throw std::invalid_argument("ConvNetwork: depth must be >= 2");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in_ch * layer.out_ch * kernels::kTaps ||
        layer.bias.size() != layer.out_ch)
      throw std::invalid_argument("ConvNetwork: layer parameter size mismatch");
    if (l > 0 && layers_[l - 1].out_ch != layer.in_ch)
      throw std::invalid_argument("ConvNetwork: layer channels do not chain");
  }
  if (layers_.front().in_ch != layers_.back().out_ch)
    throw std::invalid_argument("ConvNetwork: residual output channels must match input");
}

Tensor3 conv2d_forward(const Tensor3& input, const ConvLayer& layer) {
  if (input.channels() != layer.in_ch) throw DimensionMismatch("conv2d_forward: channel mismatch");
  Tensor3 out(layer.out_ch, input.rows(), input.cols());
  kernels::fast::Workspace ws;
  kernels::fast::conv3x3_forward(input.data(), layer.weights.data(), layer.bias.data(), out.data(),
                                 shape_of(layer, input), ws);
  return out;
}

Tensor3 forward(const ConvNetwork& net, const Tensor3& input) {
  kernels::fast::Workspace ws;
  return run_forward(net, input, nullptr, ws);
}

double mse_loss(const Tensor3& pred, const Tensor3& target) {
  require_same_shape(pred, target, "mse_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.values()[i] - target.values()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

Tensor3 mse_loss_grad(const Tensor3& pred, const Tensor3& target) {
  require_same_shape(pred, target, "mse_loss_grad");
  Tensor3 g(pred.channels(), pred.rows(), pred.cols());
  const double k = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    g.values()[i] = k * (pred.values()[i] - target.values()[i]);
  return g;
}

Gradients backward(const ConvNetwork& net, const Tensor3& input, const Tensor3& target,
                   double* loss) {
  Gradients grads = zero_gradients(net);
  kernels::fast::Workspace ws;
  double l = 0.0;
  accumulate_backward(net, input, target, grads, l, ws);
  if (loss != nullptr) *loss = l;
  return grads;
}

Gradients batch_gradients(const ConvNetwork& net, std::span<const TrainingPair> data,
                          std::span<const std::size_t> indices, double* mean_loss) {
  const int n_threads = omp_get_max_threads();
  std::vector<Gradients> partial(static_cast<std::size_t>(n_threads));
  std::vector<double> partial_loss(static_cast<std::size_t>(n_threads), 0.0);

#pragma omp parallel num_threads(n_threads)
  {
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    partial[tid] = zero_gradients(net);
    kernels::fast::Workspace ws;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(indices.size()); ++i) {
      const TrainingPair& pair = data[indices[static_cast<std::size_t>(i)]];
      accumulate_backward(net, pair.input, pair.target, partial[tid], partial_loss[tid], ws, pair.weight);
    }
  }

  Gradients total = std::move(partial[0]);
  double loss = partial_loss[0];
  for (std::size_t t = 1; t < partial.size(); ++t) {
    loss += partial_loss[t];
    for (std::size_t b = 0; b < total.size(); ++b)
      for (std::size_t i = 0; i < total[b].size(); ++i) total[b][i] += partial[t][b][i];
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (auto& block : total)
    for (double& v : block) v *= inv;
  if (mean_loss != nullptr) *mean_loss = loss * inv;
  return total;
}

double mean_loss(const ConvNetwork& net, std::span<const TrainingPair> data) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
#pragma omp parallel
  {
    kernels::fast::Workspace ws;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i) {
      const auto& pair = data[static_cast<std::size_t>(i)];
      losses[static_cast<std::size_t>(i)] =
          pair.weight * mse_loss(run_forward(net, pair.input, nullptr, ws), pair.target);
    }
  }
  double acc = 0.0;
  for (double v : losses) acc += v;
  return acc / static_cast<double>(data.size());
}

LossReport fit(ConvNetwork& net, std::span<const TrainingPair> train,
               std::span<const TrainingPair> val, const TrainingConfig& cfg) {
  if (train.empty() || val.empty()) throw std::invalid_argument("fit: empty training or validation set");
  net.validate();
  Optimizer opt(cfg);
  ConvNetwork best = net;

  TrainingHooks hooks;
  hooks.train_batch = [&](std::span<const std::size_t> batch, double lr) {
    double loss = 0.0;
    Gradients g = batch_gradients(net, train, batch, &loss);
    auto blocks = net.param_blocks();
    opt.step(blocks, g, lr);
    return loss;
  };
  hooks.validation_loss = [&] { return mean_loss(net, val); };
  hooks.save_best = [&] { best = net; };
  hooks.restore_best = [&] { net = best; };
  return run_training(cfg, train.size(), hooks);
}

void freeze_layers(ConvNetwork& net, std::size_t n) {
  if (n > net.depth()) throw std::invalid_argument("freeze_layers: more layers than the network has");
  for (std::size_t l = 0; l < net.depth(); ++l) net.layers()[l].frozen = l < n;
}

TransferResult transfer_train(const ConvNetwork& pretrained, std::span<const TrainingPair> train,
                              std::span<const TrainingPair> val, const TrainingConfig& cfg,
                              std::size_t n_frozen) {
  TransferResult result{pretrained, {}, n_frozen};
  freeze_layers(result.net, n_frozen);
  if (n_frozen == result.net.depth()) {
    // nothing trainable: evaluate only
    result.report.val_loss.push_back(mean_loss(result.net, val));
    result.report.train_loss.push_back(mean_loss(result.net, train));
    result.report.lr.push_back(learning_rate_at(cfg, 0));
    result.report.stop_epoch = 0;
    result.report.best_val_epoch = 0;
    return result;
  }
  result.report = fit(result.net, train, val, cfg);
  return result;
}

TransferResult transfer_train(const ConvNetwork& pretrained, std::span<const TrainingPair> train,
                              std::span<const TrainingPair> val, const TrainingConfig& cfg) {
  return transfer_train(pretrained, train, val, cfg, pretrained.depth() / 2);
}

void save_checkpoint(const std::filesystem::path& path, const ConvNetwork& net,
                     double scaling_factor) {
  net.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  binio::write_magic(os, "CSRN");
  binio::write_u32(os, kCheckpointVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(net.depth()));
  binio::write_u32(os, static_cast<std::uint32_t>(net.width()));
  binio::write_u32(os, static_cast<std::uint32_t>(net.channels()));
  binio::write_f64(os, net.slope());
  binio::write_f64(os, scaling_factor);
  for (const auto& layer : net.layers()) {
    binio::write_u32(os, static_cast<std::uint32_t>(layer.out_ch));
    binio::write_u32(os, static_cast<std::uint32_t>(layer.in_ch));
    binio::write_u32(os, kernels::kKernel);
    binio::write_u32(os, kernels::kKernel);
    for (double w : layer.weights) binio::write_f32(os, static_cast<float>(w));
    for (double b : layer.bias) binio::write_f32(os, static_cast<float>(b));
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");

  std::ofstream txt(path.string() + ".txt", std::ios::trunc);
  if (!txt) throw IoError("cannot write manifest for '" + path.string() + "'");
  txt << std::setprecision(9);
  txt << "magic CSRN\nversion " << kCheckpointVersion << "\ndepth " << net.depth() << "\nwidth "
      << net.width() << "\nchannels " << net.channels() << "\nlrelu_slope " << net.slope()
      << "\nscaling_factor " << scaling_factor << '\n';
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& layer = net.layers()[l];
    double sq = 0.0;
    for (double w : layer.weights) sq += w * w;
    txt << "layer " << l << " out " << layer.out_ch << " in " << layer.in_ch << " kernel 3x3"
        << " weight_rms " << std::sqrt(sq / static_cast<double>(layer.weights.size()))
        << " frozen " << (layer.frozen ? 1 : 0) << '\n';
  }
}

CsrnetCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("checkpoint '" + path.string() + "' not found");
  binio::expect_magic(is, "CSRN");
  if (binio::read_u32(is) != kCheckpointVersion) throw IoError("unsupported CSRN version");
  const std::size_t depth = binio::read_u32(is);
  const std::size_t width = binio::read_u32(is);
  const std::size_t channels = binio::read_u32(is);
  const double slope = binio::read_f64(is);
  CsrnetCheckpoint ck;
  ck.scaling_factor = binio::read_f64(is);
  ck.net = ConvNetwork::zeros(depth, width, channels, slope);
  for (auto& layer : ck.net.layers()) {
    const std::size_t out = binio::read_u32(is);
    const std::size_t in = binio::read_u32(is);
    const std::size_t kh = binio::read_u32(is);
    const std::size_t kw = binio::read_u32(is);
    if (out != layer.out_ch || in != layer.in_ch || kh != 3 || kw != 3)
      throw IoError("CSRN layer dimensions inconsistent with header");
    for (double& w : layer.weights) w = binio::read_f32(is);
    for (double& b : layer.bias) b = binio::read_f32(is);
  }
  return ck;
}

}  // namespace uwcsr
