#include "uwcsr/baselines.hpp"

#include <omp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <stdexcept>

#include "uwcsr/binary_io.hpp"
#include "uwcsr/csrnet.hpp"
#include "uwcsr/estimation.hpp"
#include "uwcsr/rng.hpp"

namespace uwcsr {

namespace {

constexpr std::uint32_t kMlpVersion = 1;

void affine(const DenseLayer& layer, const double* x, double* y) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* w = layer.weights.data() + o * layer.in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

Gradients zero_gradients(const MlpNetwork& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.emplace_back(layer.weights.size(), 0.0);
    g.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void accumulate(const MlpNetwork& net, std::span<const double> features,
                std::span<const double> target, Gradients& grads, double& loss) {
  const auto& layers = net.layers();
  if (features.size() != net.input_size()) throw DimensionMismatch("mlp: input size mismatch");
  if (target.size() != net.output_size()) throw DimensionMismatch("mlp: target size mismatch");

  std::vector<std::vector<double>> acts{{features.begin(), features.end()}};
  std::vector<std::vector<double>> pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> z(layers[l].out);
    affine(layers[l], acts.back().data(), z.data());
    std::vector<double> a = z;
    if (l + 1 < layers.size())
      for (double& v : a) v = lrelu(v, net.slope());
    pre.push_back(std::move(z));
    acts.push_back(std::move(a));
  }

  const auto& out = acts.back();
  const double n = static_cast<double>(out.size());
  std::vector<double> grad(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - target[i];
    loss += d * d / n;
    grad[i] = 2.0 * d / n;
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    if (l + 1 < layers.size())
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= lrelu_grad(pre[l][i], net.slope());
    const auto& x = acts[l];
    if (!layer.frozen) {
      auto& gw = grads[2 * l];
      auto& gb = grads[2 * l + 1];
      for (std::size_t o = 0; o < layer.out; ++o) {
        gb[o] += grad[o];
        double* row = gw.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) row[i] += grad[o] * x[i];
      }
    }
    if (l == 0) break;
    std::vector<double> up(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) up[i] += w[i] * grad[o];
    }
    grad = std::move(up);
  }
}

}  // namespace

CsiMatrix ls_baseline(const OfdmFrameGrid& frame) { return raw_csi_estimate(frame); }

std::vector<std::size_t> MlpNetwork::default_sizes(std::size_t n_pilots, std::size_t n_symbols) {
  return {2 * n_pilots, 64, 128, 64, 2 * n_symbols};
}

MlpNetwork MlpNetwork::zeros(std::span<const std::size_t> sizes, double slope) {
  if (sizes.size() < 2) throw std::invalid_argument("MlpNetwork: need at least input and output sizes");
  MlpNetwork net;
  net.slope_ = slope;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] == 0 || sizes[l + 1] == 0) throw std::invalid_argument("MlpNetwork: empty layer");
    DenseLayer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

MlpNetwork MlpNetwork::make(std::span<const std::size_t> sizes, std::uint64_t seed, double slope) {
  MlpNetwork net = zeros(sizes, slope);
  Rng rng = make_rng(seed, Stream::init);
  for (auto& layer : net.layers_) {
    std::normal_distribution<double> dist(
        0.0, std::sqrt(2.0 / ((1.0 + slope * slope) * static_cast<double>(layer.in))));
    for (double& w : layer.weights) w = dist(rng);
  }
  return net;
}

std::vector<std::size_t> MlpNetwork::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().in);
  for (const auto& layer : layers_) sizes.push_back(layer.out);
  return sizes;
}

std::vector<ParamBlock> MlpNetwork::param_blocks() {
  std::vector<ParamBlock> blocks;
  for (auto& layer : layers_) {
    blocks.push_back({layer.weights, layer.frozen});
    blocks.push_back({layer.bias, layer.frozen});
  }
  return blocks;
}

std::vector<double> mlp_forward(const MlpNetwork& net, std::span<const double> features) {
  if (features.size() != net.input_size()) throw DimensionMismatch("mlp_forward: input size mismatch");
  std::vector<double> x(features.begin(), features.end());
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> y(layers[l].out);
    affine(layers[l], x.data(), y.data());
    if (l + 1 < layers.size())
      for (double& v : y) v = lrelu(v, net.slope());
    x = std::move(y);
  }
  return x;
}

Gradients mlp_backward(const MlpNetwork& net, std::span<const double> features,
                       std::span<const double> target, double* loss) {
  Gradients g = zero_gradients(net);
  double l = 0.0;
  accumulate(net, features, target, g, l);
  if (loss != nullptr) *loss = l;
  return g;
}

double mlp_mean_loss(const MlpNetwork& net, std::span<const MlpSample> data) {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    const auto out = mlp_forward(net, s.features);
    double acc = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) acc += (out[k] - s.target[k]) * (out[k] - s.target[k]);
    losses[static_cast<std::size_t>(i)] = acc / static_cast<double>(out.size());
  }
  double acc = 0.0;
  for (double v : losses) acc += v;
  return acc / static_cast<double>(data.size());
}

LossReport mlp_fit(MlpNetwork& net, std::span<const MlpSample> train, std::span<const MlpSample> val,
                   const TrainingConfig& cfg) {
  if (train.empty() || val.empty()) throw std::invalid_argument("mlp_fit: empty training or validation set");
  Optimizer opt(cfg);
  MlpNetwork best = net;

  TrainingHooks hooks;
  hooks.train_batch = [&](std::span<const std::size_t> batch, double lr) {
    const int n_threads = omp_get_max_threads();
    std::vector<Gradients> partial(static_cast<std::size_t>(n_threads));
    std::vector<double> partial_loss(static_cast<std::size_t>(n_threads), 0.0);
#pragma omp parallel num_threads(n_threads)
    {
      const auto tid = static_cast<std::size_t>(omp_get_thread_num());
      partial[tid] = zero_gradients(net);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
        const auto& s = train[batch[static_cast<std::size_t>(i)]];
        accumulate(net, s.features, s.target, partial[tid], partial_loss[tid]);
      }
    }
    Gradients g = std::move(partial[0]);
    double loss = partial_loss[0];
    for (std::size_t t = 1; t < partial.size(); ++t) {
      loss += partial_loss[t];
      for (std::size_t b = 0; b < g.size(); ++b)
        for (std::size_t i = 0; i < g[b].size(); ++i) g[b][i] += partial[t][b][i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& block : g)
      for (double& v : block) v *= inv;
    auto blocks = net.param_blocks();
    opt.step(blocks, g, lr);
    return loss * inv;
  };
  hooks.validation_loss = [&] { return mlp_mean_loss(net, val); };
  hooks.save_best = [&] { best = net; };
  hooks.restore_best = [&] { net = best; };
  return run_training(cfg, train.size(), hooks);
}

std::vector<double> mlp_features(const TwoChannelCsi& raw_scaled, const PilotPattern& pattern,
                                 std::size_t subcarrier) {
  const std::size_t p = pattern.count();
  std::vector<double> f(2 * p);
  for (std::size_t i = 0; i < p; ++i) {
    f[i] = raw_scaled(0, subcarrier, pattern.symbol_indices[i]);
    f[p + i] = raw_scaled(1, subcarrier, pattern.symbol_indices[i]);
  }
  return f;
}

std::vector<MlpSample> mlp_samples(const TwoChannelCsi& raw_scaled, const TwoChannelCsi& target_scaled,
                                   const PilotPattern& pattern) {
  require_same_shape(raw_scaled, target_scaled, "mlp_samples");
  const std::size_t n_sym = raw_scaled.cols();
  std::vector<MlpSample> out;
  out.reserve(raw_scaled.rows());
  for (std::size_t s = 0; s < raw_scaled.rows(); ++s) {
    MlpSample sample;
    sample.features = mlp_features(raw_scaled, pattern, s);
    sample.target.resize(2 * n_sym);
    for (std::size_t m = 0; m < n_sym; ++m) {
      sample.target[m] = target_scaled(0, s, m);
      sample.target[n_sym + m] = target_scaled(1, s, m);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

TwoChannelCsi mlp_estimate(const MlpNetwork& net, const TwoChannelCsi& raw_scaled,
                           const PilotPattern& pattern) {
  const std::size_t n_sym = raw_scaled.cols();
  if (net.output_size() != 2 * n_sym) throw DimensionMismatch("mlp_estimate: output size mismatch");
  TwoChannelCsi out(2, raw_scaled.rows(), n_sym);
  for (std::size_t s = 0; s < raw_scaled.rows(); ++s) {
    const auto y = mlp_forward(net, mlp_features(raw_scaled, pattern, s));
    for (std::size_t m = 0; m < n_sym; ++m) {
      out(0, s, m) = y[m];
      out(1, s, m) = y[n_sym + m];
    }
  }
  return out;
}

void save_mlp_checkpoint(const std::filesystem::path& path, const MlpNetwork& net,
                         double scaling_factor) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto sizes = net.layer_sizes();
  binio::write_magic(os, "MLPB");
  binio::write_u32(os, kMlpVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (std::size_t v : sizes) binio::write_u32(os, static_cast<std::uint32_t>(v));
  binio::write_f64(os, net.slope());
  binio::write_f64(os, scaling_factor);
  for (const auto& layer : net.layers()) {
    for (double w : layer.weights) binio::write_f32(os, static_cast<float>(w));
    for (double b : layer.bias) binio::write_f32(os, static_cast<float>(b));
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");

  std::ofstream txt(path.string() + ".txt", std::ios::trunc);
  if (!txt) throw IoError("cannot write manifest for '" + path.string() + "'");
  txt << std::setprecision(9) << "magic MLPB\nversion " << kMlpVersion << "\nlayer_sizes";
  for (std::size_t v : sizes) txt << ' ' << v;
  txt << "\nlrelu_slope " << net.slope() << "\nscaling_factor " << scaling_factor << '\n';
}

MlpCheckpoint load_mlp_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("checkpoint '" + path.string() + "' not found");
  binio::expect_magic(is, "MLPB");
  if (binio::read_u32(is) != kMlpVersion) throw IoError("unsupported MLPB version");
  const std::size_t n_layers = binio::read_u32(is);
  if (n_layers == 0 || n_layers > 64) throw IoError("MLPB layer count out of range");
  std::vector<std::size_t> sizes(n_layers + 1);
  for (auto& v : sizes) v = binio::read_u32(is);
  const double slope = binio::read_f64(is);
  MlpCheckpoint ck;
  ck.scaling_factor = binio::read_f64(is);
  ck.net = MlpNetwork::zeros(sizes, slope);
  for (auto& layer : ck.net.layers()) {
    for (double& w : layer.weights) w = binio::read_f32(is);
    for (double& b : layer.bias) b = binio::read_f32(is);
  }
  return ck;
}

}  // namespace uwcsr
