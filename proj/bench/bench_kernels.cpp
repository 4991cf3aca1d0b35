// Reference vs im2col convolution, and batch gradients at one thread vs all.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "uwcsr/csrnet.hpp"
#include "uwcsr/kernels.hpp"

namespace {

using uwcsr::kernels::ConvShape;

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Middle layer of the desk-scale net (F filters) on a 64 x 16 grid; arg = F.
ConvShape shape_for(const benchmark::State& state) {
  const auto f = static_cast<std::size_t>(state.range(0));
  return {f, f, 64, 16};
}

void BM_ConvForwardReference(benchmark::State& state) {
  const auto s = shape_for(state);
  const auto in = randn(s.in_size(), 1), w = randn(s.weight_size(), 2), b = randn(s.out_ch, 3);
  std::vector<double> out(s.out_size());
  for (auto _ : state) {
    uwcsr::kernels::reference::conv3x3_forward(in.data(), w.data(), b.data(), out.data(), s);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ConvForwardFast(benchmark::State& state) {
  const auto s = shape_for(state);
  const auto in = randn(s.in_size(), 1), w = randn(s.weight_size(), 2), b = randn(s.out_ch, 3);
  std::vector<double> out(s.out_size());
  uwcsr::kernels::fast::Workspace ws;
  for (auto _ : state) {
    uwcsr::kernels::fast::conv3x3_forward(in.data(), w.data(), b.data(), out.data(), s, ws);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ConvBackwardReference(benchmark::State& state) {
  const auto s = shape_for(state);
  const auto in = randn(s.in_size(), 1), w = randn(s.weight_size(), 2), g = randn(s.out_size(), 3);
  std::vector<double> gi(s.in_size()), gw(s.weight_size()), gb(s.out_ch);
  for (auto _ : state) {
    uwcsr::kernels::reference::conv3x3_backward(in.data(), w.data(), g.data(), gi.data(), gw.data(),
                                                gb.data(), s);
    benchmark::DoNotOptimize(gw.data());
  }
}

void BM_ConvBackwardFast(benchmark::State& state) {
  const auto s = shape_for(state);
  const auto in = randn(s.in_size(), 1), w = randn(s.weight_size(), 2), g = randn(s.out_size(), 3);
  std::vector<double> gi(s.in_size()), gw(s.weight_size()), gb(s.out_ch);
  uwcsr::kernels::fast::Workspace ws;
  for (auto _ : state) {
    uwcsr::kernels::fast::conv3x3_backward(in.data(), w.data(), g.data(), gi.data(), gw.data(), gb.data(),
                                           s, ws);
    benchmark::DoNotOptimize(gw.data());
  }
}

// arg = thread count; 0 means omp_get_max_threads().
void BM_BatchGradients(benchmark::State& state) {
  const int requested = static_cast<int>(state.range(0));
  const int threads = requested > 0 ? requested : omp_get_max_threads();
  const auto net = uwcsr::ConvNetwork::make(8, 16, 2, 1);
  std::vector<uwcsr::TrainingPair> data(32);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].input = uwcsr::Tensor3(2, 64, 16);
    data[i].target = uwcsr::Tensor3(2, 64, 16);
    data[i].input.values() = randn(data[i].input.size(), 10 + i);
    data[i].target.values() = randn(data[i].target.size(), 100 + i);
  }
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) {
    double loss = 0.0;
    auto g = uwcsr::batch_gradients(net, data, idx, &loss);
    benchmark::DoNotOptimize(g.data());
  }
  omp_set_num_threads(saved);
  state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(BM_ConvForwardReference)->Arg(16)->Arg(64);
BENCHMARK(BM_ConvForwardFast)->Arg(16)->Arg(64);
BENCHMARK(BM_ConvBackwardReference)->Arg(16)->Arg(64);
BENCHMARK(BM_ConvBackwardFast)->Arg(16)->Arg(64);
BENCHMARK(BM_BatchGradients)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
