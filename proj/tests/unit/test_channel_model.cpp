#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "uwcsr/channel_model.hpp"
#include "uwcsr/ofdm.hpp"

using namespace uwcsr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Thorp's formula written out independently.
double thorp_oracle(double f) {
  const double f2 = f * f;
  return 0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003;
}

ChannelRealization single_path(double gain, double delay, double doppler = 0.0) {
  ChannelRealization r;
  MacroPath p;
  p.length = 1000;
  p.delay = delay;
  p.large_scale_gain = gain;
  p.doppler_rate = doppler;
  r.macro_paths = {p};
  r.intrapath_gains = {{cplx(1.0, 0.0)}};
  r.intrapath_delays = {{0.0}};
  r.nominal_response = 1.0;
  return r;
}

}  // namespace

TEST_CASE("direct and surface eigenrays follow the mirror geometry") {
  EnvironmentConfig env;
  const auto paths = trace_macro_paths(env);
  REQUIRE(paths.size() == 8);
  // sqrt(1000^2 + 30^2), sqrt(1000^2 + 70^2)
  CHECK_THAT(paths[0].length, WithinAbs(1000.4498987955369, 1e-9));
  CHECK_THAT(paths[0].delay, WithinAbs(1000.4498987955369 / 1500.0, 1e-12));
  CHECK_THAT(paths[0].delay, WithinAbs(0.6669666, 1e-7));
  CHECK(paths[0].n_surface_bounces + paths[0].n_bottom_bounces == 0);
  CHECK_THAT(paths[1].length, WithinAbs(1002.4470060806208, 1e-9));
  CHECK(paths[1].n_surface_bounces == 1);
  CHECK(paths[1].n_bottom_bounces == 0);
  for (std::size_t i = 1; i < paths.size(); ++i) CHECK(paths[i].length >= paths[i - 1].length);
  for (const auto& p : paths) CHECK(p.delay >= env.range / env.c_water);
}

TEST_CASE("equal depths make the direct path exactly the range") {
  EnvironmentConfig env;
  env.tx_depth = env.rx_depth = 35.0;
  for (double r : {10.0, 777.0, 5000.0}) {
    env.range = r;
    CHECK(trace_macro_paths(env).front().length == r);
  }
}

TEST_CASE("trace rejects an empty path budget") {
  EnvironmentConfig env;
  env.n_macro_paths = 0;
  CHECK_THROWS_AS(trace_macro_paths(env), std::invalid_argument);
}

TEST_CASE("environment validation") {
  EnvironmentConfig env;
  CHECK_NOTHROW(env.validate());
  env.tx_depth = 120;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
  env = {};
  env.n_intrapaths = 0;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
  env = {};
  env.c_bottom = 0;
  CHECK_THROWS_AS(env.validate(), std::invalid_argument);
}

TEST_CASE("Thorp absorption") {
  CHECK_THAT(thorp_absorption(16.0), WithinAbs(2.769, 5e-4));
  CHECK_THAT(thorp_absorption(16.0), WithinRel(thorp_oracle(16.0), 1e-14));
  CHECK_THAT(thorp_absorption(1e-9), WithinAbs(0.003, 1e-12));
  double prev = thorp_absorption(1.0);
  for (double f = 1.01; f <= 50.0; f += 0.01) {
    const double a = thorp_absorption(f);
    CHECK(a > prev);
    prev = a;
  }
  CHECK_THROWS_AS(thorp_absorption(0.0), std::invalid_argument);
  CHECK_THROWS_AS(thorp_absorption(-1.0), std::invalid_argument);
}

TEST_CASE("large-scale gain") {
  for (double k : {1.0, 1.5, 2.0}) CHECK(large_scale_gain(1.0, 16.0, k, Absorption::disabled) == 1.0);
  CHECK_THAT(large_scale_gain(100.0, 16.0, 2.0, Absorption::disabled), WithinRel(0.01, 1e-14));
  const double with = large_scale_gain(1000.45, 16.0, 1.7);
  const double without = large_scale_gain(1000.45, 16.0, 1.7, Absorption::disabled);
  CHECK(with > 0.0);
  CHECK(with < without);
  // 1/sqrt(l^k 10^(alpha l_km / 10))
  const double oracle = 1.0 / std::sqrt(std::pow(1000.45, 1.7) * std::pow(10.0, thorp_oracle(16.0) * 1.00045 / 10.0));
  CHECK_THAT(with, WithinRel(oracle, 1e-12));
  CHECK_THROWS_AS(large_scale_gain(0.5, 16.0, 1.7), std::invalid_argument);
}

TEST_CASE("bottom reflection coefficient") {
  CHECK_THAT(bottom_reflection_coefficient(0.3, 1500, 1500, 1.0), WithinAbs(0.0, 1e-15));
  // normal incidence: (m - n) / (m + n), n = c_w / c_b
  const double n = 1500.0 / 1200.0;
  CHECK(bottom_reflection_coefficient(std::numbers::pi / 2, 1500, 1200, 1.0) < 0.0);
  CHECK_THAT(bottom_reflection_coefficient(std::numbers::pi / 2, 1500, 1200, 1.0),
             WithinRel((1.0 - n) / (1.0 + n), 1e-12));
  // the denser default sediment outweighs the slower sound speed
  CHECK_THAT(bottom_reflection_coefficient(std::numbers::pi / 2, 1500, 1200, 1.5),
             WithinRel((1.5 - n) / (1.5 + n), 1e-12));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(1e-6, std::numbers::pi / 2);
  std::uniform_real_distribution<double> speed(800, 3000);
  for (int i = 0; i < 1000; ++i) {
    const double r = bottom_reflection_coefficient(angle(rng), 1500, speed(rng), 1.5);
    CHECK(std::abs(r) <= 1.0);
  }
  CHECK_THROWS_AS(bottom_reflection_coefficient(0.0, 1500, 1200, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(bottom_reflection_coefficient(2.0, 1500, 1200, 1.5), std::invalid_argument);
}

TEST_CASE("realizations are deterministic and bounded") {
  EnvironmentConfig env;
  const auto a = realize_channel(env, 42);
  const auto b = realize_channel(env, 42);
  CHECK(a == b);
  CHECK_FALSE(a == realize_channel(env, 43));
  REQUIRE(a.macro_paths.size() == 8);
  for (std::size_t p = 0; p < a.macro_paths.size(); ++p) {
    CHECK(std::abs(a.macro_paths[p].doppler_rate) < 1e-3);
    CHECK(a.intrapath_gains[p].size() == 20);
    bool nonzero = false;
    for (auto g : a.intrapath_gains[p]) nonzero = nonzero || std::abs(g) > 0.0;
    CHECK(nonzero);
    for (double d : a.intrapath_delays[p]) CHECK(d >= 0.0);
  }
}

TEST_CASE("unit average power normalization") {
  EnvironmentConfig env;
  OfdmConfig ofdm;
  ofdm.n_subcarriers = 64;
  const auto f = ofdm.frequency_grid();
  const auto t = ofdm.time_grid();
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto h = sample_csi(realize_channel(env, s), f, t);
    double e = 0.0;
    for (auto v : h.values()) e += std::norm(v);
    acc += e / static_cast<double>(h.size());
  }
  acc /= 200.0;
  CHECK(acc >= 0.8);
  CHECK(acc <= 1.2);
}

TEST_CASE("degenerate responses") {
  const std::vector<double> f{15000, 16000, 17000};
  const std::vector<double> t{0.0, 0.1, 0.2};
  const auto flat = sample_csi(single_path(1.0, 0.0), f, t);
  for (auto v : flat.values()) CHECK(v == cplx(1.0, 0.0));

  const auto delayed = sample_csi(single_path(1.0, 0.123456), f, t);
  for (auto v : delayed.values()) CHECK_THAT(std::abs(v), WithinAbs(1.0, 1e-12));

  // pure Doppler phasor exp(j 2 pi f a t)
  const double a = 2e-4;
  const auto doppler = sample_csi(single_path(1.0, 0.0, a), f, t);
  for (std::size_t s = 0; s < f.size(); ++s)
    for (std::size_t m = 0; m < t.size(); ++m) {
      const cplx expect = std::polar(1.0, 2 * std::numbers::pi * f[s] * a * t[m]);
      CHECK_THAT(std::abs(doppler(s, m) - expect), WithinAbs(0.0, 1e-12));
    }

  // tau_2 = 1/(2 f) cancels the first path at f
  auto two = single_path(1.0, 0.0);
  auto second = two.macro_paths[0];
  second.delay = 1.0 / (2 * 16000.0);
  two.macro_paths.push_back(second);
  two.intrapath_gains.push_back({cplx(1.0, 0.0)});
  two.intrapath_delays.push_back({0.0});
  const std::vector<double> f0{16000.0};
  const std::vector<double> t0{0.0};
  CHECK_THAT(std::abs(sample_csi(two, f0, t0)(0, 0)), WithinAbs(0.0, 1e-12));

  CHECK_THROWS_AS(sample_csi(two, std::vector<double>{}, t0), std::invalid_argument);
  CHECK_THROWS_AS(sample_csi(two, f0, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("response properties") {
  EnvironmentConfig env;
  OfdmConfig ofdm;
  ofdm.n_subcarriers = 32;
  const auto f = ofdm.frequency_grid();
  const auto t = ofdm.time_grid();
  auto real = realize_channel(env, 9);
  const auto h = sample_csi(real, f, t);

  SECTION("unit-modulus rotation of every intrapath gain rotates H") {
    const cplx c = std::polar(1.0, 0.7);
    auto rotated = real;
    for (auto& gains : rotated.intrapath_gains)
      for (auto& g : gains) g *= c;
    const auto hr = sample_csi(rotated, f, t);
    for (std::size_t k = 0; k < h.size(); ++k)
      CHECK_THAT(std::abs(hr.values()[k] - c * h.values()[k]), WithinAbs(0.0, 1e-12));
  }

  SECTION("superposition over disjoint path sets") {
    auto first = real;
    auto rest = real;
    first.macro_paths.resize(3);
    first.intrapath_gains.resize(3);
    first.intrapath_delays.resize(3);
    rest.macro_paths.erase(rest.macro_paths.begin(), rest.macro_paths.begin() + 3);
    rest.intrapath_gains.erase(rest.intrapath_gains.begin(), rest.intrapath_gains.begin() + 3);
    rest.intrapath_delays.erase(rest.intrapath_delays.begin(), rest.intrapath_delays.begin() + 3);
    const auto h1 = sample_csi(first, f, t);
    const auto h2 = sample_csi(rest, f, t);
    for (std::size_t k = 0; k < h.size(); ++k)
      CHECK_THAT(std::abs(h1.values()[k] + h2.values()[k] - h.values()[k]), WithinAbs(0.0, 1e-12));
  }

  SECTION("no Doppler means constant along time") {
    auto still = real;
    for (auto& p : still.macro_paths) p.doppler_rate = 0.0;
    still.compensated_doppler = 0.0;
    const auto hs = sample_csi(still, f, t);
    for (std::size_t s = 0; s < hs.rows(); ++s)
      for (std::size_t m = 1; m < hs.cols(); ++m) CHECK(hs(s, m) == hs(s, 0));
  }
}
