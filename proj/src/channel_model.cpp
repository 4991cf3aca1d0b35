#include "uwcsr/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "uwcsr/rng.hpp"

namespace uwcsr {

namespace {

void require(bool ok, const char* field) {
  if (!ok) throw std::invalid_argument(std::string("invalid environment: ") + field);
}

// exp(-j 2 pi x) with x reduced to its fractional part first; the raw cycle
// counts reach 1e4 for the absolute carrier phase.
cplx unit_phasor_cycles(double x) {
  const double frac = x - std::floor(x);
  const double ang = -2.0 * std::numbers::pi * frac;
  return {std::cos(ang), std::sin(ang)};
}

}  // namespace

void EnvironmentConfig::validate() const {
  require(water_depth > 0.0, "water_depth");
  require(tx_depth > 0.0 && tx_depth < water_depth, "tx_depth");
  require(rx_depth > 0.0 && rx_depth < water_depth, "rx_depth");
  require(range > 0.0, "range");
  require(spreading_factor > 0.0, "spreading_factor");
  require(c_water > 0.0, "c_water");
  require(c_bottom > 0.0, "c_bottom");
  require(bottom_density_ratio > 0.0, "bottom_density_ratio");
  require(n_intrapaths >= 1, "n_intrapaths");
  require(n_macro_paths >= 1, "n_macro_paths");
  require(intrapath_delay_mean >= 0.0, "intrapath_delay_mean");
  require(intrapath_gain_decay > 0.0 && intrapath_gain_decay <= 1.0, "intrapath_gain_decay");
  require(tx_vehicular_sigma >= 0.0, "tx_vehicular_sigma");
  require(absorption_frequency_khz > 0.0, "absorption_frequency_khz");
  require(std::abs(tx_drift) + std::abs(rx_drift) + std::abs(rx_vehicular) < 0.999e-3 * c_water,
          "drift speeds exceed the Doppler bound");
}

std::vector<MacroPath> trace_macro_paths(const EnvironmentConfig& env) {
  if (env.n_macro_paths < 1) throw std::invalid_argument("n_macro_paths must be >= 1");
  env.validate();

  const double depth = env.water_depth;
  const double zs = env.tx_depth;
  const double zr = env.rx_depth;

  std::vector<MacroPath> paths;
  auto add = [&](double vertical, int surface, int bottom) {
    MacroPath p;
    p.length = std::hypot(env.range, vertical);
    p.delay = p.length / env.c_water;
    p.n_surface_bounces = surface;
    p.n_bottom_bounces = bottom;
    p.grazing_angle = std::atan2(vertical, env.range);
    paths.push_back(p);
  };

  // Unfolded vertical travel for n boundary hits, starting upward (surface
  // first) or downward (bottom first). Every n >= 1 yields two distinct rays,
  // so n_macro_paths / 2 + 1 bounce orders always cover the shortest set.
  add(std::abs(zs - zr), 0, 0);
  const int max_order = env.n_macro_paths / 2 + 1;
  for (int n = 1; n <= max_order; ++n) {
    const int hi = (n + 1) / 2;
    const int lo = n / 2;
    const double base = (n - 1) * depth;
    // surface first
    add(zs + base + ((n % 2 == 1) ? zr : depth - zr), hi, lo);
    // bottom first
    add((depth - zs) + base + ((n % 2 == 1) ? depth - zr : zr), lo, hi);
  }

  std::stable_sort(paths.begin(), paths.end(), [](const MacroPath& a, const MacroPath& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.n_surface_bounces + a.n_bottom_bounces < b.n_surface_bounces + b.n_bottom_bounces;
  });
  paths.resize(static_cast<std::size_t>(env.n_macro_paths));
  return paths;
}

double thorp_absorption(double f_khz) {
  if (!(f_khz > 0.0)) throw std::invalid_argument("thorp_absorption: frequency must be > 0");
  const double f2 = f_khz * f_khz;
  return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
}

double large_scale_gain(double length_m, double f_khz, double k, Absorption absorption) {
  if (!(length_m >= 1.0)) throw std::invalid_argument("large_scale_gain: length must be >= 1 m");
  // 20 log10 form of sqrt(l^k a^l)
  double loss_db = 10.0 * k * std::log10(length_m);
  if (absorption == Absorption::enabled) loss_db += (length_m / 1000.0) * thorp_absorption(f_khz);
  return std::pow(10.0, -loss_db / 20.0);
}

double bottom_reflection_coefficient(double grazing_angle, double c_water, double c_bottom,
                                     double density_ratio) {
  if (!(grazing_angle > 0.0 && grazing_angle <= std::numbers::pi / 2.0))
    throw std::invalid_argument("bottom_reflection_coefficient: grazing angle outside (0, pi/2]");
  const double n = c_water / c_bottom;
  const double cos_g = std::cos(grazing_angle);
  const double radicand = n * n - cos_g * cos_g;
  if (radicand <= 0.0) return 1.0;
  const double num = density_ratio * std::sin(grazing_angle) - std::sqrt(radicand);
  const double den = density_ratio * std::sin(grazing_angle) + std::sqrt(radicand);
  return std::clamp(num / den, -1.0, 1.0);
}

double path_gain(const MacroPath& path, const EnvironmentConfig& env) {
  double g = large_scale_gain(path.length, env.absorption_frequency_khz, env.spreading_factor);
  if (path.n_surface_bounces % 2 == 1) g = -g;
  if (path.n_bottom_bounces > 0) {
    const double angle = std::max(path.grazing_angle, 1e-9);
    const double rb =
        bottom_reflection_coefficient(angle, env.c_water, env.c_bottom, env.bottom_density_ratio);
    g *= std::pow(rb, path.n_bottom_bounces);
  }
  return g;
}

ChannelRealization realize_channel(const EnvironmentConfig& env, std::uint64_t seed) {
  ChannelRealization real;
  real.seed = seed;
  real.macro_paths = trace_macro_paths(env);
  Rng rng = make_rng(seed, Stream::channel);

  const std::size_t n_paths = real.macro_paths.size();
  const auto n_intra = static_cast<std::size_t>(env.n_intrapaths);

  // Geometric intrapath power profile, normalized to unit total power.
  std::vector<double> variance(n_intra);
  double total = 0.0;
  for (std::size_t i = 0; i < n_intra; ++i) {
    variance[i] = std::pow(env.intrapath_gain_decay, static_cast<double>(i));
    total += variance[i];
  }
  for (double& v : variance) v /= total;

  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  // Horizontal drift in a random azimuth per platform; each ray sees the
  // along-range component scaled by cos of its grazing angle.
  const double along = env.tx_drift * std::cos(angle(rng)) + env.rx_drift * std::cos(angle(rng));
  std::vector<double> cos_grazing(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p)
    cos_grazing[p] = std::cos(real.macro_paths[p].grazing_angle);

  // One vehicular speed per realization, truncated so |a_p| stays < 1e-3.
  const double limit = 0.999e-3 * env.c_water;
  double vehicular = 0.0;
  for (;;) {
    vehicular = env.tx_vehicular_sigma * unit_normal(rng) + env.rx_vehicular;
    if (std::abs(along + vehicular) < limit) break;
  }
  real.compensated_doppler = env.doppler_compensation ? vehicular / env.c_water : 0.0;

  real.intrapath_gains.resize(n_paths);
  real.intrapath_delays.resize(n_paths);
  std::exponential_distribution<double> delay_dist(
      env.intrapath_delay_mean > 0.0 ? 1.0 / env.intrapath_delay_mean : 1.0);

  double power = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    MacroPath& path = real.macro_paths[p];
    path.large_scale_gain = path_gain(path, env);
    path.doppler_rate = (along + vehicular) * cos_grazing[p] / env.c_water;
    power += path.large_scale_gain * path.large_scale_gain;

    auto& gains = real.intrapath_gains[p];
    auto& delays = real.intrapath_delays[p];
    gains.resize(n_intra);
    delays.resize(n_intra);
    for (std::size_t i = 0; i < n_intra; ++i) {
      const double sd = std::sqrt(variance[i] / 2.0);
      const double re = sd * unit_normal(rng);
      const double im = sd * unit_normal(rng);
      gains[i] = {re, im};
      delays[i] = env.intrapath_delay_mean > 0.0 ? delay_dist(rng) : 0.0;
    }
  }
  real.nominal_response = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
  return real;
}

CsiMatrix sample_csi(const ChannelRealization& real, std::span<const double> f_grid,
                     std::span<const double> t_grid) {
  if (f_grid.empty() || t_grid.empty()) throw std::invalid_argument("sample_csi: empty grid");
  if (real.intrapath_gains.size() != real.macro_paths.size() ||
      real.intrapath_delays.size() != real.macro_paths.size())
    throw std::invalid_argument("sample_csi: inconsistent realization");

  const std::size_t n_f = f_grid.size();
  const std::size_t n_t = t_grid.size();
  CsiMatrix h(n_f, n_t);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_f); ++si) {
    const auto s = static_cast<std::size_t>(si);
    const double f = f_grid[s];
    auto row = h.row(s);
    for (std::size_t p = 0; p < real.macro_paths.size(); ++p) {
      const MacroPath& path = real.macro_paths[p];
      // sum_i g_i exp(-j 2 pi f dtau_i): time-independent part of the fading
      cplx cluster{0.0, 0.0};
      const auto& gains = real.intrapath_gains[p];
      const auto& delays = real.intrapath_delays[p];
      for (std::size_t i = 0; i < gains.size(); ++i)
        cluster += gains[i] * unit_phasor_cycles(f * delays[i]);
      const cplx base = real.nominal_response * path.large_scale_gain * cluster *
                        unit_phasor_cycles(f * path.delay);
      const double rate = path.doppler_rate - real.compensated_doppler;
      for (std::size_t m = 0; m < n_t; ++m)
        row[m] += base * unit_phasor_cycles(-f * rate * t_grid[m]);
    }
  }
  return h;
}

}  // namespace uwcsr
