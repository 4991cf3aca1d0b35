#pragma once

// Statistical underwater acoustic channel: image-method macro paths with
// spreading/absorption loss and boundary reflections, each carrying a cluster
// of scattered intrapaths and a Doppler rate.

#include <cstdint>
#include <span>
#include <vector>

#include "uwcsr/grid.hpp"

namespace uwcsr {

struct EnvironmentConfig {
  double water_depth = 100.0;    // m
  double tx_depth = 20.0;        // m
  double rx_depth = 50.0;        // m
  double range = 1000.0;         // m
  double spreading_factor = 1.7;
  double c_water = 1500.0;       // m/s
  double c_bottom = 1200.0;      // m/s
  double bottom_density_ratio = 1.5;
  int n_intrapaths = 20;
  double tx_drift = 0.1;         // m/s
  double rx_drift = 0.02;        // m/s
  double tx_vehicular_sigma = 1.0;  // m/s, std-dev of the Gaussian speed
  double rx_vehicular = 0.0;     // m/s
  int n_macro_paths = 8;
  double intrapath_delay_mean = 1e-3;  // s
  double intrapath_gain_decay = 0.7;
  double absorption_frequency_khz = 16.0;  // frequency at which h_p is evaluated
  // Receiver front end resamples out the common vehicular Doppler; only the
  // per-path drift component remains in the sampled response.
  bool doppler_compensation = true;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Eigenray geometry of one macro path.
struct MacroPath {
  double length = 0.0;        // m
  double delay = 0.0;         // s, length / c_water
  int n_surface_bounces = 0;
  int n_bottom_bounces = 0;
  double grazing_angle = 0.0;  // rad, angle of the ray against the horizontal
  double large_scale_gain = 0.0;  // h_p including reflection signs
  double doppler_rate = 0.0;      // a_p = v / c

  friend bool operator==(const MacroPath&, const MacroPath&) = default;
};

struct ChannelRealization {
  std::vector<MacroPath> macro_paths;
  std::vector<std::vector<cplx>> intrapath_gains;     // [path][intrapath]
  std::vector<std::vector<double>> intrapath_delays;  // [path][intrapath], s
  double nominal_response = 1.0;                      // H0
  double compensated_doppler = 0.0;  // rate removed by the receiver front end
  std::uint64_t seed = 0;

  friend bool operator==(const ChannelRealization&, const ChannelRealization&) = default;
};

// Shortest n_macro_paths eigenrays by the image method, sorted by length.
// Gains and Doppler are left at zero; realize_channel fills them in.
std::vector<MacroPath> trace_macro_paths(const EnvironmentConfig& env);

// Thorp absorption in dB/km, f in kHz.
double thorp_absorption(double f_khz);

enum class Absorption { enabled, disabled };

// 1 / sqrt(l^k * a(f)^l): spreading with l in meters, absorption with l in km.
double large_scale_gain(double length_m, double f_khz, double k,
                        Absorption absorption = Absorption::enabled);

// Rayleigh two-fluid reflection coefficient at the given grazing angle.
// Beyond the critical angle the reflection is total and 1 is returned.
double bottom_reflection_coefficient(double grazing_angle, double c_water, double c_bottom,
                                     double density_ratio);

// h_p of a traced path: spreading/absorption times (-1)^surface * R_b^bottom.
double path_gain(const MacroPath& path, const EnvironmentConfig& env);

ChannelRealization realize_channel(const EnvironmentConfig& env, std::uint64_t seed);

// H[s, m] = H0 sum_p h_p g_p(f_s, t_m) exp(-j 2 pi f_s tau_p).
CsiMatrix sample_csi(const ChannelRealization& real, std::span<const double> f_grid,
                     std::span<const double> t_grid);

}  // namespace uwcsr
