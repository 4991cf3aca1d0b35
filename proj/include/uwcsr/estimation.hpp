#pragma once

// Classical front end: LS at pilot columns, per-subcarrier interpolation
// along time, complex <-> two-channel conversion and scaling.

#include <span>
#include <vector>

#include "uwcsr/grid.hpp"
#include "uwcsr/ofdm.hpp"

namespace uwcsr {

inline constexpr double kDefaultScalingFactor = 10.0;

// Natural cubic spline through (x_i, y_i), x strictly increasing, >= 2 knots.
// Evaluation outside [x_0, x_n] follows the end tangent.
class NaturalSpline {
 public:
  NaturalSpline(std::span<const double> x, std::span<const double> y);
  double operator()(double t) const;

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives at the knots
};

// Piecewise-linear through the knots; the end segments extend outward.
double linear_interpolate(std::span<const double> x, std::span<const double> y, double t);

// H_p = Y_p / X_p element-wise; a zero pilot is rejected.
ComplexGrid ls_estimate(const ComplexGrid& y_pilot, const ComplexGrid& x_pilot);

enum class InterpolationKind { automatic, linear, spline };

// Interpolates S x P pilot estimates to S x M along the symbol axis, real and
// imaginary parts separately. automatic selects spline for P >= 4 and linear
// otherwise.
CsiMatrix interpolate_time(const ComplexGrid& pilot_estimates,
                           std::span<const std::size_t> pilot_indices, std::size_t n_symbols,
                           InterpolationKind kind = InterpolationKind::automatic);

TwoChannelCsi to_two_channel(const CsiMatrix& h);
CsiMatrix from_two_channel(const TwoChannelCsi& t);

TwoChannelCsi scale(const TwoChannelCsi& t, double factor);
TwoChannelCsi unscale(const TwoChannelCsi& t, double factor);

// Pilot columns of a grid, S x P.
ComplexGrid pilot_columns(const ComplexGrid& grid, const PilotPattern& pattern);

// LS + interpolation only, complex form.
CsiMatrix raw_csi_estimate(const OfdmFrameGrid& frame);

// ls_estimate -> interpolate_time -> to_two_channel -> scale.
TwoChannelCsi raw_estimate_pipeline(const OfdmFrameGrid& frame, double factor);

}  // namespace uwcsr
