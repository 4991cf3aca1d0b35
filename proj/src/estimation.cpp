#include "uwcsr/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uwcsr {

NaturalSpline::NaturalSpline(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), m_(x.size(), 0.0) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw std::invalid_argument("NaturalSpline: need >= 2 matching knots");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("NaturalSpline: knots must increase");
  if (n == 2) return;

  // Tridiagonal system for the interior second derivatives (Thomas algorithm).
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double h0 = x_[i + 1] - x_[i];
    const double h1 = x_[i + 2] - x_[i + 1];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = x_[i + 1] - x_[i];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
}

double NaturalSpline::operator()(double t) const {
  // Outside the knots the spline continues along its end tangent (zero
  // curvature at a natural boundary).
  const std::size_t n = x_.size();
  if (t <= x_.front()) {
    const double h = x_[1] - x_[0];
    const double slope = (y_[1] - y_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
    return y_[0] + slope * (t - x_[0]);
  }
  if (t >= x_.back()) {
    const double h = x_[n - 1] - x_[n - 2];
    const double slope = (y_[n - 1] - y_[n - 2]) / h + h * (2.0 * m_[n - 1] + m_[n - 2]) / 6.0;
    return y_[n - 1] + slope * (t - x_[n - 1]);
  }
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - t) / h;
  const double b = (t - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double linear_interpolate(std::span<const double> x, std::span<const double> y, double t) {
  if (x.size() < 2 || y.size() != x.size())
    throw std::invalid_argument("linear_interpolate: need >= 2 matching knots");
  // end segments extend linearly beyond the outer knots
  std::size_t i = 0;
  if (t >= x.back()) {
    i = x.size() - 2;
  } else if (t > x.front()) {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    i = static_cast<std::size_t>(it - x.begin()) - 1;
  }
  const double w = (t - x[i]) / (x[i + 1] - x[i]);
  return (1.0 - w) * y[i] + w * y[i + 1];
}

ComplexGrid ls_estimate(const ComplexGrid& y_pilot, const ComplexGrid& x_pilot) {
  require_same_shape(y_pilot, x_pilot, "ls_estimate");
  ComplexGrid h(y_pilot.rows(), y_pilot.cols());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const cplx x = x_pilot.values()[i];
    if (x == cplx{0.0, 0.0}) throw std::invalid_argument("ls_estimate: zero pilot value");
    h.values()[i] = y_pilot.values()[i] / x;
  }
  return h;
}

CsiMatrix interpolate_time(const ComplexGrid& pilot_estimates,
                           std::span<const std::size_t> pilot_indices, std::size_t n_symbols,
                           InterpolationKind kind) {
  const std::size_t n_pilots = pilot_indices.size();
  if (n_pilots < 2) throw std::invalid_argument("interpolate_time: need >= 2 pilot symbols");
  if (pilot_estimates.cols() != n_pilots)
    throw DimensionMismatch("interpolate_time: pilot column count mismatch");
  for (std::size_t i = 0; i < n_pilots; ++i) {
    if (pilot_indices[i] >= n_symbols)
      throw std::invalid_argument("interpolate_time: pilot index outside the frame");
    if (i > 0 && pilot_indices[i] <= pilot_indices[i - 1])
      throw std::invalid_argument("interpolate_time: pilot indices must increase");
  }
  if (kind == InterpolationKind::automatic)
    kind = n_pilots >= 4 ? InterpolationKind::spline : InterpolationKind::linear;

  std::vector<double> knots(n_pilots);
  for (std::size_t i = 0; i < n_pilots; ++i) knots[i] = static_cast<double>(pilot_indices[i]);

  const std::size_t n_rows = pilot_estimates.rows();
  CsiMatrix out(n_rows, n_symbols);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n_rows); ++si) {
    const auto s = static_cast<std::size_t>(si);
    std::vector<double> re(n_pilots), im(n_pilots);
    for (std::size_t p = 0; p < n_pilots; ++p) {
      re[p] = pilot_estimates(s, p).real();
      im[p] = pilot_estimates(s, p).imag();
    }
    if (kind == InterpolationKind::spline) {
      const NaturalSpline sre(knots, re);
      const NaturalSpline sim(knots, im);
      for (std::size_t m = 0; m < n_symbols; ++m) {
        const auto t = static_cast<double>(m);
        out(s, m) = {sre(t), sim(t)};
      }
    } else {
      for (std::size_t m = 0; m < n_symbols; ++m) {
        const auto t = static_cast<double>(m);
        out(s, m) = {linear_interpolate(knots, re, t), linear_interpolate(knots, im, t)};
      }
    }
    // knots are reproduced bit-exactly
    for (std::size_t p = 0; p < n_pilots; ++p) out(s, pilot_indices[p]) = pilot_estimates(s, p);
  }
  return out;
}

TwoChannelCsi to_two_channel(const CsiMatrix& h) {
  TwoChannelCsi t(2, h.rows(), h.cols());
  auto re = t.plane(0);
  auto im = t.plane(1);
  for (std::size_t i = 0; i < h.size(); ++i) {
    re[i] = h.values()[i].real();
    im[i] = h.values()[i].imag();
  }
  return t;
}

CsiMatrix from_two_channel(const TwoChannelCsi& t) {
  if (t.channels() != 2) throw DimensionMismatch("from_two_channel: expected 2 channels");
  CsiMatrix h(t.rows(), t.cols());
  const auto re = t.plane(0);
  const auto im = t.plane(1);
  for (std::size_t i = 0; i < h.size(); ++i) h.values()[i] = {re[i], im[i]};
  return h;
}

TwoChannelCsi scale(const TwoChannelCsi& t, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scale: factor must be > 0");
  TwoChannelCsi out = t;
  for (double& v : out.values()) v *= factor;
  return out;
}

TwoChannelCsi unscale(const TwoChannelCsi& t, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("unscale: factor must be > 0");
  TwoChannelCsi out = t;
  for (double& v : out.values()) v /= factor;
  return out;
}

ComplexGrid pilot_columns(const ComplexGrid& grid, const PilotPattern& pattern) {
  ComplexGrid out(grid.rows(), pattern.count());
  for (std::size_t s = 0; s < grid.rows(); ++s)
    for (std::size_t p = 0; p < pattern.count(); ++p) out(s, p) = grid(s, pattern.symbol_indices[p]);
  return out;
}

CsiMatrix raw_csi_estimate(const OfdmFrameGrid& frame) {
  if (frame.rx_symbols.empty()) throw std::invalid_argument("raw estimate: frame has no received grid");
  const auto h_pilot = ls_estimate(pilot_columns(frame.rx_symbols, frame.pattern),
                                   pilot_columns(frame.tx_symbols, frame.pattern));
  return interpolate_time(h_pilot, frame.pattern.symbol_indices, frame.rx_symbols.cols());
}

TwoChannelCsi raw_estimate_pipeline(const OfdmFrameGrid& frame, double factor) {
  return scale(to_two_channel(raw_csi_estimate(frame)), factor);
}

}  // namespace uwcsr
