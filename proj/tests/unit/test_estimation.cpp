#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "uwcsr/baselines.hpp"
#include "uwcsr/channel_model.hpp"
#include "uwcsr/estimation.hpp"
#include "uwcsr/ofdm.hpp"

using namespace uwcsr;
using Catch::Matchers::WithinAbs;

namespace {

// Natural cubic spline by a dense solve of the full 4(n-1) coefficient system.
double spline_oracle(const std::vector<double>& x, const std::vector<double>& y, double t) {
  const int n = static_cast<int>(x.size()) - 1;  // segments
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(4 * n);
  int row = 0;
  // segment i: a + b u + c u^2 + d u^3 with u = t - x_i
  for (int i = 0; i < n; ++i) {
    const double h = x[i + 1] - x[i];
    A(row, 4 * i) = 1;
    b(row++) = y[i];
    A(row, 4 * i) = 1;
    A(row, 4 * i + 1) = h;
    A(row, 4 * i + 2) = h * h;
    A(row, 4 * i + 3) = h * h * h;
    b(row++) = y[i + 1];
  }
  for (int i = 0; i + 1 < n; ++i) {
    const double h = x[i + 1] - x[i];
    A(row, 4 * i + 1) = 1;
    A(row, 4 * i + 2) = 2 * h;
    A(row, 4 * i + 3) = 3 * h * h;
    A(row++, 4 * (i + 1) + 1) = -1;
    A(row, 4 * i + 2) = 2;
    A(row, 4 * i + 3) = 6 * h;
    A(row++, 4 * (i + 1) + 2) = -2;
  }
  A(row++, 2) = 2;
  const double hl = x[n] - x[n - 1];
  A(row, 4 * (n - 1) + 2) = 2;
  A(row++, 4 * (n - 1) + 3) = 6 * hl;
  const Eigen::VectorXd c = A.fullPivLu().solve(b);
  int seg = 0;
  while (seg + 1 < n && t > x[seg + 1]) ++seg;
  const double u = t - x[seg];
  return c(4 * seg) + c(4 * seg + 1) * u + c(4 * seg + 2) * u * u + c(4 * seg + 3) * u * u * u;
}

}  // namespace

TEST_CASE("least squares at pilots") {
  ComplexGrid y(1, 1, cplx(2, 2)), x(1, 1, cplx(1, 1));
  CHECK(ls_estimate(y, x)(0, 0) == cplx(2, 0));
  ComplexGrid same(3, 2, cplx(0.3, -0.4));
  const auto unit = ls_estimate(same, same);
  for (auto v : unit.values()) CHECK(v == cplx(1, 0));
  ComplexGrid zero(1, 1);
  CHECK_THROWS_AS(ls_estimate(y, zero), std::invalid_argument);
  CHECK_THROWS_AS(ls_estimate(y, ComplexGrid(2, 1, cplx(1, 0))), std::invalid_argument);
}

TEST_CASE("interpolation reproduces linear and constant rows") {
  for (auto pattern : {PilotPattern::two_symbol(), PilotPattern::four_symbol()}) {
    ComplexGrid lin(2, pattern.count()), cst(2, pattern.count(), cplx(0.25, -1.5));
    for (std::size_t p = 0; p < pattern.count(); ++p) {
      const double m = static_cast<double>(pattern.symbol_indices[p]);
      lin(0, p) = cplx(1.0 + 0.5 * m, -2.0 + 0.25 * m);
      lin(1, p) = cplx(-3.0 * m, 7.0);
    }
    for (auto kind : {InterpolationKind::linear, InterpolationKind::spline, InterpolationKind::automatic}) {
      if (kind == InterpolationKind::spline && pattern.count() < 2) continue;
      const auto full = interpolate_time(lin, pattern.symbol_indices, 16, kind);
      for (std::size_t m = 0; m < 16; ++m) {
        const double t = static_cast<double>(m);
        CHECK_THAT(std::abs(full(0, m) - cplx(1.0 + 0.5 * t, -2.0 + 0.25 * t)), WithinAbs(0.0, 1e-12));
        CHECK_THAT(std::abs(full(1, m) - cplx(-3.0 * t, 7.0)), WithinAbs(0.0, 1e-12));
      }
      const CsiMatrix flat = interpolate_time(cst, pattern.symbol_indices, 16, kind);
      for (auto v : flat.values()) CHECK_THAT(std::abs(v - cplx(0.25, -1.5)), WithinAbs(0.0, 1e-15));
    }
  }
}

TEST_CASE("natural spline against a dense solve") {
  const std::vector<std::size_t> idx{2, 6, 10, 14};
  const std::vector<double> x{2, 6, 10, 14};
  auto cubic = [](double t) { return 0.01 * t * t * t - 0.2 * t * t + t - 3; };
  std::vector<double> y;
  ComplexGrid pilots(1, 4);
  for (std::size_t p = 0; p < 4; ++p) {
    y.push_back(cubic(x[p]));
    pilots(0, p) = cplx(y.back(), -y.back());
  }
  const auto full = interpolate_time(pilots, idx, 16);
  double interior_error = 0.0;
  for (std::size_t m = 2; m <= 14; ++m) {
    const double t = static_cast<double>(m);
    CHECK_THAT(full(0, m).real(), WithinAbs(spline_oracle(x, y, t), 1e-12));
    CHECK_THAT(full(0, m).imag(), WithinAbs(-spline_oracle(x, y, t), 1e-12));
    interior_error = std::max(interior_error, std::abs(full(0, m).real() - cubic(t)));
  }
  CHECK(interior_error > 0.0);
  CHECK(interior_error < 1.0);
  // knots are hit exactly
  for (std::size_t p = 0; p < 4; ++p) CHECK(full(0, idx[p]) == pilots(0, p));
}

TEST_CASE("spline oracle agreement on random knots") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{0}, y;
    for (int i = 0; i < 5; ++i) x.push_back(x.back() + 0.5 + std::abs(n01(rng)));
    for (std::size_t i = 0; i < x.size(); ++i) y.push_back(n01(rng));
    NaturalSpline s(x, y);
    for (double t = x.front(); t <= x.back(); t += 0.137) CHECK_THAT(s(t), WithinAbs(spline_oracle(x, y, t), 1e-10));
  }
}

TEST_CASE("interpolation input checks") {
  ComplexGrid one(1, 1);
  const std::vector<std::size_t> idx{3};
  CHECK_THROWS_AS(interpolate_time(one, idx, 16), std::invalid_argument);
  ComplexGrid two(1, 2);
  const std::vector<std::size_t> outside{3, 20};
  CHECK_THROWS_AS(interpolate_time(two, outside, 16), std::invalid_argument);
}

TEST_CASE("two-channel transform") {
  CsiMatrix h(1, 1, cplx(1, 2));
  const auto t = to_two_channel(h);
  CHECK(t(0, 0, 0) == 1.0);
  CHECK(t(1, 0, 0) == 2.0);
  CsiMatrix real(2, 3, cplx(4, 0));
  const auto real_planes = to_two_channel(real);
  for (double v : real_planes.plane(1)) CHECK(v == 0.0);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  CsiMatrix r(5, 7);
  for (auto& v : r.values()) v = cplx(n01(rng), n01(rng));
  CHECK(from_two_channel(to_two_channel(r)) == r);
  double eh = 0.0, et = 0.0;
  for (auto v : r.values()) eh += std::norm(v);
  const auto planes = to_two_channel(r);
  for (double v : planes.values()) et += v * v;
  CHECK_THAT(eh, WithinAbs(et, 1e-12));
  CHECK_THROWS_AS(from_two_channel(Tensor3(3, 2, 2)), std::invalid_argument);
}

TEST_CASE("scaling") {
  Tensor3 t(2, 1, 1);
  t(0, 0, 0) = 0.01;
  CHECK_THAT(scale(t, 10)(0, 0, 0), WithinAbs(0.1, 1e-17));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  Tensor3 r(2, 4, 4);
  for (double& v : r.values()) v = n01(rng);
  const auto back = unscale(scale(r, 10.0), 10.0);
  for (std::size_t k = 0; k < r.values().size(); ++k) CHECK_THAT(back.values()[k], WithinAbs(r.values()[k], 1e-15));
  CHECK(scale(r, 1.0) == r);
  CHECK_THROWS_AS(scale(r, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(unscale(r, -1.0), std::invalid_argument);

  // scaling commutes with the two-channel transform
  CsiMatrix h(3, 3, cplx(0.2, -0.7));
  const auto a = scale(to_two_channel(h), 10.0);
  CsiMatrix h10 = h;
  for (auto& v : h10.values()) v *= 10.0;
  CHECK(a == to_two_channel(h10));
}

TEST_CASE("raw estimate pipeline") {
  OfdmConfig cfg;
  cfg.n_subcarriers = 16;
  SECTION("time-constant channel") {
    CsiMatrix h(16, 16);
    for (std::size_t s = 0; s < 16; ++s)
      for (std::size_t m = 0; m < 16; ++m) h(s, m) = std::polar(0.5 + 0.01 * s, 0.3 * s);
    for (auto pattern : {PilotPattern::two_symbol(), PilotPattern::four_symbol()}) {
      auto frame = build_frame(cfg, pattern, random_payload(payload_bit_count(cfg, pattern), 1));
      frame.rx_symbols = apply_channel(frame, h, kNoiseless, 1);
      const auto out = raw_estimate_pipeline(frame, 10.0);
      const auto expect = scale(to_two_channel(h), 10.0);
      for (std::size_t k = 0; k < out.values().size(); ++k)
        CHECK_THAT(out.values()[k], WithinAbs(expect.values()[k], 1e-14));
      CHECK(ls_baseline(frame) == raw_csi_estimate(frame));
    }
  }
  SECTION("time-linear channel, 2 pilots") {
    CsiMatrix h(16, 16);
    for (std::size_t s = 0; s < 16; ++s)
      for (std::size_t m = 0; m < 16; ++m) h(s, m) = cplx(0.1 * s, 1.0) + cplx(0.02, -0.01 * s) * double(m);
    auto pattern = PilotPattern::two_symbol();
    auto frame = build_frame(cfg, pattern, random_payload(payload_bit_count(cfg, pattern), 2));
    frame.rx_symbols = apply_channel(frame, h, kNoiseless, 2);
    const auto est = raw_csi_estimate(frame);
    for (std::size_t k = 0; k < h.size(); ++k)
      CHECK(std::abs(est.values()[k] - h.values()[k]) <= 1e-12 * std::max(1.0, std::abs(h.values()[k])));
  }
  SECTION("noisy pilots: error at pilot columns is the LS error") {
    const auto h = sample_csi(realize_channel(EnvironmentConfig{}, 3), cfg.frequency_grid(), cfg.time_grid());
    auto pattern = PilotPattern::four_symbol();
    auto frame = build_frame(cfg, pattern, random_payload(payload_bit_count(cfg, pattern), 3));
    frame.rx_symbols = apply_channel(frame, h, 5.0, 3);
    const auto est = raw_csi_estimate(frame);
    const auto ls = ls_estimate(pilot_columns(frame.rx_symbols, pattern), pilot_columns(frame.tx_symbols, pattern));
    for (std::size_t s = 0; s < 16; ++s)
      for (std::size_t p = 0; p < 4; ++p) CHECK(est(s, pattern.symbol_indices[p]) == ls(s, p));
  }
}
