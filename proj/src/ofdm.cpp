#include "uwcsr/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "uwcsr/rng.hpp"

namespace uwcsr {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

void OfdmConfig::validate() const {
  if (n_subcarriers < 1) throw std::invalid_argument("ofdm: n_subcarriers must be >= 1");
  if (n_symbols < 2) throw std::invalid_argument("ofdm: n_symbols must be >= 2");
  if (!(carrier > 0.0)) throw std::invalid_argument("ofdm: carrier must be > 0");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("ofdm: bandwidth must be > 0");
  if (bandwidth / 2.0 >= carrier) throw std::invalid_argument("ofdm: bandwidth exceeds 2x carrier");
}

std::vector<double> OfdmConfig::frequency_grid() const {
  std::vector<double> f(n_subcarriers);
  const double df = subcarrier_spacing();
  for (std::size_t s = 0; s < n_subcarriers; ++s)
    f[s] = carrier - bandwidth / 2.0 + static_cast<double>(s) * df;
  return f;
}

std::vector<double> OfdmConfig::time_grid() const {
  std::vector<double> t(n_symbols);
  const double ts = symbol_duration();
  for (std::size_t m = 0; m < n_symbols; ++m) t[m] = static_cast<double>(m) * ts;
  return t;
}

PilotPattern PilotPattern::two_symbol() { return {{3, 11}}; }
PilotPattern PilotPattern::four_symbol() { return {{2, 6, 10, 14}}; }

PilotPattern PilotPattern::with_count(int n_pilots) {
  if (n_pilots == 2) return two_symbol();
  if (n_pilots == 4) return four_symbol();
  throw std::invalid_argument("pilot pattern: only 2 or 4 pilot symbols are defined");
}

bool PilotPattern::is_pilot(std::size_t symbol) const {
  return std::binary_search(symbol_indices.begin(), symbol_indices.end(), symbol);
}

std::vector<std::size_t> PilotPattern::data_symbols(std::size_t n_symbols) const {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < n_symbols; ++m)
    if (!is_pilot(m)) out.push_back(m);
  return out;
}

void PilotPattern::validate(std::size_t n_symbols) const {
  if (symbol_indices.size() < 2) throw std::invalid_argument("pilot pattern: need >= 2 pilots");
  for (std::size_t i = 0; i < symbol_indices.size(); ++i) {
    if (symbol_indices[i] >= n_symbols)
      throw std::invalid_argument("pilot pattern: index outside the frame");
    if (i > 0 && symbol_indices[i] <= symbol_indices[i - 1])
      throw std::invalid_argument("pilot pattern: indices must be strictly increasing");
  }
}

cplx pilot_value() { return {kInvSqrt2, kInvSqrt2}; }

std::vector<cplx> qpsk_modulate(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) throw std::invalid_argument("qpsk_modulate: odd bit count");
  std::vector<cplx> out(bits.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Gray: 00 -> (+,+), 01 -> (-,+), 11 -> (-,-), 10 -> (+,-)
    const double re = bits[2 * i + 1] ? -kInvSqrt2 : kInvSqrt2;
    const double im = bits[2 * i] ? -kInvSqrt2 : kInvSqrt2;
    out[i] = {re, im};
  }
  return out;
}

Bits qpsk_demodulate(std::span<const cplx> symbols) {
  Bits out(symbols.size() * 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    // ties on an axis go to the nonnegative side
    out[2 * i] = symbols[i].imag() < 0.0 ? 1 : 0;
    out[2 * i + 1] = symbols[i].real() < 0.0 ? 1 : 0;
  }
  return out;
}

Bits random_payload(std::size_t n_bits, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::payload);
  Bits bits(n_bits);
  for (std::size_t i = 0; i < n_bits; i += 64) {
    std::uint64_t word = rng();
    for (std::size_t b = 0; b < 64 && i + b < n_bits; ++b) bits[i + b] = (word >> b) & 1U;
  }
  return bits;
}

std::size_t payload_bit_count(const OfdmConfig& cfg, const PilotPattern& pattern) {
  return 2 * cfg.n_subcarriers * (cfg.n_symbols - pattern.count());
}

OfdmFrameGrid build_frame(const OfdmConfig& cfg, const PilotPattern& pattern, Bits payload_bits) {
  cfg.validate();
  pattern.validate(cfg.n_symbols);
  if (payload_bits.size() != payload_bit_count(cfg, pattern))
    throw std::invalid_argument("build_frame: payload bit count does not match the frame");

  OfdmFrameGrid frame;
  frame.pattern = pattern;
  frame.tx_symbols = ComplexGrid(cfg.n_subcarriers, cfg.n_symbols);
  frame.pilot_mask = MaskGrid(cfg.n_subcarriers, cfg.n_symbols, 0);

  const auto data = qpsk_modulate(payload_bits);
  std::size_t k = 0;
  for (std::size_t m = 0; m < cfg.n_symbols; ++m) {
    const bool pilot = pattern.is_pilot(m);
    for (std::size_t s = 0; s < cfg.n_subcarriers; ++s) {
      if (pilot) {
        frame.tx_symbols(s, m) = pilot_value();
        frame.pilot_mask(s, m) = 1;
      } else {
        frame.tx_symbols(s, m) = data[k++];
      }
    }
  }
  frame.payload_bits = std::move(payload_bits);
  frame.rx_symbols = frame.tx_symbols;
  return frame;
}

ComplexGrid apply_channel(const OfdmFrameGrid& frame, const CsiMatrix& h, double snr_db,
                          std::uint64_t seed) {
  require_same_shape(frame.tx_symbols, h, "apply_channel");
  ComplexGrid y(h.rows(), h.cols());
  double power = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y.values()[i] = h.values()[i] * frame.tx_symbols.values()[i];
    power += std::norm(y.values()[i]);
  }
  if (std::isinf(snr_db) && snr_db > 0.0) return y;

  power /= static_cast<double>(y.size());
  const double noise_var = power / std::pow(10.0, snr_db / 10.0);
  const double sd = std::sqrt(noise_var / 2.0);
  Rng rng = make_rng(seed, Stream::noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : y.values()) {
    const double re = normal(rng);
    const double im = normal(rng);
    v += cplx(sd * re, sd * im);
  }
  return y;
}

Equalized equalize(const ComplexGrid& y, const CsiMatrix& h_est) {
  require_same_shape(y, h_est, "equalize");
  Equalized out{ComplexGrid(y.rows(), y.cols()), MaskGrid(y.rows(), y.cols(), 0), 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const cplx h = h_est.values()[i];
    if (std::abs(h) < kEqualizerFloor) {
      out.symbols.values()[i] = y.values()[i];
      out.degenerate.values()[i] = 1;
      ++out.n_degenerate;
    } else {
      out.symbols.values()[i] = y.values()[i] / h;
    }
  }
  return out;
}

std::vector<cplx> extract_data(const ComplexGrid& grid, const PilotPattern& pattern) {
  std::vector<cplx> out;
  out.reserve(grid.rows() * (grid.cols() - pattern.count()));
  for (std::size_t m = 0; m < grid.cols(); ++m) {
    if (pattern.is_pilot(m)) continue;
    for (std::size_t s = 0; s < grid.rows(); ++s) out.push_back(grid(s, m));
  }
  return out;
}

double compute_ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received) {
  if (sent.size() != received.size()) throw std::invalid_argument("compute_ber: length mismatch");
  if (sent.empty()) return 0.0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < sent.size(); ++i) errors += (sent[i] != 0) != (received[i] != 0);
  return static_cast<double>(errors) / static_cast<double>(sent.size());
}

}  // namespace uwcsr
