#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "uwcsr/grid.hpp"

namespace uwcsr {

using Bits = std::vector<std::uint8_t>;

enum class Modulation { qpsk };

struct OfdmConfig {
  std::size_t n_subcarriers = 512;
  std::size_t n_symbols = 16;
  double carrier = 16000.0;    // Hz
  double bandwidth = 4000.0;   // Hz
  Modulation modulation = Modulation::qpsk;

  double subcarrier_spacing() const { return bandwidth / static_cast<double>(n_subcarriers); }
  double symbol_duration() const { return 1.0 / subcarrier_spacing(); }

  void validate() const;

  // Absolute subcarrier frequencies, carrier-centred: fc - B/2 + s * df.
  std::vector<double> frequency_grid() const;
  // Symbol start times m * T.
  std::vector<double> time_grid() const;
};

struct PilotPattern {
  std::vector<std::size_t> symbol_indices;  // 0-based, strictly increasing

  // Columns {3, 11} and {2, 6, 10, 14} of a 16-symbol frame.
  static PilotPattern two_symbol();
  static PilotPattern four_symbol();
  static PilotPattern with_count(int n_pilots);

  std::size_t count() const { return symbol_indices.size(); }
  bool is_pilot(std::size_t symbol) const;
  std::vector<std::size_t> data_symbols(std::size_t n_symbols) const;
  void validate(std::size_t n_symbols) const;
};

// Every pilot cell carries the QPSK point for bits "00".
cplx pilot_value();

struct OfdmFrameGrid {
  ComplexGrid tx_symbols;
  ComplexGrid rx_symbols;
  MaskGrid pilot_mask;
  Bits payload_bits;
  PilotPattern pattern;
};

Bits qpsk_demodulate(std::span<const cplx> symbols);
std::vector<cplx> qpsk_modulate(std::span<const std::uint8_t> bits);

Bits random_payload(std::size_t n_bits, std::uint64_t seed);

std::size_t payload_bit_count(const OfdmConfig& cfg, const PilotPattern& pattern);

OfdmFrameGrid build_frame(const OfdmConfig& cfg, const PilotPattern& pattern, Bits payload_bits);

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

// Y = H o X + N with noise power set from the mean received signal power.
// snr_db = kNoiseless disables the noise.
ComplexGrid apply_channel(const OfdmFrameGrid& frame, const CsiMatrix& h, double snr_db,
                          std::uint64_t seed);

struct Equalized {
  ComplexGrid symbols;
  MaskGrid degenerate;  // 1 where |H_est| < kEqualizerFloor
  std::size_t n_degenerate = 0;
};

inline constexpr double kEqualizerFloor = 1e-9;

// Zero-forcing: X = Y / H_est. Degenerate cells pass Y through unchanged.
Equalized equalize(const ComplexGrid& y, const CsiMatrix& h_est);

// Data cells in payload order (column-major over non-pilot symbols).
std::vector<cplx> extract_data(const ComplexGrid& grid, const PilotPattern& pattern);

double compute_ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received);

}  // namespace uwcsr
