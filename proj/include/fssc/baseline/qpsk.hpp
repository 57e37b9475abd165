#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "fssc/rng.hpp"

namespace fssc::baseline {

using Symbols = std::vector<std::complex<double>>;

/// Gray-mapped QPSK with unit average energy: bits (b0, b1) map to
/// ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
struct QpskFrame {
  Symbols symbols;
  bool padded = false;  // a zero bit was appended to an odd-length input
};

QpskFrame qpsk_modulate(const std::vector<std::uint8_t>& bits);

/// Exact per-bit LLRs log P(0)/P(1) for complex noise of total variance
/// noise_var (noise_var / 2 per dimension): 2*sqrt(2)*Re(y)/noise_var and
/// 2*sqrt(2)*Im(y)/noise_var.
std::vector<double> qpsk_demodulate_soft(const Symbols& received, double noise_var);

/// Sign decisions; a padding bit is dropped.
std::vector<std::uint8_t> qpsk_demodulate_hard(const Symbols& received, bool padded = false);

/// Adds circular complex Gaussian noise with variance 10^(-snr_db/10) for
/// unit symbol energy.
Symbols awgn_complex(const Symbols& symbols, double snr_db, Rng& rng);

}  // namespace fssc::baseline
