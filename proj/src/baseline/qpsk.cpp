#include "fssc/baseline/qpsk.hpp"

#include <cmath>
#include <numbers>

#include "fssc/channel.hpp"

namespace fssc::baseline {

QpskFrame qpsk_modulate(const std::vector<std::uint8_t>& bits) {
  QpskFrame f;
  f.padded = bits.size() % 2 != 0;
  const std::size_t n = (bits.size() + 1) / 2;
  f.symbols.reserve(n);
  const double a = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < n; ++i) {
    const int b0 = bits[2 * i] & 1;
    const int b1 = 2 * i + 1 < bits.size() ? bits[2 * i + 1] & 1 : 0;
    f.symbols.emplace_back(a * (1 - 2 * b0), a * (1 - 2 * b1));
  }
  return f;
}

std::vector<double> qpsk_demodulate_soft(const Symbols& received, double noise_var) {
  std::vector<double> llr;
  llr.reserve(2 * received.size());
  const double scale = 2.0 * std::numbers::sqrt2 / noise_var;
  for (const auto& y : received) {
    llr.push_back(scale * y.real());
    llr.push_back(scale * y.imag());
  }
  return llr;
}

std::vector<std::uint8_t> qpsk_demodulate_hard(const Symbols& received, bool padded) {
  std::vector<std::uint8_t> bits;
  bits.reserve(2 * received.size());
  for (const auto& y : received) {
    bits.push_back(y.real() < 0.0);
    bits.push_back(y.imag() < 0.0);
  }
  if (padded && !bits.empty()) bits.pop_back();
  return bits;
}

Symbols awgn_complex(const Symbols& symbols, double snr_db, Rng& rng) {
  const double sd = std::sqrt(noise_variance(snr_db) / 2.0);
  Symbols out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) {
    const double re = rng.normal(), im = rng.normal();
    out.emplace_back(s.real() + sd * re, s.imag() + sd * im);
  }
  return out;
}

}  // namespace fssc::baseline
