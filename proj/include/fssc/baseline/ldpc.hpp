#pragma once

#include <cstdint>
#include <vector>

#include "fssc/tensor.hpp"

namespace fssc::baseline {

using Bits = std::vector<std::uint8_t>;

struct LdpcDecodeResult {
  Bits message;
  Bits codeword;
  bool success = false;  // zero syndrome reached
  int iterations = 0;
};

/// Binary LDPC code given by a sparse parity-check matrix H (m x n).
/// Encoding is systematic: the message occupies the non-pivot columns found
/// by GF(2) elimination of H.
class LdpcCode {
 public:
  /// Regular code with the given column and row weights (n * col_weight
  /// must be divisible by row_weight). Rows are filled greedily at random,
  /// avoiding 4-cycles where possible. If H is rank deficient the
  /// construction is repeated with seed + 1, seed + 2, ...
  static LdpcCode regular(Index n, Index col_weight, Index row_weight, std::uint64_t seed);

  /// Code from explicit check rows (column indices of the ones per row).
  /// Throws ConfigError unless H has full row rank.
  static LdpcCode from_checks(Index n, std::vector<std::vector<Index>> checks);

  Index n() const { return n_; }
  Index m() const { return static_cast<Index>(checks_.size()); }
  Index k() const { return n_ - m(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::vector<Index>>& checks() const { return checks_; }
  const std::vector<Index>& message_positions() const { return info_; }
  /// Number of 4-cycles (pairs of columns sharing two checks).
  Index four_cycles() const;

  Bits encode(const Bits& message) const;
  bool is_codeword(const Bits& word) const;
  /// Generator matrix rows (k x n), one codeword per unit message.
  std::vector<Bits> generator() const;

  /// Sum-product decoding of LLRs log P(0)/P(1); stops when the syndrome
  /// is zero or after max_iters iterations.
  LdpcDecodeResult decode(const std::vector<double>& llr, int max_iters = 50) const;

 private:
  LdpcCode() = default;
  /// Returns false if H is rank deficient.
  bool build_encoder();

  Index n_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<Index>> checks_;
  std::vector<Index> info_;    // message positions, ascending
  std::vector<Index> pivots_;  // pivot column of each reduced row
  /// parity_[r] holds, for pivot row r, the message positions (indices into
  /// info_) whose sum gives the pivot bit, packed as 64-bit words.
  std::vector<std::vector<std::uint64_t>> parity_;
};

}  // namespace fssc::baseline
