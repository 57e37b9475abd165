#pragma once

#include <cstdint>
#include <vector>

#include "fssc/errors.hpp"

namespace fssc::baseline {

/// MSB-first bit packer with Exp-Golomb helpers.
class BitWriter {
 public:
  void put(bool bit) {
    if (count_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (count_ % 8));
    ++count_;
  }
  void put_bits(std::uint32_t value, int n) {
    for (int i = n - 1; i >= 0; --i) put(((value >> i) & 1u) != 0);
  }
  /// Unsigned Exp-Golomb.
  void put_ue(std::uint32_t v) {
    const std::uint64_t x = std::uint64_t{v} + 1;
    int len = 0;
    while ((x >> (len + 1)) != 0) ++len;
    for (int i = 0; i < len; ++i) put(false);
    for (int i = len; i >= 0; --i) put(((x >> i) & 1u) != 0);
  }
  /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ... map to 0, 1, 2, 3, 4, ...
  void put_se(std::int32_t v) {
    put_ue(v > 0 ? static_cast<std::uint32_t>(2 * std::int64_t{v} - 1)
                 : static_cast<std::uint32_t>(-2 * std::int64_t{v}));
  }

  std::uint64_t bit_count() const { return count_; }
  /// Zero bits appended to fill the last byte.
  int padding_bits() const { return static_cast<int>((8 - count_ % 8) % 8); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t count_ = 0;
};

/// Reads at most `limit_bits` bits; running past the limit is a ParseError.
class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::uint64_t limit_bits) : data_(data), limit_(limit_bits) {}

  bool get() {
    if (pos_ >= limit_) throw ParseError("bitstream: read past end of payload");
    const bool bit = ((data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u) != 0;
    ++pos_;
    return bit;
  }
  std::uint32_t get_bits(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | (get() ? 1u : 0u);
    return v;
  }
  std::uint32_t get_ue() {
    int zeros = 0;
    while (!get()) {
      if (++zeros > 31) throw ParseError("bitstream: Exp-Golomb prefix too long");
    }
    std::uint64_t x = 1;
    for (int i = 0; i < zeros; ++i) x = (x << 1) | (get() ? 1u : 0u);
    return static_cast<std::uint32_t>(x - 1);
  }
  std::int32_t get_se() {
    const std::uint32_t u = get_ue();
    return (u & 1u) ? static_cast<std::int32_t>((u + 1) / 2) : -static_cast<std::int32_t>(u / 2);
  }

  std::uint64_t position() const { return pos_; }
  std::uint64_t limit() const { return limit_; }

 private:
  const std::uint8_t* data_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

}  // namespace fssc::baseline
