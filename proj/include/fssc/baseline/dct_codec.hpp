#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "fssc/tensor.hpp"

namespace fssc::baseline {

// Bitstream layout (all multi-byte fields little-endian):
//   "FSJ1" | H u16 | W u16 | quality u8 | padded_bits u8 | payload_len u32 | payload
// The payload codes Y, Cb and Cr planes in turn, 8x8 blocks in raster order.
// Each block is se(DC - previous DC of the plane), ue(number of nonzero AC
// coefficients), then per nonzero coefficient in zigzag order ue(zero run),
// ue(|level| - 1) and a sign bit (1 = negative). padded_bits zero bits end
// the last payload byte.

inline constexpr std::size_t kDctHeaderBytes = 14;

struct DctCodecConfig {
  int quality = 75;
};

/// Standard JPEG luminance table scaled for `quality` in [1, 100] (IJG
/// scaling), entries clamped to [1, 255], raster order.
std::array<int, 64> quant_table(int quality);

/// kZigzag[i] is the raster index of the i-th coefficient in scan order.
extern const std::array<int, 64> kZigzag;

std::array<int, 64> zigzag_scan(const std::array<int, 64>& raster);
std::array<int, 64> zigzag_unscan(const std::array<int, 64>& scanned);

/// Orthonormal 2-D DCT-II of an 8x8 block (row-major) and its inverse.
Eigen::Matrix<double, 8, 8> dct8x8(const Eigen::Matrix<double, 8, 8>& block);
Eigen::Matrix<double, 8, 8> idct8x8(const Eigen::Matrix<double, 8, 8>& coeffs);

/// Channel-major RGB image with values in [0, 1].
struct RgbImage {
  Index height = 0;
  Index width = 0;
  Eigen::VectorXf pixels;  // 3 * height * width
};

/// Throws ConfigError for extents that are not positive multiples of 8 (or
/// exceed 65535) and for quality outside [1, 100].
std::vector<std::uint8_t> dct_encode(const RgbImage& image, int quality);

/// Throws ParseError on any inconsistency: bad magic or header fields, a
/// length that disagrees with the header, payload bits left over or missing,
/// or out-of-range coefficient values.
RgbImage dct_decode(const std::vector<std::uint8_t>& stream);

/// Header fields of a stream without decoding the payload.
struct DctHeader {
  Index height = 0, width = 0;
  int quality = 0, padded_bits = 0;
  std::uint32_t payload_bytes = 0;
  std::size_t total_bytes() const { return kDctHeaderBytes + payload_bytes; }
};
DctHeader parse_dct_header(const std::uint8_t* data, std::size_t size);

}  // namespace fssc::baseline
