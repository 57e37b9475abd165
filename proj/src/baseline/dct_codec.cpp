#include "fssc/baseline/dct_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fssc/baseline/bitstream.hpp"
#include "fssc/errors.hpp"

namespace fssc::baseline {

namespace {

constexpr std::array<int, 64> kLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<char, 4> kMagic = {'F', 'S', 'J', '1'};
constexpr int kMaxLevel = 1 << 15;

using Block = Eigen::Matrix<double, 8, 8>;

const Eigen::Matrix<double, 8, 8>& dct_basis() {
  static const Eigen::Matrix<double, 8, 8> c = [] {
    Eigen::Matrix<double, 8, 8> m;
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) m(k, n) = a * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    }
    return m;
  }();
  return c;
}

void check_quality(int quality) {
  if (quality < 1 || quality > 100) {
    throw ConfigError("dct codec: quality " + std::to_string(quality) + " outside [1, 100]");
  }
}

}  // namespace

const std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

std::array<int, 64> quant_table(int quality) {
  check_quality(quality);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kLuminance[i] * scale + 50) / 100, 1, 255);
  return q;
}

std::array<int, 64> zigzag_scan(const std::array<int, 64>& raster) {
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = raster[kZigzag[i]];
  return out;
}

std::array<int, 64> zigzag_unscan(const std::array<int, 64>& scanned) {
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[kZigzag[i]] = scanned[i];
  return out;
}

Block dct8x8(const Block& block) { return dct_basis() * block * dct_basis().transpose(); }
Block idct8x8(const Block& coeffs) { return dct_basis().transpose() * coeffs * dct_basis(); }

std::vector<std::uint8_t> dct_encode(const RgbImage& image, int quality) {
  check_quality(quality);
  const Index h = image.height, w = image.width, plane = h * w;
  if (h <= 0 || w <= 0 || h % 8 != 0 || w % 8 != 0 || h > 65535 || w > 65535) {
    throw ConfigError("dct codec: image extents must be positive multiples of 8, got " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  if (image.pixels.size() != 3 * plane) throw DimensionError("dct codec: pixel count mismatch");

  // YCbCr on the 0..255 scale, level shifted by -128.
  Eigen::MatrixXd ycc(3, plane);
  for (Index i = 0; i < plane; ++i) {
    const double r = 255.0 * std::clamp<double>(image.pixels[i], 0.0, 1.0);
    const double g = 255.0 * std::clamp<double>(image.pixels[plane + i], 0.0, 1.0);
    const double b = 255.0 * std::clamp<double>(image.pixels[2 * plane + i], 0.0, 1.0);
    ycc(0, i) = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
    ycc(1, i) = -0.168736 * r - 0.331264 * g + 0.5 * b;
    ycc(2, i) = 0.5 * r - 0.418688 * g - 0.081312 * b;
  }

  const auto q = quant_table(quality);
  BitWriter bits;
  for (int c = 0; c < 3; ++c) {
    int previous_dc = 0;
    for (Index by = 0; by < h; by += 8) {
      for (Index bx = 0; bx < w; bx += 8) {
        Block blk;
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) blk(y, x) = ycc(c, (by + y) * w + bx + x);
        }
        const Block coef = dct8x8(blk);
        std::array<int, 64> raster{};
        for (int i = 0; i < 64; ++i) {
          raster[i] = static_cast<int>(std::lround(coef(i / 8, i % 8) / q[i]));
        }
        const auto scan = zigzag_scan(raster);
        bits.put_se(scan[0] - previous_dc);
        previous_dc = scan[0];
        std::uint32_t nonzero = 0;
        for (int i = 1; i < 64; ++i) nonzero += scan[i] != 0;
        bits.put_ue(nonzero);
        std::uint32_t run = 0;
        for (int i = 1; i < 64; ++i) {
          if (scan[i] == 0) {
            ++run;
            continue;
          }
          bits.put_ue(run);
          bits.put_ue(static_cast<std::uint32_t>(std::abs(scan[i]) - 1));
          bits.put(scan[i] < 0);
          run = 0;
        }
      }
    }
  }

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  auto put16 = [&](std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  put16(static_cast<std::uint32_t>(h));
  put16(static_cast<std::uint32_t>(w));
  out.push_back(static_cast<std::uint8_t>(quality));
  out.push_back(static_cast<std::uint8_t>(bits.padding_bits()));
  const auto len = static_cast<std::uint32_t>(bits.bytes().size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), bits.bytes().begin(), bits.bytes().end());
  return out;
}

DctHeader parse_dct_header(const std::uint8_t* data, std::size_t size) {
  if (size < kDctHeaderBytes) throw ParseError("dct stream: truncated header");
  if (!std::equal(kMagic.begin(), kMagic.end(), data)) throw ParseError("dct stream: bad magic");
  DctHeader hd;
  hd.height = data[4] | (data[5] << 8);
  hd.width = data[6] | (data[7] << 8);
  hd.quality = data[8];
  hd.padded_bits = data[9];
  hd.payload_bytes = std::uint32_t{data[10]} | (std::uint32_t{data[11]} << 8) |
                     (std::uint32_t{data[12]} << 16) | (std::uint32_t{data[13]} << 24);
  if (hd.height == 0 || hd.width == 0 || hd.height % 8 != 0 || hd.width % 8 != 0) {
    throw ParseError("dct stream: invalid extents " + std::to_string(hd.height) + "x" +
                     std::to_string(hd.width));
  }
  if (hd.quality < 1 || hd.quality > 100) throw ParseError("dct stream: invalid quality");
  if (hd.padded_bits > 7 || (hd.payload_bytes == 0 && hd.padded_bits != 0)) {
    throw ParseError("dct stream: invalid padding count");
  }
  return hd;
}

RgbImage dct_decode(const std::vector<std::uint8_t>& stream) {
  const DctHeader hd = parse_dct_header(stream.data(), stream.size());
  if (stream.size() != hd.total_bytes()) {
    throw ParseError("dct stream: header announces " + std::to_string(hd.total_bytes()) +
                     " bytes, stream has " + std::to_string(stream.size()));
  }
  const std::uint64_t payload_bits = 8ull * hd.payload_bytes - std::uint64_t(hd.padded_bits);
  BitReader bits(stream.data() + kDctHeaderBytes, payload_bits);
  const Index h = hd.height, w = hd.width, plane = h * w;
  const auto q = quant_table(hd.quality);

  Eigen::MatrixXd ycc(3, plane);
  for (int c = 0; c < 3; ++c) {
    int previous_dc = 0;
    for (Index by = 0; by < h; by += 8) {
      for (Index bx = 0; bx < w; bx += 8) {
        std::array<int, 64> scan{};
        const std::int64_t dc = std::int64_t{previous_dc} + bits.get_se();
        if (std::abs(dc) > kMaxLevel) throw ParseError("dct stream: DC level out of range");
        scan[0] = static_cast<int>(dc);
        previous_dc = scan[0];
        const std::uint32_t nonzero = bits.get_ue();
        if (nonzero > 63) throw ParseError("dct stream: more than 63 AC coefficients");
        int pos = 0;
        for (std::uint32_t i = 0; i < nonzero; ++i) {
          const std::uint32_t run = bits.get_ue();
          if (run > 62 || pos + static_cast<int>(run) + 1 > 63) {
            throw ParseError("dct stream: zero run past the end of a block");
          }
          pos += static_cast<int>(run) + 1;
          const std::uint32_t mag = bits.get_ue();
          if (mag >= static_cast<std::uint32_t>(kMaxLevel)) {
            throw ParseError("dct stream: AC level out of range");
          }
          const int level = static_cast<int>(mag) + 1;
          scan[pos] = bits.get() ? -level : level;
        }
        const auto raster = zigzag_unscan(scan);
        Block coef;
        for (int i = 0; i < 64; ++i) coef(i / 8, i % 8) = double(raster[i]) * q[i];
        const Block blk = idct8x8(coef);
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) ycc(c, (by + y) * w + bx + x) = blk(y, x);
        }
      }
    }
  }
  if (bits.position() != payload_bits) {
    throw ParseError("dct stream: " + std::to_string(payload_bits - bits.position()) +
                     " payload bits left after the last block");
  }
  for (std::uint64_t i = payload_bits; i < 8ull * hd.payload_bytes; ++i) {
    if ((stream[kDctHeaderBytes + i / 8] >> (7 - i % 8)) & 1u) {
      throw ParseError("dct stream: nonzero padding bits");
    }
  }

  RgbImage out;
  out.height = h;
  out.width = w;
  out.pixels.resize(3 * plane);
  for (Index i = 0; i < plane; ++i) {
    const double y = ycc(0, i) + 128.0, cb = ycc(1, i), cr = ycc(2, i);
    const double rgb[3] = {y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb};
    for (int c = 0; c < 3; ++c) {
      out.pixels[c * plane + i] = static_cast<float>(std::clamp(rgb[c] / 255.0, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace fssc::baseline
