#include "fssc/baseline/pipeline.hpp"

#include <map>
#include <mutex>

#include "fssc/baseline/qpsk.hpp"
#include "fssc/channel.hpp"
#include "fssc/errors.hpp"

namespace fssc::baseline {

namespace {

// Codes are deterministic in (length, seed); build each once per process.
std::shared_ptr<const LdpcCode> shared_code(Index n, std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::pair<Index, std::uint64_t>, std::shared_ptr<const LdpcCode>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{n, seed}];
  if (!slot) slot = std::make_shared<const LdpcCode>(LdpcCode::regular(n, 3, 6, seed));
  return slot;
}

RgbImage mid_gray(Index h, Index w) {
  return {h, w, Eigen::VectorXf::Constant(3 * h * w, 0.5f)};
}

}  // namespace

SeparatePipeline::SeparatePipeline(const SeparateConfig& config)
    : config_(config), code_(shared_code(config.code_length, config.code_seed)) {
  quant_table(config.quality);  // validates the quality
  if (config.max_iters < 1) throw ConfigError("separate pipeline: max_iters must be positive");
}

RgbImage SeparatePipeline::codec_only(const RgbImage& image) const {
  return dct_decode(dct_encode(image, config_.quality));
}

PipelineResult SeparatePipeline::run(const RgbImage& image, double snr_db,
                                     std::uint64_t seed) const {
  const LdpcCode& code = *code_;
  const std::vector<std::uint8_t> stream = dct_encode(image, config_.quality);
  PipelineResult out;
  auto& diag = out.diagnostics;
  diag.source_bytes = stream.size();

  const std::size_t k = static_cast<std::size_t>(code.k());
  const std::size_t total_bits = 8 * stream.size();
  diag.blocks = (total_bits + k - 1) / k;
  const double noise_var = noise_variance(snr_db);
  Rng rng(seed);
  std::vector<std::uint8_t> received_bits;
  received_bits.reserve(diag.blocks * k);
  Bits message(k);
  for (std::size_t b = 0; b < diag.blocks; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t bit = b * k + i;
      message[i] = bit < total_bits ? (stream[bit / 8] >> (7 - bit % 8)) & 1u : 0;
    }
    const QpskFrame frame = qpsk_modulate(code.encode(message));
    diag.channel_symbols += frame.symbols.size();
    std::vector<double> llr = qpsk_demodulate_soft(awgn_complex(frame.symbols, snr_db, rng), noise_var);
    if (frame.padded) llr.pop_back();
    const LdpcDecodeResult dec = code.decode(llr, config_.max_iters);
    diag.total_iterations += dec.iterations;
    if (!dec.success) {
      diag.failed_block = static_cast<long>(b);
      diag.decode_failure = true;
      break;
    }
    received_bits.insert(received_bits.end(), dec.message.begin(), dec.message.end());
  }

  if (!diag.decode_failure) {
    std::vector<std::uint8_t> bytes(received_bits.size() / 8, 0);
    for (std::size_t i = 0; i < bytes.size() * 8; ++i) {
      if (received_bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    try {
      const DctHeader hd = parse_dct_header(bytes.data(), bytes.size());
      if (hd.total_bytes() > bytes.size()) throw ParseError("received stream is shorter than its header says");
      bytes.resize(hd.total_bytes());
      out.image = dct_decode(bytes);
      if (out.image.height != image.height || out.image.width != image.width) {
        throw ParseError("received image has the wrong extents");
      }
    } catch (const ParseError&) {
      diag.parse_failure = true;
    }
  }
  if (diag.decode_failure || diag.parse_failure) {
    diag.concealed = true;
    out.image = mid_gray(image.height, image.width);
  }
  return out;
}

PipelineResult separate_pipeline(const RgbImage& image, double snr_db, int quality,
                                 std::uint64_t seed) {
  SeparateConfig c;
  c.quality = quality;
  return SeparatePipeline(c).run(image, snr_db, seed);
}

}  // namespace fssc::baseline
