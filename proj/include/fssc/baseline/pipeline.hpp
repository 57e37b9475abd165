#pragma once

#include <cstdint>
#include <memory>

#include "fssc/baseline/dct_codec.hpp"
#include "fssc/baseline/ldpc.hpp"

namespace fssc::baseline {

struct SeparateConfig {
  int quality = 75;
  Index code_length = 1024;
  std::uint64_t code_seed = 1;
  int max_iters = 50;
};

struct PipelineDiagnostics {
  std::size_t source_bytes = 0;
  std::size_t blocks = 0;
  std::size_t channel_symbols = 0;
  /// Index of the first block whose decoder did not reach a zero syndrome, or -1.
  long failed_block = -1;
  bool decode_failure = false;
  bool parse_failure = false;
  bool concealed = false;
  int total_iterations = 0;
};

struct PipelineResult {
  RgbImage image;
  PipelineDiagnostics diagnostics;
};

/// Block-DCT source coding, rate-1/2 LDPC, Gray QPSK over complex AWGN with
/// Es/N0 = snr_db, soft demodulation and belief propagation. Any failed
/// block or unparsable bitstream yields the mid-gray image (0.5 everywhere).
class SeparatePipeline {
 public:
  explicit SeparatePipeline(const SeparateConfig& config = {});

  PipelineResult run(const RgbImage& image, double snr_db, std::uint64_t seed) const;
  /// Codec round trip without the channel.
  RgbImage codec_only(const RgbImage& image) const;

  const LdpcCode& code() const { return *code_; }
  const SeparateConfig& config() const { return config_; }

 private:
  SeparateConfig config_;
  std::shared_ptr<const LdpcCode> code_;
};

/// One-shot form with the default code and the given quality.
PipelineResult separate_pipeline(const RgbImage& image, double snr_db, int quality,
                                 std::uint64_t seed);

}  // namespace fssc::baseline
