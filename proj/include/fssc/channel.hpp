#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fssc/rng.hpp"
#include "fssc/tensor.hpp"

namespace fssc {

enum class ChannelFamily { Identity, Awgn, FlatFading };

std::string to_string(ChannelFamily family);
ChannelFamily channel_family_from_string(const std::string& s);

/// Channel family, SNR per real symbol (signal power 1 after normalization)
/// and the noise seed.
struct ChannelSpec {
  ChannelFamily family = ChannelFamily::Awgn;
  double snr_db = 12.0;
  std::uint64_t seed = 0;
};

/// Noise variance for unit signal power: 10^(-snr_db/10).
double noise_variance(double snr_db);

/// Scales each block (the last axis) to mean-square power 1. The RMS
/// denominator is sqrt(mean(s^2) + eps^2) so an all-zero block maps to zero.
template <typename S>
Tensor<S> power_normalize(const Tensor<S>& symbols, S eps = S(1e-8));

/// y = h*s + n. Identity returns s unchanged. AWGN uses h = 1 and
/// n ~ N(0, sigma^2). Flat fading draws one Rayleigh(1/sqrt(2)) gain per
/// block. The noise is a constant of the graph, so dy/ds = h.
template <typename S>
Tensor<S> apply_channel(const Tensor<S>& symbols, const ChannelSpec& spec, Rng& rng,
                        std::vector<double>* gains = nullptr);

/// Same as above with a generator seeded from spec.seed.
template <typename S>
Tensor<S> apply_channel(const Tensor<S>& symbols, const ChannelSpec& spec);

/// Perfect-CSI equalization: divides each block by its gain.
template <typename S>
Tensor<S> equalize(const Tensor<S>& received, const std::vector<double>& gains);

/// power_normalize -> apply_channel -> equalize (for fading), the path
/// between encoder and decoder.
template <typename S>
Tensor<S> transmit(const Tensor<S>& symbols, const ChannelSpec& spec, Rng& rng);

/// 10*log10(sum(s^2) / sum((y-s)^2)), capped at 99 dB when y == s.
double estimate_snr(const double* s, const double* y, Index n);

template <typename S>
double estimate_snr(const Tensor<S>& s, const Tensor<S>& y);

}  // namespace fssc
