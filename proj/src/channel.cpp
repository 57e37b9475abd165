#include "fssc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fssc/ops.hpp"

namespace fssc {

std::string to_string(ChannelFamily family) {
  switch (family) {
    case ChannelFamily::Identity: return "identity";
    case ChannelFamily::Awgn: return "awgn";
    case ChannelFamily::FlatFading: return "flat_fading";
  }
  return "unknown";
}

ChannelFamily channel_family_from_string(const std::string& s) {
  if (s == "identity") return ChannelFamily::Identity;
  if (s == "awgn") return ChannelFamily::Awgn;
  if (s == "flat_fading") return ChannelFamily::FlatFading;
  throw ConfigError("unknown channel family '" + s + "' (expected identity, awgn or flat_fading)");
}

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

template <typename S>
Tensor<S> power_normalize(const Tensor<S>& symbols, S eps) {
  const Index k = symbols.dim(-1);
  const Index blocks = symbols.numel() / k;
  auto rms = std::make_shared<Vec<S>>(blocks);
  Vec<S> out(symbols.numel());
  for (Index b = 0; b < blocks; ++b) {
    const auto s = symbols.value().segment(b * k, k);
    const S r = std::sqrt(s.squaredNorm() / S(k) + eps * eps);
    (*rms)[b] = r;
    out.segment(b * k, k) = s / r;
  }
  return detail::make_result<S>(
      symbols.shape(), std::move(out), {&symbols},
      [sn = symbols.node(), rms, k, blocks](TensorNode<S>& o) {
        Vec<S>& gs = sn->grad_buffer();
        for (Index b = 0; b < blocks; ++b) {
          const auto s = sn->value.segment(b * k, k);
          const auto g = o.grad.segment(b * k, k);
          const S r = (*rms)[b];
          gs.segment(b * k, k) += g / r - s * (g.dot(s) / (S(k) * r * r * r));
        }
      });
}

template <typename S>
Tensor<S> apply_channel(const Tensor<S>& symbols, const ChannelSpec& spec, Rng& rng,
                        std::vector<double>* gains) {
  const Index k = symbols.dim(-1);
  const Index blocks = symbols.numel() / k;
  if (gains) gains->assign(static_cast<std::size_t>(blocks), 1.0);
  switch (spec.family) {
    case ChannelFamily::Identity:
      return symbols;
    case ChannelFamily::Awgn:
    case ChannelFamily::FlatFading: {
      const double sigma = std::sqrt(noise_variance(spec.snr_db));
      Tensor<S> received = symbols;
      if (spec.family == ChannelFamily::FlatFading) {
        Tensor<S> h(symbols.shape());
        for (Index b = 0; b < blocks; ++b) {
          const double g = rng.rayleigh(1.0 / std::numbers::sqrt2);
          if (gains) (*gains)[static_cast<std::size_t>(b)] = g;
          h.value().segment(b * k, k).setConstant(static_cast<S>(g));
        }
        received = mul(symbols, h);
      }
      Tensor<S> noise(symbols.shape());
      for (Index i = 0; i < noise.numel(); ++i) noise.value()[i] = static_cast<S>(sigma * rng.normal());
      return add(received, noise);
    }
  }
  throw ConfigError("apply_channel: unknown channel family");
}

template <typename S>
Tensor<S> apply_channel(const Tensor<S>& symbols, const ChannelSpec& spec) {
  Rng rng(spec.seed);
  return apply_channel(symbols, spec, rng);
}

template <typename S>
Tensor<S> equalize(const Tensor<S>& received, const std::vector<double>& gains) {
  const Index k = received.dim(-1);
  const Index blocks = received.numel() / k;
  if (static_cast<Index>(gains.size()) != blocks) {
    throw DimensionError("equalize: " + std::to_string(gains.size()) + " gains for " +
                         std::to_string(blocks) + " blocks");
  }
  if (std::all_of(gains.begin(), gains.end(), [](double g) { return g == 1.0; })) return received;
  Tensor<S> inv(received.shape());
  for (Index b = 0; b < blocks; ++b) {
    inv.value().segment(b * k, k).setConstant(static_cast<S>(1.0 / gains[static_cast<std::size_t>(b)]));
  }
  return mul(received, inv);
}

template <typename S>
Tensor<S> transmit(const Tensor<S>& symbols, const ChannelSpec& spec, Rng& rng) {
  std::vector<double> gains;
  const Tensor<S> y = apply_channel(power_normalize(symbols), spec, rng, &gains);
  return equalize(y, gains);
}

double estimate_snr(const double* s, const double* y, Index n) {
  double signal = 0.0, noise = 0.0;
  for (Index i = 0; i < n; ++i) {
    signal += s[i] * s[i];
    noise += (y[i] - s[i]) * (y[i] - s[i]);
  }
  if (noise == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(signal / noise));
}

template <typename S>
double estimate_snr(const Tensor<S>& s, const Tensor<S>& y) {
  if (s.numel() != y.numel()) throw DimensionError("estimate_snr: length mismatch");
  const Vec<double> a = s.value().template cast<double>();
  const Vec<double> b = y.value().template cast<double>();
  return estimate_snr(a.data(), b.data(), a.size());
}

#define FSSC_INSTANTIATE_CHANNEL(S)                                                          \
  template Tensor<S> power_normalize(const Tensor<S>&, S);                                   \
  template Tensor<S> apply_channel(const Tensor<S>&, const ChannelSpec&, Rng&,               \
                                   std::vector<double>*);                                    \
  template Tensor<S> apply_channel(const Tensor<S>&, const ChannelSpec&);                    \
  template Tensor<S> equalize(const Tensor<S>&, const std::vector<double>&);                 \
  template Tensor<S> transmit(const Tensor<S>&, const ChannelSpec&, Rng&);                   \
  template double estimate_snr(const Tensor<S>&, const Tensor<S>&);

FSSC_INSTANTIATE_CHANNEL(float)
FSSC_INSTANTIATE_CHANNEL(double)

}  // namespace fssc
