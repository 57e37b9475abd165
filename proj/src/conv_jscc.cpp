#include "fssc/conv_jscc.hpp"

#include <cmath>

#include "fssc/ops.hpp"

namespace fssc {

namespace {

constexpr Index kChannels[4] = {3, 16, 32, 32};
constexpr Index kStrides[3] = {2, 2, 1};

// He-scaled truncated normal for convolution kernels.
template <typename S>
Tensor<S> conv_kernel(Shape shape, Index fan_in, Rng& rng) {
  Tensor<S> t(std::move(shape), true);
  const double stddev = std::sqrt(2.0 / double(fan_in));
  for (Index i = 0; i < t.numel(); ++i) t.value()[i] = static_cast<S>(rng.truncated_normal(stddev));
  return t;
}

template <typename S>
Tensor<S> dense(Shape shape, Rng& rng) {
  Tensor<S> t(std::move(shape), true);
  for (Index i = 0; i < t.numel(); ++i) t.value()[i] = static_cast<S>(rng.truncated_normal(0.02));
  return t;
}

}  // namespace

template <typename S>
ConvJsccModel<S>::ConvJsccModel(const StscConfig& geometry, std::uint64_t seed)
    : geometry_(geometry) {
  geometry_.validate();
  Rng rng(seed);
  const Index k = geometry_.symbol_count();
  const Index features = kChannels[3] * (geometry_.image_h / 4) * (geometry_.image_w / 4);
  for (int i = 0; i < 3; ++i) {
    const std::string p = "enc.conv" + std::to_string(i + 1);
    conv_w_[i] = params_.add(p + ".weight",
                             conv_kernel<S>({kChannels[i + 1], kChannels[i], 3, 3}, kChannels[i] * 9, rng));
    conv_b_[i] = params_.add(p + ".bias", Tensor<S>::zeros({kChannels[i + 1]}, true));
  }
  head_w_ = params_.add("enc.head.weight", dense<S>({features, k}, rng));
  head_b_ = params_.add("enc.head.bias", Tensor<S>::zeros({k}, true));
  lift_w_ = params_.add("dec.lift.weight", dense<S>({k, features}, rng));
  lift_b_ = params_.add("dec.lift.bias", Tensor<S>::zeros({features}, true));
  // Transposed layers undo the encoder convolutions in reverse order.
  for (int i = 0; i < 3; ++i) {
    const int layer = 2 - i;
    const std::string p = "dec.deconv" + std::to_string(i + 1);
    deconv_w_[i] = params_.add(
        p + ".weight", conv_kernel<S>({kChannels[layer + 1], kChannels[layer], 3, 3},
                                      kChannels[layer + 1] * 9, rng));
    deconv_b_[i] = params_.add(p + ".bias", Tensor<S>::zeros({kChannels[layer]}, true));
  }
}

template <typename S>
Tensor<S> ConvJsccModel<S>::encode(const Tensor<S>& images) {
  if (images.rank() == 3) {
    return reshape(encode(reshape(images, {1, images.dim(0), images.dim(1), images.dim(2)})),
                   {symbol_count()});
  }
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != geometry_.image_h ||
      images.dim(3) != geometry_.image_w) {
    throw DimensionError("conv encode: unexpected input " + shape_str(images.shape()));
  }
  Tensor<S> x = images;
  for (int i = 0; i < 3; ++i) x = gelu(conv2d(x, conv_w_[i], conv_b_[i], kStrides[i]));
  const Index b = images.dim(0);
  return linear(reshape(x, {b, x.numel() / b}), head_w_, head_b_);
}

template <typename S>
Tensor<S> ConvJsccModel<S>::decode(const Tensor<S>& symbols) {
  const Index k = symbol_count();
  if (symbols.rank() == 1) {
    if (symbols.dim(0) != k) throw DimensionError("conv decode: expected " + std::to_string(k) + " symbols");
    return reshape(decode(reshape(symbols, {1, k})), {3, geometry_.image_h, geometry_.image_w});
  }
  if (symbols.rank() != 2 || symbols.dim(1) != k) {
    throw DimensionError("conv decode: expected [B, " + std::to_string(k) + "], got " +
                         shape_str(symbols.shape()));
  }
  const Index b = symbols.dim(0);
  Tensor<S> x = reshape(linear(symbols, lift_w_, lift_b_),
                        {b, kChannels[3], geometry_.image_h / 4, geometry_.image_w / 4});
  for (int i = 0; i < 3; ++i) {
    x = conv2d_transposed(x, deconv_w_[i], deconv_b_[i], kStrides[2 - i]);
    x = i < 2 ? gelu(x) : sigmoid(x);
  }
  return x;
}

template class ConvJsccModel<float>;
template class ConvJsccModel<double>;

}  // namespace fssc
