#pragma once

#include <cstdint>

#include "fssc/model.hpp"

namespace fssc {

/// Convolutional deep-JSCC comparison codec. Encoder: conv 3->16 (stride 2),
/// conv 16->32 (stride 2), conv 32->32 (stride 1), 3x3 kernels with GELU,
/// then a linear map to k symbols. The decoder mirrors it with transposed
/// convolutions and a final sigmoid.
template <typename S>
class ConvJsccModel final : public JsccModel<S> {
 public:
  ConvJsccModel(const StscConfig& geometry, std::uint64_t seed);
  ConvJsccModel(const ConvJsccModel&) = delete;
  ConvJsccModel& operator=(const ConvJsccModel&) = delete;

  Tensor<S> encode(const Tensor<S>& images) override;
  Tensor<S> decode(const Tensor<S>& symbols) override;
  ModelParams<S>& params() override { return params_; }
  const ModelParams<S>& params() const override { return params_; }
  Index symbol_count() const override { return geometry_.symbol_count(); }
  ModelConfig model_config() const override { return {ModelKind::ConvJscc, geometry_}; }

 private:
  StscConfig geometry_;
  ModelParams<S> params_;
  Tensor<S> conv_w_[3], conv_b_[3], head_w_, head_b_;
  Tensor<S> lift_w_, lift_b_, deconv_w_[3], deconv_b_[3];
};

}  // namespace fssc
