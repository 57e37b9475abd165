#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fssc/model.hpp"
#include "fssc/params.hpp"
#include "fssc/rng.hpp"
#include "fssc/stsc_config.hpp"
#include "fssc/tensor.hpp"

namespace fssc {

/// Window layout for one token grid: roll + window-partition permutation,
/// relative position lookup and the shifted-window mask.
struct WindowGeometry {
  Index grid_h = 0, grid_w = 0, window = 0, shift = 0;
  Index windows() const { return (grid_h / window) * (grid_w / window); }
  Index tokens_per_window() const { return window * window; }

  std::vector<Index> partition;    // window-order slot -> grid token (after the roll)
  std::vector<Index> unpartition;  // inverse of `partition`
  std::vector<Index> relative_index;  // (N*N) rows of the bias table
  std::vector<double> mask;           // [windows, N, N]; empty when shift == 0

  /// Windows of `window` tokens over the grid; `shifted` rolls by window/2
  /// unless the grid holds a single window.
  static WindowGeometry make(Index grid_h, Index grid_w, Index window, bool shifted);
};

/// Mask logit for token pairs that come from different regions after the roll.
inline constexpr double kMaskedLogit = -1e9;

template <typename S>
struct SwinBlockParams {
  Tensor<S> norm1_gain, norm1_bias;
  Tensor<S> qkv_weight, qkv_bias;    // [d, 3d], [3d]
  Tensor<S> proj_weight, proj_bias;  // [d, d], [d]
  Tensor<S> relative_bias;           // [(2w-1)^2, heads]
  Tensor<S> norm2_gain, norm2_bias;
  Tensor<S> fc1_weight, fc1_bias;  // [d, r*d], [r*d]
  Tensor<S> fc2_weight, fc2_bias;  // [r*d, d], [d]
  Index heads = 1;

  /// Registers freshly initialized parameters under `prefix` and returns
  /// handles sharing their storage.
  static SwinBlockParams create(ModelParams<S>& params, const std::string& prefix, Index dim,
                                Index heads, Index window, Index mlp_ratio, Rng& rng);
};

/// [B, 3, H, W] -> [B, (H/4)*(W/4), 48]; each row is a 4x4x3 patch in
/// raster order with channels innermost. Rank-3 input [3, H, W] yields [n, 48].
template <typename S> Tensor<S> patch_partition(const Tensor<S>& images);

/// Inverse of patch_partition.
template <typename S>
Tensor<S> patch_unpartition(const Tensor<S>& tokens, Index image_h, Index image_w);

/// tokens[..., 48] * E + b.
template <typename S>
Tensor<S> linear_embed(const Tensor<S>& tokens, const Tensor<S>& embedding, const Tensor<S>& bias);

/// Pre-norm Swin block on a token grid [B, h, w, d]. When `attention` is
/// given it receives the softmax weights [B*windows, heads, N, N].
template <typename S>
Tensor<S> swin_block(const Tensor<S>& grid, const SwinBlockParams<S>& params,
                     const WindowGeometry& geometry, Tensor<S>* attention = nullptr);

/// [B, h, w, d] -> concat 2x2 neighbours (order (0,0), (1,0), (0,1), (1,1))
/// -> [B, h/2, w/2, 4d] -> linear reduction [4d, 2d].
template <typename S>
Tensor<S> patch_merging(const Tensor<S>& grid, const Tensor<S>& reduction);

/// [B, h, w, D] -> linear [D, 2D] -> rearranged to [B, 2h, 2w, D/2];
/// the data movement is the inverse of patch_merging's concatenation.
template <typename S>
Tensor<S> patch_expanding(const Tensor<S>& grid, const Tensor<S>& expansion);

/// s = W1 x + b1 on flattened stage-2 features [B, F] -> [B, k].
template <typename S>
Tensor<S> encoder_head(const Tensor<S>& features, const Tensor<S>& weight, const Tensor<S>& bias,
                       Index expected_symbols);

/// Swin-transformer semantic codec: two encoder stages (patch embedding and
/// patch merging), an affine channel head, and a mirrored decoder.
template <typename S>
class StscModel final : public JsccModel<S> {
 public:
  StscModel(const StscConfig& config, std::uint64_t seed);
  StscModel(const StscModel&) = delete;
  StscModel& operator=(const StscModel&) = delete;

  Tensor<S> encode(const Tensor<S>& images) override;
  Tensor<S> decode(const Tensor<S>& symbols) override;
  ModelParams<S>& params() override { return params_; }
  const ModelParams<S>& params() const override { return params_; }
  Index symbol_count() const override { return config_.symbol_count(); }
  ModelConfig model_config() const override;

  const StscConfig& config() const { return config_; }

  /// Intermediate shapes of the most recent encode(), for inspection.
  struct Trace {
    Shape tokens, stage1, stage2, symbols;
  };
  const Trace& last_trace() const { return trace_; }

 private:
  StscConfig config_;
  ModelParams<S> params_;
  WindowGeometry geo1_regular_, geo1_shifted_, geo2_regular_, geo2_shifted_;
  Tensor<S> embed_w_, embed_b_, reduction_, head_w_, head_b_;
  Tensor<S> lift_w_, lift_b_, expansion_, unembed_w_, unembed_b_;
  SwinBlockParams<S> enc1_[2], enc2_[2], dec2_[2], dec1_[2];
  Trace trace_;
};

}  // namespace fssc
