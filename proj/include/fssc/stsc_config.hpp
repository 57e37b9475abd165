#pragma once

#include "fssc/tensor.hpp"

namespace fssc {

/// Geometry and width of the Swin codec. Heads of 0 mean dim / 8.
struct StscConfig {
  Index image_h = 32;
  Index image_w = 32;
  Index embed_dim = 32;
  Index window_size = 4;
  Index heads_stage1 = 0;
  Index heads_stage2 = 0;
  Index mlp_ratio = 4;
  /// Real channel symbols per source value (3*H*W values per image).
  double compression_ratio = 0.33;

  /// k = round(CR * 3 * H * W).
  Index symbol_count() const;
  Index stage1_heads() const { return heads_stage1 > 0 ? heads_stage1 : embed_dim / 8; }
  Index stage2_heads() const { return heads_stage2 > 0 ? heads_stage2 : 2 * embed_dim / 8; }
  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  bool operator==(const StscConfig&) const = default;
};

}  // namespace fssc
