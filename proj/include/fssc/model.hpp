#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fssc/channel.hpp"
#include "fssc/params.hpp"
#include "fssc/rng.hpp"
#include "fssc/stsc_config.hpp"
#include "fssc/tensor.hpp"

namespace fssc {

enum class ModelKind { Stsc, ConvJscc };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Which codec to build. Both codecs take their image size and symbol count
/// from the Swin geometry so that they share one rate.
struct ModelConfig {
  ModelKind kind = ModelKind::Stsc;
  StscConfig geometry;

  Index symbol_count() const { return geometry.symbol_count(); }
  void validate() const { geometry.validate(); }
  bool operator==(const ModelConfig&) const = default;
};

/// Image codec mapping [B, 3, H, W] in [0, 1] to [B, k] real symbols and back.
template <typename S>
class JsccModel {
 public:
  virtual ~JsccModel() = default;

  virtual Tensor<S> encode(const Tensor<S>& images) = 0;
  virtual Tensor<S> decode(const Tensor<S>& symbols) = 0;
  virtual ModelParams<S>& params() = 0;
  virtual const ModelParams<S>& params() const = 0;
  virtual Index symbol_count() const = 0;
  virtual ModelConfig model_config() const = 0;

  /// encode -> power normalization -> channel -> decode.
  Tensor<S> forward(const Tensor<S>& images, const ChannelSpec& channel, Rng& rng) {
    return decode(transmit(encode(images), channel, rng));
  }
};

/// Builds a model with parameters initialized from `seed`.
template <typename S>
std::unique_ptr<JsccModel<S>> make_model(const ModelConfig& config, std::uint64_t seed);

/// Checkpoint: "FSSCCKPT", u32 JSON length, JSON config header, then the
/// parameter blob of write_params().
template <typename S>
void save_checkpoint(const std::string& path, const JsccModel<S>& model);

/// Rebuilds the model recorded in a checkpoint. Throws FileError when the
/// file cannot be opened and FormatError when it is malformed.
template <typename S>
std::unique_ptr<JsccModel<S>> load_checkpoint(const std::string& path);

}  // namespace fssc
