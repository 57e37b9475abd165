#include "fssc/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fssc/conv_jscc.hpp"
#include "fssc/errors.hpp"
#include "fssc/json_io.hpp"
#include "fssc/serialize.hpp"
#include "fssc/swin.hpp"

namespace fssc {

namespace {
constexpr char kCheckpointMagic[8] = {'F', 'S', 'S', 'C', 'C', 'K', 'P', 'T'};

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}
}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Stsc: return "stsc";
    case ModelKind::ConvJscc: return "conv_jscc";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "stsc") return ModelKind::Stsc;
  if (s == "conv_jscc") return ModelKind::ConvJscc;
  throw ConfigError("unknown model kind '" + s + "' (expected stsc or conv_jscc)");
}

void to_json(nlohmann::json& j, const StscConfig& c) {
  j = {{"image_h", c.image_h},           {"image_w", c.image_w},
       {"embed_dim", c.embed_dim},       {"window_size", c.window_size},
       {"heads_stage1", c.heads_stage1}, {"heads_stage2", c.heads_stage2},
       {"mlp_ratio", c.mlp_ratio},       {"compression_ratio", c.compression_ratio}};
}

void from_json(const nlohmann::json& j, StscConfig& c) {
  if (!j.is_object()) throw ConfigError("model geometry must be a JSON object");
  static const char* known[] = {"image_h",      "image_w",      "embed_dim", "window_size",
                                "heads_stage1", "heads_stage2", "mlp_ratio", "compression_ratio"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("unknown model field '" + key + "'");
    }
  }
  read_field(j, "image_h", c.image_h);
  read_field(j, "image_w", c.image_w);
  read_field(j, "embed_dim", c.embed_dim);
  read_field(j, "window_size", c.window_size);
  read_field(j, "heads_stage1", c.heads_stage1);
  read_field(j, "heads_stage2", c.heads_stage2);
  read_field(j, "mlp_ratio", c.mlp_ratio);
  read_field(j, "compression_ratio", c.compression_ratio);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"kind", to_string(c.kind)}, {"geometry", c.geometry}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw ConfigError("field 'kind' must be a string");
    c.kind = model_kind_from_string(j["kind"].get<std::string>());
  }
  if (j.contains("geometry")) from_json(j["geometry"], c.geometry);
}

template <typename S>
std::unique_ptr<JsccModel<S>> make_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  switch (config.kind) {
    case ModelKind::Stsc: return std::make_unique<StscModel<S>>(config.geometry, seed);
    case ModelKind::ConvJscc: return std::make_unique<ConvJsccModel<S>>(config.geometry, seed);
  }
  throw ConfigError("make_model: unknown model kind");
}

template <typename S>
void save_checkpoint(const std::string& path, const JsccModel<S>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError("cannot open '" + path + "' for writing");
  const std::string header = nlohmann::json(model.model_config()).dump();
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_params(os, model.params());
  if (!os) throw FileError("write to '" + path + "' failed");
}

template <typename S>
std::unique_ptr<JsccModel<S>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError("cannot open checkpoint '" + path + "'");
  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (!is || !std::equal(std::begin(magic), std::end(magic), kCheckpointMagic)) {
    throw FormatError("'" + path + "' is not a checkpoint");
  }
  const auto len = io::read_le<std::uint32_t>(is);
  if (len > (1u << 20)) throw FormatError("checkpoint header too large");
  std::string header(len, '\0');
  is.read(header.data(), len);
  if (!is) throw FormatError("truncated checkpoint header");
  ModelConfig config;
  try {
    from_json(nlohmann::json::parse(header), config);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  auto model = make_model<S>(config, 0);
  const ModelParams<S> stored = read_params<S>(is);
  const std::string mismatch = model->params().schema_mismatch(stored);
  if (!mismatch.empty()) throw FormatError("checkpoint parameters: " + mismatch);
  model->params().assign(stored);
  return model;
}

#define FSSC_INSTANTIATE_MODEL(S)                                                           \
  template std::unique_ptr<JsccModel<S>> make_model(const ModelConfig&, std::uint64_t);    \
  template void save_checkpoint(const std::string&, const JsccModel<S>&);                  \
  template std::unique_ptr<JsccModel<S>> load_checkpoint(const std::string&);

FSSC_INSTANTIATE_MODEL(float)
FSSC_INSTANTIATE_MODEL(double)

}  // namespace fssc
