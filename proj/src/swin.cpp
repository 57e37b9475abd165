#include "fssc/swin.hpp"

#include <cmath>

#include "fssc/ops.hpp"

namespace fssc {

Index StscConfig::symbol_count() const {
  return static_cast<Index>(std::llround(compression_ratio * 3.0 * double(image_h * image_w)));
}

void StscConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (image_h <= 0 || image_w <= 0 || image_h % 8 != 0 || image_w % 8 != 0) {
    fail("image_h and image_w must be positive multiples of 8, got " + std::to_string(image_h) +
         "x" + std::to_string(image_w));
  }
  if (window_size <= 0 || (image_h / 4) % window_size != 0 || (image_w / 4) % window_size != 0) {
    fail("window_size " + std::to_string(window_size) + " must divide the patch grid " +
         std::to_string(image_h / 4) + "x" + std::to_string(image_w / 4));
  }
  if (embed_dim <= 0) fail("embed_dim must be positive");
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  const Index h1 = stage1_heads(), h2 = stage2_heads();
  if (h1 <= 0 || embed_dim % h1 != 0) {
    fail("stage-1 heads " + std::to_string(h1) + " must divide embed_dim " +
         std::to_string(embed_dim));
  }
  if (h2 <= 0 || (2 * embed_dim) % h2 != 0) {
    fail("stage-2 heads " + std::to_string(h2) + " must divide " + std::to_string(2 * embed_dim));
  }
  if (!(compression_ratio > 0.0) || symbol_count() < 1) {
    fail("compression_ratio must give at least one channel symbol");
  }
  // Stage 2 either tiles into whole windows or is a single square window.
  (void)WindowGeometry::make(image_h / 8, image_w / 8, window_size, true);
}

WindowGeometry WindowGeometry::make(Index grid_h, Index grid_w, Index window, bool shifted) {
  WindowGeometry g;
  g.grid_h = grid_h;
  g.grid_w = grid_w;
  if (grid_h <= window && grid_w <= window) {
    if (grid_h != grid_w) {
      throw ConfigError("window geometry: grid " + std::to_string(grid_h) + "x" +
                        std::to_string(grid_w) + " is smaller than the window but not square");
    }
    g.window = grid_h;
    g.shift = 0;
  } else {
    if (grid_h % window != 0 || grid_w % window != 0) {
      throw ConfigError("window geometry: window " + std::to_string(window) +
                        " does not divide grid " + std::to_string(grid_h) + "x" +
                        std::to_string(grid_w));
    }
    g.window = window;
    g.shift = shifted ? window / 2 : 0;
  }
  const Index ws = g.window, n = ws * ws, wx_count = grid_w / ws;
  const Index total = grid_h * grid_w;
  g.partition.resize(static_cast<std::size_t>(total));
  g.unpartition.resize(static_cast<std::size_t>(total));
  for (Index wy = 0; wy < grid_h / ws; ++wy) {
    for (Index wx = 0; wx < wx_count; ++wx) {
      for (Index ty = 0; ty < ws; ++ty) {
        for (Index tx = 0; tx < ws; ++tx) {
          const Index slot = (wy * wx_count + wx) * n + ty * ws + tx;
          const Index y = (wy * ws + ty + g.shift) % grid_h;
          const Index x = (wx * ws + tx + g.shift) % grid_w;
          g.partition[static_cast<std::size_t>(slot)] = y * grid_w + x;
          g.unpartition[static_cast<std::size_t>(y * grid_w + x)] = slot;
        }
      }
    }
  }
  g.relative_index.resize(static_cast<std::size_t>(n * n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index dy = i / ws - j / ws + ws - 1;
      const Index dx = i % ws - j % ws + ws - 1;
      g.relative_index[static_cast<std::size_t>(i * n + j)] = dy * (2 * ws - 1) + dx;
    }
  }
  if (g.shift > 0) {
    // Regions of the rolled grid: [0, g-ws), [g-ws, g-shift), [g-shift, g).
    auto region = [&](Index v, Index extent) {
      return v < extent - ws ? 0 : (v < extent - g.shift ? 1 : 2);
    };
    const Index nw = g.windows();
    g.mask.assign(static_cast<std::size_t>(nw * n * n), 0.0);
    for (Index w = 0; w < nw; ++w) {
      const Index wy = w / wx_count, wx = w % wx_count;
      for (Index i = 0; i < n; ++i) {
        const Index li = region(wy * ws + i / ws, grid_h) * 3 + region(wx * ws + i % ws, grid_w);
        for (Index j = 0; j < n; ++j) {
          const Index lj = region(wy * ws + j / ws, grid_h) * 3 + region(wx * ws + j % ws, grid_w);
          if (li != lj) g.mask[static_cast<std::size_t>((w * n + i) * n + j)] = kMaskedLogit;
        }
      }
    }
  }
  return g;
}

namespace {

template <typename S>
Tensor<S> init_weight(Shape shape, Rng& rng) {
  Tensor<S> t(std::move(shape), true);
  for (Index i = 0; i < t.numel(); ++i) t.value()[i] = static_cast<S>(rng.truncated_normal(0.02));
  return t;
}

template <typename S>
Tensor<S> init_const(Shape shape, S v) {
  return Tensor<S>::full(std::move(shape), v, true);
}

}  // namespace

template <typename S>
SwinBlockParams<S> SwinBlockParams<S>::create(ModelParams<S>& params, const std::string& prefix,
                                              Index dim, Index heads, Index window,
                                              Index mlp_ratio, Rng& rng) {
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("swin block '" + prefix + "': " + std::to_string(heads) +
                      " heads do not divide dim " + std::to_string(dim));
  }
  SwinBlockParams b;
  b.heads = heads;
  const Index hidden = mlp_ratio * dim;
  b.norm1_gain = params.add(prefix + ".norm1.gain", init_const<S>({dim}, S(1)));
  b.norm1_bias = params.add(prefix + ".norm1.bias", init_const<S>({dim}, S(0)));
  b.qkv_weight = params.add(prefix + ".attn.qkv.weight", init_weight<S>({dim, 3 * dim}, rng));
  b.qkv_bias = params.add(prefix + ".attn.qkv.bias", init_const<S>({3 * dim}, S(0)));
  b.proj_weight = params.add(prefix + ".attn.proj.weight", init_weight<S>({dim, dim}, rng));
  b.proj_bias = params.add(prefix + ".attn.proj.bias", init_const<S>({dim}, S(0)));
  b.relative_bias = params.add(prefix + ".attn.relative_bias",
                               init_weight<S>({(2 * window - 1) * (2 * window - 1), heads}, rng));
  b.norm2_gain = params.add(prefix + ".norm2.gain", init_const<S>({dim}, S(1)));
  b.norm2_bias = params.add(prefix + ".norm2.bias", init_const<S>({dim}, S(0)));
  b.fc1_weight = params.add(prefix + ".mlp.fc1.weight", init_weight<S>({dim, hidden}, rng));
  b.fc1_bias = params.add(prefix + ".mlp.fc1.bias", init_const<S>({hidden}, S(0)));
  b.fc2_weight = params.add(prefix + ".mlp.fc2.weight", init_weight<S>({hidden, dim}, rng));
  b.fc2_bias = params.add(prefix + ".mlp.fc2.bias", init_const<S>({dim}, S(0)));
  return b;
}

template <typename S>
Tensor<S> patch_partition(const Tensor<S>& images) {
  if (images.rank() == 3) {
    Tensor<S> batched = reshape(images, {1, images.dim(0), images.dim(1), images.dim(2)});
    Tensor<S> out = patch_partition(batched);
    return reshape(out, {out.dim(1), out.dim(2)});
  }
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw DimensionError("patch_partition: expected [B, 3, H, W], got " +
                         shape_str(images.shape()));
  }
  const Index b = images.dim(0), h = images.dim(2), w = images.dim(3);
  if (h % 4 != 0 || w % 4 != 0) {
    throw ConfigError("patch_partition: image " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible into 4x4 patches");
  }
  Tensor<S> t = reshape(images, {b, 3, h / 4, 4, w / 4, 4});
  t = permute(t, {0, 2, 4, 3, 5, 1});
  return reshape(t, {b, (h / 4) * (w / 4), 48});
}

template <typename S>
Tensor<S> patch_unpartition(const Tensor<S>& tokens, Index image_h, Index image_w) {
  if (image_h % 4 != 0 || image_w % 4 != 0) {
    throw ConfigError("patch_unpartition: image extents must be multiples of 4");
  }
  const Index n = (image_h / 4) * (image_w / 4);
  if (tokens.dim(-1) != 48 || tokens.numel() % (n * 48) != 0) {
    throw DimensionError("patch_unpartition: tokens " + shape_str(tokens.shape()) +
                         " do not tile a " + std::to_string(image_h) + "x" +
                         std::to_string(image_w) + " image");
  }
  const Index b = tokens.numel() / (n * 48);
  Tensor<S> t = reshape(tokens, {b, image_h / 4, image_w / 4, 4, 4, 3});
  t = permute(t, {0, 5, 1, 3, 2, 4});
  if (tokens.rank() == 2) return reshape(t, {3, image_h, image_w});
  return reshape(t, {b, 3, image_h, image_w});
}

template <typename S>
Tensor<S> linear_embed(const Tensor<S>& tokens, const Tensor<S>& embedding, const Tensor<S>& bias) {
  if (tokens.dim(-1) != 48) {
    throw DimensionError("linear_embed: tokens must have 48 features, got " +
                         shape_str(tokens.shape()));
  }
  return linear(tokens, embedding, bias);
}

template <typename S>
Tensor<S> swin_block(const Tensor<S>& grid, const SwinBlockParams<S>& p,
                     const WindowGeometry& geo, Tensor<S>* attention) {
  if (grid.rank() != 4 || grid.dim(1) != geo.grid_h || grid.dim(2) != geo.grid_w) {
    throw ConfigError("swin_block: grid " + shape_str(grid.shape()) + " does not match a " +
                      std::to_string(geo.grid_h) + "x" + std::to_string(geo.grid_w) +
                      " window layout");
  }
  const Index b = grid.dim(0), d = grid.dim(3), heads = p.heads, hd = d / heads;
  const Index nw = geo.windows(), n = geo.tokens_per_window(), tokens = geo.grid_h * geo.grid_w;
  const Index groups = b * nw;

  Tensor<S> h = layer_norm(grid, p.norm1_gain, p.norm1_bias);
  h = gather(reshape(h, {b, tokens, d}), 1, geo.partition);
  h = reshape(h, {groups, n, d});

  Tensor<S> qkv = linear(h, p.qkv_weight, p.qkv_bias);
  qkv = permute(reshape(qkv, {groups, n, 3, heads, hd}), {2, 0, 3, 1, 4});
  auto part = [&](Index i) { return reshape(gather(qkv, 0, {i}), {groups * heads, n, hd}); };
  Tensor<S> q = scale(part(0), static_cast<S>(1.0 / std::sqrt(double(hd))));
  Tensor<S> k = part(1);
  Tensor<S> v = part(2);

  Tensor<S> logits = reshape(matmul(q, k, false, true), {groups, heads, n, n});
  Tensor<S> bias = gather(p.relative_bias, 0, geo.relative_index);  // [n*n, heads]
  bias = reshape(permute(bias, {1, 0}), {heads, n, n});
  logits = add(logits, bias);
  if (!geo.mask.empty()) {
    Tensor<S> mask({nw, heads, n, n});
    for (Index w = 0; w < nw; ++w) {
      for (Index hh = 0; hh < heads; ++hh) {
        for (Index e = 0; e < n * n; ++e) {
          mask.value()[(w * heads + hh) * n * n + e] =
              static_cast<S>(geo.mask[static_cast<std::size_t>(w * n * n + e)]);
        }
      }
    }
    logits = reshape(add(reshape(logits, {b, nw, heads, n, n}), mask), {groups, heads, n, n});
  }
  Tensor<S> weights = softmax(logits, -1);
  if (attention) *attention = weights;

  Tensor<S> out = matmul(reshape(weights, {groups * heads, n, n}), v);
  out = reshape(permute(reshape(out, {groups, heads, n, hd}), {0, 2, 1, 3}), {groups, n, d});
  out = linear(out, p.proj_weight, p.proj_bias);
  out = gather(reshape(out, {b, tokens, d}), 1, geo.unpartition);
  Tensor<S> x = add(grid, reshape(out, grid.shape()));

  Tensor<S> m = layer_norm(x, p.norm2_gain, p.norm2_bias);
  m = linear(gelu(linear(m, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
  return add(x, m);
}

namespace {

// Row order of the 2x2 neighbourhood: (dy, dx) = (0,0), (1,0), (0,1), (1,1).
std::vector<Index> merge_index(Index h, Index w) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(h * w));
  for (Index i = 0; i < h / 2; ++i) {
    for (Index j = 0; j < w / 2; ++j) {
      for (Index s = 0; s < 4; ++s) {
        const Index dy = s % 2, dx = s / 2;
        idx.push_back((2 * i + dy) * w + (2 * j + dx));
      }
    }
  }
  return idx;
}

}  // namespace

template <typename S>
Tensor<S> patch_merging(const Tensor<S>& grid, const Tensor<S>& reduction) {
  if (grid.rank() != 4) throw DimensionError("patch_merging: expected [B, h, w, d]");
  const Index b = grid.dim(0), h = grid.dim(1), w = grid.dim(2), d = grid.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("patch_merging: grid " + std::to_string(h) + "x" + std::to_string(w) +
                      " has an odd extent");
  }
  if (reduction.rank() != 2 || reduction.dim(0) != 4 * d) {
    throw DimensionError("patch_merging: reduction " + shape_str(reduction.shape()) +
                         " does not take " + std::to_string(4 * d) + " inputs");
  }
  Tensor<S> t = gather(reshape(grid, {b, h * w, d}), 1, merge_index(h, w));
  t = reshape(t, {b, h / 2, w / 2, 4 * d});
  return linear(t, reduction, Tensor<S>());
}

template <typename S>
Tensor<S> patch_expanding(const Tensor<S>& grid, const Tensor<S>& expansion) {
  if (grid.rank() != 4) throw DimensionError("patch_expanding: expected [B, h, w, D]");
  const Index b = grid.dim(0), h = grid.dim(1), w = grid.dim(2), d = grid.dim(3);
  if (expansion.rank() != 2 || expansion.dim(0) != d || expansion.dim(1) != 2 * d || d % 2 != 0) {
    throw DimensionError("patch_expanding: expansion " + shape_str(expansion.shape()) +
                         " must map " + std::to_string(d) + " to " + std::to_string(2 * d));
  }
  Tensor<S> t = linear(grid, expansion, Tensor<S>());  // [b, h, w, 2d] = four slots of d/2
  t = reshape(t, {b, h * w * 4, d / 2});
  // Output position (y, x) reads slot (y%2) + 2*(x%2) of token (y/2, x/2).
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(4 * h * w));
  for (Index y = 0; y < 2 * h; ++y) {
    for (Index x = 0; x < 2 * w; ++x) {
      idx.push_back(((y / 2) * w + x / 2) * 4 + (y % 2) + 2 * (x % 2));
    }
  }
  t = gather(t, 1, idx);
  return reshape(t, {b, 2 * h, 2 * w, d / 2});
}

template <typename S>
Tensor<S> encoder_head(const Tensor<S>& features, const Tensor<S>& weight, const Tensor<S>& bias,
                       Index expected_symbols) {
  if (weight.rank() != 2 || features.dim(-1) != weight.dim(0)) {
    throw DimensionError("encoder_head: features " + shape_str(features.shape()) +
                         " do not match weight " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != expected_symbols) {
    throw ConfigError("encoder_head: weight produces " + std::to_string(weight.dim(1)) +
                      " symbols, config expects " + std::to_string(expected_symbols));
  }
  return linear(features, weight, bias);
}

template <typename S>
StscModel<S>::StscModel(const StscConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Index c = config_.embed_dim, w = config_.window_size, r = config_.mlp_ratio;
  const Index h1 = config_.stage1_heads(), h2 = config_.stage2_heads();
  const Index gh = config_.image_h / 4, gw = config_.image_w / 4;
  geo1_regular_ = WindowGeometry::make(gh, gw, w, false);
  geo1_shifted_ = WindowGeometry::make(gh, gw, w, true);
  geo2_regular_ = WindowGeometry::make(gh / 2, gw / 2, w, false);
  geo2_shifted_ = WindowGeometry::make(gh / 2, gw / 2, w, true);
  const Index w1 = geo1_regular_.window, w2 = geo2_regular_.window;
  const Index features = (gh / 2) * (gw / 2) * 2 * c;
  const Index k = config_.symbol_count();

  auto& P = params_;
  embed_w_ = P.add("enc.embed.weight", init_weight<S>({48, c}, rng));
  embed_b_ = P.add("enc.embed.bias", init_const<S>({c}, S(0)));
  enc1_[0] = SwinBlockParams<S>::create(P, "enc.stage1.block0", c, h1, w1, r, rng);
  enc1_[1] = SwinBlockParams<S>::create(P, "enc.stage1.block1", c, h1, w1, r, rng);
  reduction_ = P.add("enc.merge.reduction", init_weight<S>({4 * c, 2 * c}, rng));
  enc2_[0] = SwinBlockParams<S>::create(P, "enc.stage2.block0", 2 * c, h2, w2, r, rng);
  enc2_[1] = SwinBlockParams<S>::create(P, "enc.stage2.block1", 2 * c, h2, w2, r, rng);
  head_w_ = P.add("enc.head.weight", init_weight<S>({features, k}, rng));
  head_b_ = P.add("enc.head.bias", init_const<S>({k}, S(0)));

  lift_w_ = P.add("dec.lift.weight", init_weight<S>({k, features}, rng));
  lift_b_ = P.add("dec.lift.bias", init_const<S>({features}, S(0)));
  dec2_[0] = SwinBlockParams<S>::create(P, "dec.stage2.block0", 2 * c, h2, w2, r, rng);
  dec2_[1] = SwinBlockParams<S>::create(P, "dec.stage2.block1", 2 * c, h2, w2, r, rng);
  expansion_ = P.add("dec.expand.weight", init_weight<S>({2 * c, 4 * c}, rng));
  dec1_[0] = SwinBlockParams<S>::create(P, "dec.stage1.block0", c, h1, w1, r, rng);
  dec1_[1] = SwinBlockParams<S>::create(P, "dec.stage1.block1", c, h1, w1, r, rng);
  unembed_w_ = P.add("dec.unembed.weight", init_weight<S>({c, 48}, rng));
  unembed_b_ = P.add("dec.unembed.bias", init_const<S>({48}, S(0)));
}

template <typename S>
Tensor<S> StscModel<S>::encode(const Tensor<S>& images) {
  if (images.rank() == 3) {
    return reshape(encode(reshape(images, {1, images.dim(0), images.dim(1), images.dim(2)})),
                   {symbol_count()});
  }
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != config_.image_h ||
      images.dim(3) != config_.image_w) {
    throw DimensionError("encode: expected [B, 3, " + std::to_string(config_.image_h) + ", " +
                         std::to_string(config_.image_w) + "], got " + shape_str(images.shape()));
  }
  const Index b = images.dim(0), c = config_.embed_dim;
  const Index gh = config_.image_h / 4, gw = config_.image_w / 4;
  Tensor<S> t = patch_partition(images);
  trace_.tokens = t.shape();
  Tensor<S> g = reshape(linear_embed(t, embed_w_, embed_b_), {b, gh, gw, c});
  g = swin_block(g, enc1_[0], geo1_regular_);
  g = swin_block(g, enc1_[1], geo1_shifted_);
  trace_.stage1 = g.shape();
  g = patch_merging(g, reduction_);
  g = swin_block(g, enc2_[0], geo2_regular_);
  g = swin_block(g, enc2_[1], geo2_shifted_);
  trace_.stage2 = g.shape();
  Tensor<S> s = encoder_head(reshape(g, {b, g.numel() / b}), head_w_, head_b_, symbol_count());
  trace_.symbols = s.shape();
  return s;
}

template <typename S>
Tensor<S> StscModel<S>::decode(const Tensor<S>& symbols) {
  const Index k = symbol_count();
  if (symbols.rank() == 1) {
    if (symbols.dim(0) != k) {
      throw DimensionError("decode: expected " + std::to_string(k) + " symbols, got " +
                           shape_str(symbols.shape()));
    }
    return reshape(decode(reshape(symbols, {1, k})), {3, config_.image_h, config_.image_w});
  }
  if (symbols.rank() != 2 || symbols.dim(1) != k) {
    throw DimensionError("decode: expected [B, " + std::to_string(k) + "], got " +
                         shape_str(symbols.shape()));
  }
  const Index b = symbols.dim(0), c = config_.embed_dim;
  const Index gh = config_.image_h / 4, gw = config_.image_w / 4;
  Tensor<S> g = reshape(linear(symbols, lift_w_, lift_b_), {b, gh / 2, gw / 2, 2 * c});
  g = swin_block(g, dec2_[0], geo2_regular_);
  g = swin_block(g, dec2_[1], geo2_shifted_);
  g = patch_expanding(g, expansion_);
  g = swin_block(g, dec1_[0], geo1_regular_);
  g = swin_block(g, dec1_[1], geo1_shifted_);
  Tensor<S> t = reshape(linear(g, unembed_w_, unembed_b_), {b, gh * gw, 48});
  return sigmoid(patch_unpartition(t, config_.image_h, config_.image_w));
}

template <typename S>
ModelConfig StscModel<S>::model_config() const {
  return ModelConfig{ModelKind::Stsc, config_};
}

#define FSSC_INSTANTIATE_SWIN(S)                                                            \
  template struct SwinBlockParams<S>;                                                       \
  template class StscModel<S>;                                                              \
  template Tensor<S> patch_partition(const Tensor<S>&);                                     \
  template Tensor<S> patch_unpartition(const Tensor<S>&, Index, Index);                     \
  template Tensor<S> linear_embed(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);    \
  template Tensor<S> swin_block(const Tensor<S>&, const SwinBlockParams<S>&,                \
                                const WindowGeometry&, Tensor<S>*);                         \
  template Tensor<S> patch_merging(const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> patch_expanding(const Tensor<S>&, const Tensor<S>&);                   \
  template Tensor<S> encoder_head(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index);

FSSC_INSTANTIATE_SWIN(float)
FSSC_INSTANTIATE_SWIN(double)

}  // namespace fssc
