#include "doctest.h"

#include <cstdio>
#include <set>

#include "fssc/channel.hpp"
#include "fssc/conv_jscc.hpp"
#include "fssc/ops.hpp"
#include "fssc/swin.hpp"
#include "gradcheck.hpp"

using namespace fssc;
using fssc::testing::gradcheck;
using fssc::testing::random_tensor;
using T = Tensor<double>;

namespace {

StscConfig tiny_config() {
  StscConfig c;
  c.image_h = c.image_w = 16;
  c.embed_dim = 8;
  c.window_size = 2;
  c.mlp_ratio = 2;
  c.compression_ratio = 0.05;
  return c;
}

T random_images(Index b, Index h, Index w, Rng& rng) {
  T x({b, 3, h, w});
  for (Index i = 0; i < x.numel(); ++i) x.value()[i] = rng.uniform();
  return x;
}

}  // namespace

TEST_CASE("config validation") {
  StscConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.symbol_count() == 1014);
  c.image_h = 36;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = StscConfig{};
  c.window_size = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = StscConfig{};
  c.heads_stage1 = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = StscConfig{};
  c.compression_ratio = 1e-6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("patch partition") {
  Rng rng(1);
  const T img = random_images(1, 32, 32, rng);
  const T one = reshape(img, {3, 32, 32});
  const T tokens = patch_partition(one);
  CHECK(tokens.shape() == Shape{64, 48});
  // Token 9 is patch (row 1, col 1); feature (py, px, ch) is at (py*4+px)*3+ch.
  CHECK(tokens.value()[9 * 48 + (2 * 4 + 3) * 3 + 1] == img.value()[1 * 1024 + 6 * 32 + 7]);
  CHECK(patch_unpartition(patch_partition(img), 32, 32).value() == img.value());
  const T flat = patch_partition(T::full({3, 8, 8}, 0.25));
  CHECK((flat.value().array() == 0.25).all());
  CHECK_THROWS_AS(patch_partition(T::zeros({1, 3, 10, 8})), ConfigError);
}

TEST_CASE("linear embed") {
  Rng rng(2);
  T tokens = random_tensor({5, 48}, rng);
  CHECK(linear_embed(tokens, T::zeros({48, 32}), T::zeros({32})).value().isZero());
  CHECK(StscConfig{}.embed_dim == 32);
  T e = random_tensor({48, 6}, rng), b = random_tensor({6}, rng);
  CHECK(gradcheck([&] { return linear_embed(tokens, e, b); }, {tokens, e, b}).max_rel_error < 1e-6);
  CHECK_THROWS_AS(linear_embed(random_tensor({5, 47}, rng), e, b), DimensionError);
}

TEST_CASE("window geometry") {
  const auto g = WindowGeometry::make(8, 8, 4, true);
  CHECK(g.shift == 2);
  CHECK(g.windows() == 4);
  std::set<Index> seen(g.partition.begin(), g.partition.end());
  CHECK(seen.size() == 64);
  for (Index t = 0; t < 64; ++t) CHECK(g.partition[g.unpartition[t]] == t);
  const auto single = WindowGeometry::make(2, 2, 4, true);
  CHECK(single.window == 2);
  CHECK(single.shift == 0);
  CHECK(single.mask.empty());
  CHECK_THROWS_AS(WindowGeometry::make(6, 6, 4, false), ConfigError);
}

TEST_CASE("swin block residual identity and attention") {
  Rng rng(3);
  ModelParams<double> params;
  auto p = SwinBlockParams<double>::create(params, "b", 8, 2, 4, 4, rng);
  for (T* t : {&p.qkv_weight, &p.qkv_bias, &p.proj_weight, &p.proj_bias, &p.fc1_weight,
               &p.fc1_bias, &p.fc2_weight, &p.fc2_bias}) {
    t->value().setZero();
  }
  CHECK(p.relative_bias.shape() == Shape{49, 2});
  const T grid = random_tensor({2, 8, 8, 8}, rng, 1.0, false);
  for (bool shifted : {false, true}) {
    const auto geo = WindowGeometry::make(8, 8, 4, shifted);
    CHECK(swin_block(grid, p, geo).value() == grid.value());
  }

  ModelParams<double> fresh;
  auto q = SwinBlockParams<double>::create(fresh, "b", 8, 2, 4, 4, rng);
  for (T* t : {&q.qkv_weight, &q.relative_bias}) t->value() *= 50.0;
  const auto geo = WindowGeometry::make(8, 8, 4, true);
  T attention;
  swin_block(grid, q, geo, &attention);
  REQUIRE(attention.shape() == Shape{8, 2, 16, 16});
  const auto rows = attention.matrix(8 * 2 * 16, 16);
  CHECK((rows.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  double worst = 0.0;
  Index masked = 0;
  for (Index g = 0; g < 8; ++g) {
    const Index w = g % 4;
    for (Index h = 0; h < 2; ++h) {
      for (Index e = 0; e < 256; ++e) {
        if (geo.mask[static_cast<std::size_t>(w * 256 + e)] == 0.0) continue;
        ++masked;
        worst = std::max(worst, attention.value()[(g * 2 + h) * 256 + e]);
      }
    }
  }
  CHECK(masked > 0);
  CHECK(worst < 1e-8);
  CHECK_THROWS_AS(swin_block(random_tensor({1, 6, 6, 8}, rng), q, geo), ConfigError);
}

TEST_CASE("patch merging and expanding") {
  Rng rng(4);
  const T grid = random_tensor({1, 8, 8, 32}, rng, 1.0, false);
  CHECK(patch_merging(grid, random_tensor({128, 64}, rng)).shape() == Shape{1, 4, 4, 64});

  T sel = T::zeros({16, 8});
  for (Index i = 0; i < 8; ++i) sel.value()[i * 8 + i] = 1.0;
  const T small = random_tensor({1, 4, 4, 4}, rng, 1.0, false);
  const T merged = patch_merging(small, sel);
  // First 2d columns of identity keep neighbour (0,0) and neighbour (1,0).
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      for (Index c = 0; c < 4; ++c) {
        CHECK(merged.value()[(i * 2 + j) * 8 + c] == small.value()[((2 * i) * 4 + 2 * j) * 4 + c]);
        CHECK(merged.value()[(i * 2 + j) * 8 + 4 + c] ==
              small.value()[((2 * i + 1) * 4 + 2 * j) * 4 + c]);
      }
    }
  }
  T g4 = random_tensor({1, 4, 4, 4}, rng), red = random_tensor({16, 8}, rng);
  CHECK(gradcheck([&] { return patch_merging(g4, red); }, {g4, red}).max_rel_error < 1e-5);
  CHECK_THROWS_AS(patch_merging(random_tensor({1, 3, 4, 4}, rng), red), ConfigError);

  // Expanding undoes the 2x2 concatenation when neighbour s lands in output slot s.
  T eye16 = T::zeros({16, 16});
  for (Index i = 0; i < 16; ++i) eye16.value()[i * 16 + i] = 1.0;
  const T cat = patch_merging(small, eye16);
  T up = T::zeros({16, 32});
  for (Index n = 0; n < 4; ++n) {
    for (Index c = 0; c < 4; ++c) up.value()[(n * 4 + c) * 32 + n * 8 + c] = 1.0;
  }
  const T back = patch_expanding(cat, up);
  REQUIRE(back.shape() == Shape{1, 4, 4, 8});
  for (Index t = 0; t < 16; ++t) {
    for (Index c = 0; c < 4; ++c) CHECK(back.value()[t * 8 + c] == small.value()[t * 4 + c]);
  }
  T ex = random_tensor({1, 2, 2, 4}, rng), ew = random_tensor({4, 8}, rng);
  CHECK(gradcheck([&] { return patch_expanding(ex, ew); }, {ex, ew}).max_rel_error < 1e-5);
}

TEST_CASE("encoder head") {
  Rng rng(5);
  T f = random_tensor({2, 8}, rng);
  CHECK(encoder_head(f, T::zeros({8, 3}), T::zeros({3}), 3).value().isZero());
  T w = random_tensor({8, 3}, rng), b = random_tensor({3}, rng);
  CHECK(gradcheck([&] { return encoder_head(f, w, b, 3); }, {f, w, b}).max_rel_error < 1e-6);
  CHECK_THROWS_AS(encoder_head(f, w, b, 4), ConfigError);
  StscModel<float> model(StscConfig{}, 1);
  CHECK(model.params().at("enc.head.weight").shape() == Shape{1024, 1014});
}

TEST_CASE("shape ledger for 32x32, C=32") {
  StscModel<float> model(StscConfig{}, 7);
  Rng rng(6);
  const auto x = random_images(1, 32, 32, rng).cast<float>();
  const auto s = model.encode(x);
  const auto& tr = model.last_trace();
  CHECK(tr.tokens == Shape{1, 64, 48});
  CHECK(tr.stage1 == Shape{1, 8, 8, 32});
  CHECK(tr.stage2 == Shape{1, 4, 4, 64});
  CHECK(s.shape() == Shape{1, 1014});
  const auto y = model.decode(s);
  CHECK(y.shape() == Shape{1, 3, 32, 32});
  CHECK(y.value().allFinite());
  CHECK(y.value().minCoeff() > 0.0f);
  CHECK(y.value().maxCoeff() < 1.0f);
  CHECK(model.decode(Tensor<float>::zeros({1014})).shape() == Shape{3, 32, 32});
  CHECK_THROWS_AS(model.decode(Tensor<float>::zeros({1, 1000})), DimensionError);
}

TEST_CASE("same config gives the same parameter schema") {
  StscModel<float> a(StscConfig{}, 1), b(StscConfig{}, 2);
  CHECK(a.params().schema_mismatch(b.params()).empty());
  CHECK(a.params()[0].value() != b.params()[0].value());
}

TEST_CASE("composed STSC forward passes the gradient check") {
  StscModel<double> model(tiny_config(), 3);
  Rng rng(7);
  const T x = random_images(2, 16, 16, rng);
  // Larger weights so the check is not dominated by near-linear behaviour.
  for (auto& [name, t] : model.params()) {
    if (name.find("weight") != std::string::npos || name.find("relative") != std::string::npos) {
      t.value() *= 10.0;
    }
  }
  std::vector<T> inputs;
  for (auto& [name, t] : model.params()) inputs.push_back(t);
  const ChannelSpec identity{ChannelFamily::Identity};
  const auto r = gradcheck(
      [&] {
        Rng noise(1);
        return model.forward(x, identity, noise);
      },
      inputs);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("every parameter receives a finite gradient") {
  for (ModelKind kind : {ModelKind::Stsc, ModelKind::ConvJscc}) {
    ModelConfig mc{kind, tiny_config()};
    auto model = make_model<double>(mc, 4);
    Rng rng(8);
    const T x = random_images(2, 16, 16, rng);
    Tape<double> tape;
    TapeScope<double> scope(tape);
    Rng noise(2);
    T loss = mse_loss(model->forward(x, {ChannelFamily::Awgn, 10.0}, noise), x);
    tape.backward(loss);
    for (const auto& [name, t] : model->params()) {
      INFO(name);
      REQUIRE(t.has_grad());
      CHECK(t.grad().allFinite());
    }
    CHECK(model->params()[0].grad().norm() > 0.0);
  }
}

TEST_CASE("conv JSCC model") {
  ModelConfig mc{ModelKind::ConvJscc, StscConfig{}};
  auto conv = make_model<float>(mc, 5);
  CHECK(conv->symbol_count() == StscModel<float>(StscConfig{}, 5).symbol_count());
  CHECK(conv->params().at("enc.head.weight").shape() == Shape{2048, 1014});
  Rng rng(9);
  const auto x = random_images(2, 32, 32, rng).cast<float>();
  const auto s = conv->encode(x);
  CHECK(s.shape() == Shape{2, 1014});
  const auto y = conv->decode(s);
  CHECK(y.shape() == Shape{2, 3, 32, 32});
  CHECK(y.value().minCoeff() > 0.0f);
  CHECK(y.value().maxCoeff() < 1.0f);
  CHECK(conv->decode(Tensor<float>::zeros({1014})).shape() == Shape{3, 32, 32});
}

TEST_CASE("checkpoint round trip") {
  for (ModelKind kind : {ModelKind::Stsc, ModelKind::ConvJscc}) {
    auto model = make_model<float>({kind, tiny_config()}, 11);
    const std::string path = "test_model_ckpt.bin";
    save_checkpoint(path, *model);
    auto loaded = load_checkpoint<float>(path);
    CHECK(loaded->model_config() == model->model_config());
    for (std::size_t i = 0; i < model->params().size(); ++i) {
      CHECK(loaded->params()[i].value() == model->params()[i].value());
    }
    std::remove(path.c_str());
  }
  CHECK_THROWS_AS(load_checkpoint<float>("does/not/exist.bin"), FileError);
  {
    std::FILE* f = std::fopen("junk.bin", "wb");
    std::fputs("NOTACKPT", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint<float>("junk.bin"), FormatError);
  std::remove("junk.bin");
  CHECK(model_kind_from_string("conv_jscc") == ModelKind::ConvJscc);
  CHECK_THROWS_AS(model_kind_from_string("bpg"), ConfigError);
}
