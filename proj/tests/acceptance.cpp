// Acceptance run: one PASS/FAIL line per criterion, then the figures that
// back it. Criteria 7 to 9 train the desk preset, which takes minutes.
//
//   acceptance [out_dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fssc/baseline/ldpc.hpp"
#include "fssc/baseline/qpsk.hpp"
#include "fssc/channel.hpp"
#include "fssc/federated.hpp"
#include "fssc/harness.hpp"
#include "fssc/swin.hpp"
#include "gradcheck.hpp"

using namespace fssc;
using fssc::testing::gradcheck;
using fssc::testing::random_tensor;
using T = Tensor<double>;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  failures += !v.pass;
  std::printf("%s %d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(),
              v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const SweepRow* find_row(const std::vector<SweepRow>& rows, const std::string& model, double snr) {
  for (const auto& r : rows) {
    if (r.model == model && r.snr_db && *r.snr_db == snr) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------- 1

Verdict gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::vector<std::pair<std::string, double>> results;
  auto check = [&](const std::string& name, const std::function<T()>& f, const std::vector<T>& in) {
    results.emplace_back(name, gradcheck(f, in).max_rel_error);
  };

  const T a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  const T row = random_tensor({4}, rng), one = random_tensor({1}, rng);
  check("add", [&] { return add(a, row); }, {a, row});
  check("sub", [&] { return sub(a, one); }, {a, one});
  check("mul", [&] { return mul(a, b); }, {a, b});
  check("scale", [&] { return scale(a, 0.7); }, {a});
  check("gelu", [&] { return gelu(a); }, {a});
  check("sigmoid", [&] { return sigmoid(a); }, {a});
  const T m = random_tensor({4, 5}, rng), bm = random_tensor({2, 3, 4}, rng),
          bn = random_tensor({2, 5, 4}, rng);
  check("matmul", [&] { return matmul(a, m); }, {a, m});
  check("matmul_t", [&] { return matmul(a, b, true, false); }, {a, b});
  check("matmul_batched", [&] { return matmul(bm, bn, false, true); }, {bm, bn});
  const T w = random_tensor({4, 6}, rng), bias = random_tensor({6}, rng);
  check("linear", [&] { return linear(bm, w, bias); }, {bm, w, bias});
  check("softmax", [&] { return softmax(bm, 1); }, {bm});
  const T gain = random_tensor({4}, rng), shift = random_tensor({4}, rng);
  check("layer_norm", [&] { return layer_norm(bm, gain, shift); }, {bm, gain, shift});
  check("reshape", [&] { return reshape(bm, {6, 4}); }, {bm});
  check("permute", [&] { return permute(bm, {2, 0, 1}); }, {bm});
  check("gather", [&] { return gather(bm, 2, {3, 0, 3}); }, {bm});
  check("sum", [&] { return sum(a); }, {a});
  check("mean", [&] { return mean(a); }, {a});
  check("mse_loss", [&] { return mse_loss(a, b); }, {a, b});
  const T img = random_tensor({2, 3, 6, 6}, rng), k = random_tensor({4, 3, 3, 3}, rng),
          kb = random_tensor({4}, rng), low = random_tensor({2, 4, 3, 3}, rng),
          cb = random_tensor({3}, rng);
  check("conv2d", [&] { return conv2d(img, k, kb, 2); }, {img, k, kb});
  check("conv2d_transposed", [&] { return conv2d_transposed(low, k, cb, 2); }, {low, k, cb});
  const T sym = random_tensor({2, 10}, rng);
  check("power_normalize", [&] { return power_normalize(sym); }, {sym});
  check("transmit", [&] {
    Rng noise(5);
    return transmit(sym, ChannelSpec{ChannelFamily::Awgn, 3.0, 0}, noise);
  }, {sym});

  const T pix = random_tensor({2, 3, 8, 8}, rng);
  check("patch_partition", [&] { return patch_partition(pix); }, {pix});
  const T tok = random_tensor({2, 4, 48}, rng), emb = random_tensor({48, 8}, rng),
          eb = random_tensor({8}, rng);
  check("linear_embed", [&] { return linear_embed(tok, emb, eb); }, {tok, emb, eb});
  ModelParams<double> block_params;
  Rng init(3);
  auto block = SwinBlockParams<double>::create(block_params, "blk", 8, 2, 2, 2, init);
  for (auto& [name, t] : block_params) t.value() = random_tensor(t.shape(), rng, 1.0, false).value();
  const auto geo = WindowGeometry::make(4, 4, 2, true);
  const T grid = random_tensor({1, 4, 4, 8}, rng);
  std::vector<T> block_inputs = {grid};
  for (auto& [name, t] : block_params) block_inputs.push_back(t);
  check("swin_block_shifted", [&] { return swin_block(grid, block, geo); }, block_inputs);
  const T red = random_tensor({32, 16}, rng), up = random_tensor({8, 16}, rng);
  check("patch_merging", [&] { return patch_merging(grid, red); }, {grid, red});
  check("patch_expanding", [&] { return patch_expanding(grid, up); }, {grid, up});
  const T feat = random_tensor({2, 12}, rng), hw = random_tensor({12, 5}, rng),
          hb = random_tensor({5}, rng);
  check("encoder_head", [&] { return encoder_head(feat, hw, hb, Index{5}); }, {feat, hw, hb});

  StscConfig tiny;
  tiny.image_h = tiny.image_w = 16;
  tiny.embed_dim = 8;
  tiny.window_size = 2;
  tiny.mlp_ratio = 2;
  tiny.compression_ratio = 0.05;
  const T images = [&] {
    T x({2, 3, 16, 16});
    for (Index i = 0; i < x.numel(); ++i) x.value()[i] = rng.uniform();
    return x;
  }();
  for (ModelKind kind : {ModelKind::Stsc, ModelKind::ConvJscc}) {
    auto model = make_model<double>(ModelConfig{kind, tiny}, 3);
    for (auto& [name, t] : model->params()) {
      if (name.find("weight") != std::string::npos || name.find("relative") != std::string::npos) {
        t.value() *= kind == ModelKind::Stsc ? 10.0 : 3.0;
      }
    }
    std::vector<T> inputs;
    for (auto& [name, t] : model->params()) inputs.push_back(t);
    check(to_string(kind) + "_forward", [&] {
      Rng noise(1);
      return model->forward(images, ChannelSpec{ChannelFamily::Identity}, noise);
    }, inputs);
  }

  auto worst = std::max_element(results.begin(), results.end(),
                                [](auto& x, auto& y) { return x.second < y.second; });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst->second < 1e-4 && secs < 120,
          fmt("%zu checks, worst %s rel err %.2e (tol 1e-4), %.0f s (limit 120)", results.size(),
              worst->first.c_str(), worst->second, secs)};
}

// ---------------------------------------------------------------- 2

Verdict fedavg_algebra() {
  Rng rng(7);
  auto params = [&](double fill, bool random) {
    ModelParams<double> p;
    T x = random ? random_tensor({4, 5}, rng, 1.0, false) : T::full({4, 5}, fill);
    T y = random ? random_tensor({7}, rng, 1.0, false) : T::full({7}, fill);
    p.add("x", x);
    p.add("y", y);
    return p;
  };
  const auto base = params(0, true);
  const auto fixed = fedavg_aggregate<double>({base.clone(), base.clone(), base.clone()}, {3, 11, 5});
  bool fixed_ok = true;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    fixed_ok = fixed_ok && fixed[i].value() == base[i].value();
  }

  const auto two = fedavg_aggregate<double>({params(0.0, false), params(2.0, false)}, {1, 3});
  bool hand_ok = true;
  for (const auto& [name, t] : two) hand_ok = hand_ok && (t.value().array() == 1.5).all();

  const std::vector<Index> sizes = {400, 600, 1000};
  std::vector<ModelParams<double>> clients = {params(0, true), params(0, true), params(0, true)};
  const auto agg = fedavg_aggregate(clients, sizes);
  double err = 0.0;
  for (std::size_t i = 0; i < agg.size(); ++i) {
    for (Index j = 0; j < agg[i].numel(); ++j) {
      double oracle = 0.0;
      for (std::size_t c = 0; c < 3; ++c) oracle += (double(sizes[c]) / 2000.0) * clients[c][i].value()[j];
      err = std::max(err, std::abs(oracle - agg[i].value()[j]));
    }
  }
  return {fixed_ok && hand_ok && err <= 1e-12,
          fmt("fixed point %s, (0,2) weights (1,3) -> 1.5 %s, oracle max err %.1e (tol 1e-12)",
              fixed_ok ? "exact" : "broken", hand_ok ? "exact" : "wrong", err)};
}

// ---------------------------------------------------------------- 3

Verdict shape_ledger() {
  StscConfig c;  // 32x32, C = 32
  StscModel<float> model(c, 1);
  const Tensor<float> x = Tensor<float>::full({1, 3, 32, 32}, 0.5f);
  model.encode(x);
  const auto& t = model.last_trace();
  const Index k = static_cast<Index>(std::lround(0.33 * 3072));
  const bool ok = t.tokens == Shape{1, 64, 48} && t.stage1 == Shape{1, 8, 8, 32} &&
                  t.stage2 == Shape{1, 4, 4, 64} && t.symbols == Shape{1, k};
  return {ok, fmt("tokens [%lld,%lld], stage1 (%lld,%lld,%lld), stage2 (%lld,%lld,%lld), k %lld (want %lld)",
                  (long long)t.tokens[1], (long long)t.tokens[2], (long long)t.stage1[1],
                  (long long)t.stage1[2], (long long)t.stage1[3], (long long)t.stage2[1],
                  (long long)t.stage2[2], (long long)t.stage2[3], (long long)t.symbols[1],
                  (long long)k)};
}

// ---------------------------------------------------------------- 4

Verdict channel_calibration(const std::vector<double>& grid) {
  constexpr Index kSymbols = 1000000;
  const Tensor<double> zero({kSymbols});
  double worst = 0.0;
  std::string at;
  for (double snr : grid) {
    const auto y = apply_channel(zero, ChannelSpec{ChannelFamily::Awgn, snr, 17});
    const double var = y.value().squaredNorm() / double(kSymbols);
    const double rel = std::abs(var / noise_variance(snr) - 1.0);
    if (rel >= worst) {
      worst = rel;
      at = fmt("%.0f dB", snr);
    }
  }
  return {worst < 0.02, fmt("%zu grid points x 1e6 symbols, worst relative deviation %.3f%% at %s (tol 2%%)",
                            grid.size(), 100 * worst, at.c_str())};
}

// ---------------------------------------------------------------- 5

Verdict ldpc_oracle() {
  using namespace fssc::baseline;
  const LdpcCode toy = LdpcCode::regular(12, 3, 6, 1);
  const double snr_db = 6.0;  // Eb/N0 6 dB; Es/N0 = Eb/N0 for rate-1/2 QPSK
  const double noise_var = noise_variance(snr_db);
  Rng rng(5);
  std::vector<Bits> codebook;
  for (std::uint32_t mword = 0; mword < (1u << toy.k()); ++mword) {
    Bits msg(static_cast<std::size_t>(toy.k()));
    for (Index i = 0; i < toy.k(); ++i) msg[static_cast<std::size_t>(i)] = (mword >> i) & 1u;
    codebook.push_back(toy.encode(msg));
  }
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const Bits& sent = codebook[rng.uniform_int(codebook.size())];
    const auto llr = qpsk_demodulate_soft(awgn_complex(qpsk_modulate(sent).symbols, snr_db, rng), noise_var);
    const Bits* ml = nullptr;
    double best = -1e300;
    for (const Bits& c : codebook) {
      double metric = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) metric += c[i] ? -llr[i] : llr[i];
      if (metric > best) best = metric, ml = &c;
    }
    agree += toy.decode(llr).codeword == *ml;
  }

  const LdpcCode code = LdpcCode::regular(1024, 3, 6, 1);
  int exact = 0;
  for (int t = 0; t < 100; ++t) {
    Bits msg(static_cast<std::size_t>(code.k()));
    for (auto& bit : msg) bit = static_cast<std::uint8_t>(rng.uniform_int(2));
    const Bits c = code.encode(msg);
    std::vector<double> llr(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) llr[i] = c[i] ? -30.0 : 30.0;
    const auto r = code.decode(llr);
    exact += r.success && r.message == msg;
  }
  return {agree >= 950 && exact == 100,
          fmt("toy n=12 BP/ML agreement %d/1000 (need 950); n=1024 noiseless %d/100 exact", agree, exact)};
}

// ---------------------------------------------------------------- 6

Verdict cliff(const ExperimentConfig& desk, const std::string& out_dir) {
  ExperimentConfig c = desk;
  c.out_dir = out_dir + "/cliff";
  c.snr_grid.clear();
  for (double s = -2.0; s <= 6.0 + 1e-9; s += 0.5) c.snr_grid.push_back(s);
  c.noise_seeds = 3;
  const auto start = std::chrono::steady_clock::now();
  const BaselineOutput out = cmd_baseline(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double codec = out.rows.front().psnr_mean;
  if (!out.cliff.snr_lo || !out.cliff.snr_hi) return {false, "no cliff found on the grid"};
  double worst = 0.0;
  int above = 0;
  for (const auto& r : out.rows) {
    if (r.snr_db && *r.snr_db > *out.cliff.snr_hi) {
      worst = std::max(worst, std::abs(r.psnr_mean - codec));
      ++above;
    }
  }
  std::string curve;
  for (const auto& r : out.rows) {
    if (r.snr_db) curve += fmt(" %.1f:%.2f", *r.snr_db, *r.failure_rate);
  }
  std::printf("  failure curve (snr:rate, %lld trials each):%s\n", (long long)out.rows[1].samples,
              curve.c_str());
  const bool ok = *out.cliff.snr_lo < *out.cliff.snr_hi && above > 0 && worst <= 0.01 && secs < 600;
  return {ok, fmt("snr_lo %.1f dB, snr_hi %.1f dB, codec %.3f dB, max |psnr - codec| above snr_hi %.4f dB "
                  "over %d points (tol 0.01), sweep %.0f s (limit 600)",
                  *out.cliff.snr_lo, *out.cliff.snr_hi, codec, worst, above, secs)};
}

// ---------------------------------------------------------------- 7-9

struct DeskRun {
  CompareOutput compare;
  std::vector<SweepRow> separate;
  double seconds = 0.0;
};

Verdict learned_vs_classical(const DeskRun& run, const ExperimentConfig& desk) {
  bool ok = true;
  std::string detail;
  for (double snr : desk.snr_grid) {
    if (snr > 4.0) continue;
    const SweepRow* s = find_row(run.compare.rows, "global", snr);
    const SweepRow* b = find_row(run.separate, "separate", snr);
    if (!s || !b) return {false, "missing sweep row"};
    ok = ok && s->psnr_mean > b->psnr_mean;
    detail += fmt("%s%.0f dB stsc %.2f vs separate %.2f (fail %.2f)", detail.empty() ? "" : "; ", snr,
                  s->psnr_mean, b->psnr_mean, *b->failure_rate);
  }
  return {ok, detail};
}

Verdict fed_vs_local(const DeskRun& run, const ExperimentConfig& desk) {
  const auto& cmp = run.compare;
  const SweepRow* g = find_row(cmp.rows, "global", desk.train_snr_db);
  double best_local = -1e300;
  std::string best_name;
  for (std::size_t m = 1; m < cmp.models.size(); ++m) {
    const SweepRow* r = find_row(cmp.rows, cmp.models[m], desk.train_snr_db);
    if (r->psnr_mean > best_local) best_local = r->psnr_mean, best_name = cmp.models[m];
  }
  const double global_train = cmp.federated.rounds.back().global_loss;
  bool loss_ok = true;
  std::string locals;
  for (std::size_t k = 0; k < cmp.local.client_ids.size(); ++k) {
    const double l = cmp.local.rounds.back().client_losses[k];
    loss_ok = loss_ok && global_train <= l;
    locals += fmt(" %s %.5f", cmp.local.client_ids[k].c_str(), l);
  }
  const double margin = g->psnr_mean - best_local;
  std::printf("  test loss at %.0f dB: global %.5f, locals", desk.train_snr_db, cmp.test_losses[0]);
  for (std::size_t m = 1; m < cmp.test_losses.size(); ++m) std::printf(" %.5f", cmp.test_losses[m]);
  std::printf("\n");
  return {margin >= 0.0 && loss_ok && run.seconds < 1800,
          fmt("test PSNR at %.0f dB global %.3f vs best local (%s) %.3f, margin %+.3f dB; "
              "final training loss global %.5f vs locals%s; run %.0f s (limit 1800)",
              desk.train_snr_db, g->psnr_mean, best_name.c_str(), best_local, margin, global_train,
              locals.c_str(), run.seconds)};
}

Verdict monotone(const DeskRun& run, const ExperimentConfig& desk) {
  double worst = 0.0;
  std::string where = "none";
  std::vector<std::string> models = run.compare.models;
  for (const auto& model : models) {
    const SweepRow* prev = nullptr;
    for (const auto& r : run.compare.rows) {
      if (r.model != model || !r.snr_db) continue;
      if (prev && prev->psnr_mean - r.psnr_mean > worst) {
        worst = prev->psnr_mean - r.psnr_mean;
        where = fmt("%s %.0f->%.0f dB", model.c_str(), *prev->snr_db, *r.snr_db);
      }
      prev = &r;
    }
  }
  return {worst <= 0.1, fmt("%zu models x %d noise seeds, largest drop %.4f dB (%s, tol 0.1)",
                            models.size(), static_cast<int>(desk.noise_seeds), worst, where.c_str())};
}

// ---------------------------------------------------------------- 10

Verdict determinism(const ExperimentConfig& desk, const std::string& out_dir) {
  ExperimentConfig c = desk;
  c.federated.rounds = 2;
  c.out_dir = out_dir + "/determinism_a";
  const auto a = cmd_train(c);
  c.out_dir = out_dir + "/determinism_b";
  const auto b = cmd_train(c);
  const std::string x = slurp(a.rounds_csv), y = slurp(b.rounds_csv);
  const bool ok = !x.empty() && x == y && slurp(a.checkpoint) == slurp(b.checkpoint);
  return {ok, fmt("desk preset, 2 rounds twice: round CSV %zu bytes %s, checkpoints %s", x.size(),
                  x == y ? "identical" : "DIFFER",
                  slurp(a.checkpoint) == slurp(b.checkpoint) ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "acceptance_out";
  std::filesystem::create_directories(out_dir);
  ExperimentConfig desk = preset_config("desk");
  desk.out_dir = out_dir + "/desk";

  report(1, "gradient suite", gradient_suite);
  report(2, "fedavg algebra", fedavg_algebra);
  report(3, "shape ledger", shape_ledger);
  report(4, "channel calibration", [&] { return channel_calibration(desk.snr_grid); });
  report(5, "ldpc oracle", ldpc_oracle);
  report(6, "cliff and saturation", [&] { return cliff(desk, out_dir); });

  DeskRun run;
  std::string desk_error;
  try {
    const auto start = std::chrono::steady_clock::now();
    run.compare = cmd_compare_fed(desk);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<double> low;
    for (double s : desk.snr_grid) {
      if (s <= 4.0) low.push_back(s);
    }
    run.separate = sweep_separate(load_datasets(desk).test, desk, low);
    std::printf("  desk run: %zu federated rounds%s, %zu local rounds, %.0f s\n",
                run.compare.federated.rounds.size(),
                run.compare.federated.stopped_early ? " (early stop)" : "",
                run.compare.local.rounds.size(), run.seconds);
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto desk_check = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!desk_error.empty()) return {false, "desk run failed: " + desk_error};
      return fn();
    };
  };
  report(7, "learned beats separate at <= 4 dB",
         desk_check([&] { return learned_vs_classical(run, desk); }));
  report(8, "federated beats local", desk_check([&] { return fed_vs_local(run, desk); }));
  report(9, "monotone psnr", desk_check([&] { return monotone(run, desk); }));
  report(10, "determinism", [&] { return determinism(desk, out_dir); });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
