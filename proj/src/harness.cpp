#include "fssc/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>

#include "fssc/baseline/pipeline.hpp"
#include "fssc/errors.hpp"
#include "fssc/json_io.hpp"
#include "fssc/metrics.hpp"

namespace fssc {

namespace {

constexpr std::uint64_t kSweepTag = 20, kSeparateTag = 21, kTestLossTag = 22;

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const char* what, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(std::string("unknown ") + what + " field '" + key + "'");
    }
  }
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileError("cannot write '" + path + "'");
  return os;
}

void prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FileError("cannot create output directory '" + dir + "': " + ec.message());
}

std::uint64_t snr_tag(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

// Runs fn(i) for i in [0, count) on up to `threads` workers; results keep
// index order.
template <typename Fn>
auto parallel_map(std::size_t count, Index threads, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

baseline::RgbImage rgb(const ImageDataset& d, Index i) {
  return {d.height, d.width, d.pixels.row(i).transpose()};
}

template <typename S>
std::unique_ptr<JsccModel<S>> copy_model(const JsccModel<S>& model) {
  auto out = make_model<S>(model.model_config(), 0);
  out->params().assign(model.params());
  return out;
}

template <typename S>
std::unique_ptr<JsccModel<S>> model_from_params(const ModelConfig& config,
                                                const ModelParams<S>& params) {
  auto out = make_model<S>(config, 0);
  out->params().assign(params);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::Stsc: return "stsc";
    case SystemKind::ConvJscc: return "conv_jscc";
    case SystemKind::Separate: return "separate";
  }
  return "unknown";
}

SystemKind system_kind_from_string(const std::string& s) {
  if (s == "stsc") return SystemKind::Stsc;
  if (s == "conv_jscc") return SystemKind::ConvJscc;
  if (s == "separate") return SystemKind::Separate;
  throw ConfigError("unknown model '" + s + "' (expected stsc, conv_jscc or separate)");
}

ModelConfig ExperimentConfig::model_config() const {
  switch (model) {
    case SystemKind::Stsc: return {ModelKind::Stsc, geometry};
    case SystemKind::ConvJscc: return {ModelKind::ConvJscc, geometry};
    case SystemKind::Separate: break;
  }
  throw ConfigError("model 'separate' has no trainable parameters; use the baseline command");
}

FedConfig ExperimentConfig::effective_federated() const {
  FedConfig out = federated;
  if (!fed) {
    out.num_clients = 1;
    out.partition_weights = {1.0};
  }
  return out;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (snr_grid.empty()) fail("snr_grid must not be empty");
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    if (!std::isfinite(snr_grid[i])) fail("snr_grid entries must be finite");
    if (i > 0 && !(snr_grid[i] > snr_grid[i - 1])) {
      fail("snr_grid must be strictly increasing (" + format_double(snr_grid[i - 1]) +
           " then " + format_double(snr_grid[i]) + ")");
    }
  }
  if (!std::isfinite(train_snr_db)) fail("train_snr_db must be finite");
  if (noise_seeds < 1) fail("noise_seeds must be at least 1");
  if (threads < 1) fail("threads must be at least 1");
  if (baseline_quality < 1 || baseline_quality > 100) fail("baseline_quality must be in 1..100");
  if (out_dir.empty()) fail("out_dir must not be empty");
  if (dataset.source == "synthetic") {
    if (dataset.train_count < 1) fail("dataset.train_count must be at least 1");
    if (dataset.test_count < 1) fail("dataset.test_count must be at least 1");
  } else if (dataset.source == "cifar10") {
    if (dataset.cifar_dir.empty()) fail("dataset.cifar_dir is required for cifar10");
    if (dataset.train_count < 0 || dataset.test_count < 0) fail("dataset counts must be >= 0");
  } else {
    fail("dataset.source must be synthetic or cifar10, got '" + dataset.source + "'");
  }
  geometry.validate();
  effective_federated().validate();
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk") {
    c.geometry.embed_dim = 16;
    c.federated.rounds = 20;
    return c;
  }
  if (name == "paper") {
    c.geometry.embed_dim = 32;
    c.federated.rounds = 60;
    c.dataset.train_count = 0;
    c.dataset.test_count = 0;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

void to_json(json& j, const FedConfig& c) {
  j = {{"num_clients", c.num_clients},
       {"local_epochs", c.local_epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"rounds", c.rounds},
       {"optimizer", to_string(c.optimizer)},
       {"partition_weights", c.partition_weights},
       {"early_stop", c.early_stop},
       {"early_stop_delta", c.early_stop_delta},
       {"early_stop_window", c.early_stop_window},
       {"parallel_clients", c.parallel_clients}};
}

void from_json(const json& j, FedConfig& c) {
  reject_unknown(j, "federated",
                 {"num_clients", "local_epochs", "batch_size", "learning_rate", "rounds",
                  "optimizer", "partition_weights", "early_stop", "early_stop_delta",
                  "early_stop_window", "parallel_clients"});
  read_field(j, "num_clients", c.num_clients);
  read_field(j, "local_epochs", c.local_epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "rounds", c.rounds);
  if (j.contains("optimizer")) {
    std::string s;
    read_field(j, "optimizer", s);
    c.optimizer = optimizer_kind_from_string(s);
  }
  read_field(j, "partition_weights", c.partition_weights);
  read_field(j, "early_stop", c.early_stop);
  read_field(j, "early_stop_delta", c.early_stop_delta);
  read_field(j, "early_stop_window", c.early_stop_window);
  read_field(j, "parallel_clients", c.parallel_clients);
}

void to_json(json& j, const DatasetSpec& c) {
  j = {{"source", c.source},
       {"cifar_dir", c.cifar_dir},
       {"synth_kind", to_string(c.synth_kind)},
       {"synth_seed", c.synth_seed},
       {"train_count", c.train_count},
       {"test_count", c.test_count}};
}

void from_json(const json& j, DatasetSpec& c) {
  reject_unknown(j, "dataset",
                 {"source", "cifar_dir", "synth_kind", "synth_seed", "train_count", "test_count"});
  read_field(j, "source", c.source);
  read_field(j, "cifar_dir", c.cifar_dir);
  if (j.contains("synth_kind")) {
    std::string s;
    read_field(j, "synth_kind", s);
    c.synth_kind = synth_kind_from_string(s);
  }
  read_field(j, "synth_seed", c.synth_seed);
  read_field(j, "train_count", c.train_count);
  read_field(j, "test_count", c.test_count);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = {{"preset", c.preset},
       {"model", to_string(c.model)},
       {"fed", c.fed},
       {"federated", c.federated},
       {"geometry", c.geometry},
       {"channel", to_string(c.channel)},
       {"train_snr_db", c.train_snr_db},
       {"snr_grid", c.snr_grid},
       {"dataset", c.dataset},
       {"seed", c.seed},
       {"noise_seeds", c.noise_seeds},
       {"baseline_quality", c.baseline_quality},
       {"sweep_separate", c.sweep_separate},
       {"threads", c.threads},
       {"out_dir", c.out_dir}};
}

void from_json(const json& j, ExperimentConfig& c) {
  reject_unknown(j, "experiment",
                 {"preset", "model", "fed", "federated", "geometry", "channel", "train_snr_db",
                  "snr_grid", "dataset", "seed", "noise_seeds", "baseline_quality",
                  "sweep_separate", "threads", "out_dir"});
  read_field(j, "preset", c.preset);
  if (j.contains("model")) {
    std::string s;
    read_field(j, "model", s);
    c.model = system_kind_from_string(s);
  }
  read_field(j, "fed", c.fed);
  if (j.contains("federated")) from_json(j["federated"], c.federated);
  if (j.contains("geometry")) from_json(j["geometry"], c.geometry);
  if (j.contains("channel")) {
    std::string s;
    read_field(j, "channel", s);
    c.channel = channel_family_from_string(s);
  }
  read_field(j, "train_snr_db", c.train_snr_db);
  read_field(j, "snr_grid", c.snr_grid);
  if (j.contains("dataset")) from_json(j["dataset"], c.dataset);
  read_field(j, "seed", c.seed);
  read_field(j, "noise_seeds", c.noise_seeds);
  read_field(j, "baseline_quality", c.baseline_quality);
  read_field(j, "sweep_separate", c.sweep_separate);
  read_field(j, "threads", c.threads);
  read_field(j, "out_dir", c.out_dir);
}

ExperimentConfig load_experiment_config(const std::string& preset, const std::string& path) {
  ExperimentConfig c = preset_config(preset);
  if (path.empty()) return c;
  std::ifstream is(path);
  if (!is) throw FileError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("preset") && j["preset"].is_string() &&
      j["preset"].get<std::string>() != preset) {
    c = preset_config(j["preset"].get<std::string>());
  }
  from_json(j, c);
  return c;
}

Datasets load_datasets(const ExperimentConfig& config) {
  const DatasetSpec& d = config.dataset;
  Datasets out;
  if (d.source == "synthetic") {
    const Index h = config.geometry.image_h, w = config.geometry.image_w;
    out.train = synth_images(d.train_count, d.synth_kind, derive_seed(d.synth_seed, {1}), h, w);
    out.test = synth_images(d.test_count, d.synth_kind, derive_seed(d.synth_seed, {2}), h, w);
    return out;
  }
  if (d.source != "cifar10") throw ConfigError("dataset.source must be synthetic or cifar10");
  out.train = load_cifar10(d.cifar_dir, CifarSplit::Train);
  out.test = split_validation(load_cifar10(d.cifar_dir, CifarSplit::Test)).second;
  if (d.train_count > 0 && d.train_count < out.train.size()) out.train = out.train.slice(0, d.train_count);
  if (d.test_count > 0 && d.test_count < out.test.size()) out.test = out.test.slice(0, d.test_count);
  return out;
}

template <typename S>
std::vector<SweepRow> sweep_model(const JsccModel<S>& model, const std::string& label,
                                  const ImageDataset& test, const ExperimentConfig& config) {
  if (test.size() == 0) throw ConfigError("sweep: empty test set");
  constexpr Index kBatch = 64;
  const Index n = test.size(), per = test.values_per_image();

  std::vector<Tensor<S>> images, symbols;
  {
    auto encoder = copy_model(model);
    for (Index start = 0; start < n; start += kBatch) {
      std::vector<Index> idx(static_cast<std::size_t>(std::min(n, start + kBatch) - start));
      std::iota(idx.begin(), idx.end(), start);
      images.push_back(test.batch<S>(idx));
      symbols.push_back(encoder->encode(images.back()));
    }
  }

  // Mean per-image PSNR of one pass over the test set.
  auto pass = [&](JsccModel<S>& m, const ChannelSpec& spec) {
    Rng rng(spec.seed);
    double total = 0.0;
    for (std::size_t b = 0; b < images.size(); ++b) {
      const Tensor<S> y = m.decode(transmit(symbols[b], spec, rng));
      const Index count = images[b].dim(0);
      for (Index i = 0; i < count; ++i) {
        total += psnr(images[b].value().segment(i * per, per), y.value().segment(i * per, per));
      }
    }
    return total / double(n);
  };

  std::vector<SweepRow> rows;
  {
    auto decoder = copy_model(model);
    const double p = pass(*decoder, ChannelSpec{ChannelFamily::Identity, 0.0, 0});
    rows.push_back({label, to_string(ChannelFamily::Identity), std::nullopt, p, 0.0, std::nullopt, n});
  }
  auto points = parallel_map(config.snr_grid.size(), config.threads, [&](std::size_t g) {
    auto decoder = copy_model(model);
    const double snr = config.snr_grid[g];
    std::vector<double> per_seed;
    for (Index s = 0; s < config.noise_seeds; ++s) {
      const std::uint64_t seed =
          derive_seed(config.seed, {kSweepTag, snr_tag(snr), static_cast<std::uint64_t>(s)});
      per_seed.push_back(pass(*decoder, ChannelSpec{config.channel, snr, seed}));
    }
    return SweepRow{label,        to_string(config.channel), snr, mean_of(per_seed),
                    std_of(per_seed), std::nullopt,          n * config.noise_seeds};
  });
  rows.insert(rows.end(), points.begin(), points.end());
  return rows;
}

std::vector<SweepRow> sweep_separate(const ImageDataset& test, const ExperimentConfig& config,
                                     const std::vector<double>& grid) {
  if (test.size() == 0) throw ConfigError("sweep: empty test set");
  const baseline::SeparatePipeline pipe(baseline::SeparateConfig{config.baseline_quality});
  const Index n = test.size();
  const std::string label = "separate";

  std::vector<baseline::RgbImage> originals;
  double codec = 0.0;
  for (Index i = 0; i < n; ++i) {
    originals.push_back(rgb(test, i));
    codec += psnr(originals.back().pixels, pipe.codec_only(originals.back()).pixels);
  }
  std::vector<SweepRow> rows;
  rows.push_back({label, "none", std::nullopt, codec / double(n), 0.0, 0.0, n});

  auto points = parallel_map(grid.size(), config.threads, [&](std::size_t g) {
    const double snr = grid[g];
    std::vector<double> per_seed;
    Index failures = 0;
    for (Index s = 0; s < config.noise_seeds; ++s) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) {
        const std::uint64_t seed =
            derive_seed(config.seed, {kSeparateTag, snr_tag(snr), static_cast<std::uint64_t>(s),
                                      static_cast<std::uint64_t>(i)});
        const auto r = pipe.run(originals[static_cast<std::size_t>(i)], snr, seed);
        failures += r.diagnostics.concealed;
        total += psnr(originals[static_cast<std::size_t>(i)].pixels, r.image.pixels);
      }
      per_seed.push_back(total / double(n));
    }
    const Index trials = n * config.noise_seeds;
    return SweepRow{label,
                    to_string(ChannelFamily::Awgn),
                    snr,
                    mean_of(per_seed),
                    std_of(per_seed),
                    double(failures) / double(trials),
                    trials};
  });
  rows.insert(rows.end(), points.begin(), points.end());
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "model,channel,snr_db,psnr_mean,psnr_std,failure_rate,samples\n";
  char line[256];
  for (const auto& r : rows) {
    std::string snr = r.snr_db ? format_double(*r.snr_db) : "";
    std::string fail = r.failure_rate ? format_double(*r.failure_rate) : "";
    std::snprintf(line, sizeof line, "%s,%s,%s,%.6f,%.6f,%s,%lld\n", r.model.c_str(),
                  r.channel.c_str(), snr.c_str(), r.psnr_mean, r.psnr_std, fail.c_str(),
                  static_cast<long long>(r.samples));
    os << line;
  }
}

CliffEstimate find_cliff(const std::vector<SweepRow>& separate_rows) {
  std::vector<const SweepRow*> pts;
  for (const auto& r : separate_rows) {
    if (r.snr_db && r.failure_rate) pts.push_back(&r);
  }
  std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return *a->snr_db < *b->snr_db; });
  CliffEstimate c;
  for (const SweepRow* r : pts) {
    if (*r->failure_rate < 0.95) break;
    c.snr_lo = *r->snr_db;
  }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    if (*(*it)->failure_rate > 0.05) break;
    c.snr_hi = *(*it)->snr_db;
  }
  return c;
}

void write_sidecar(const std::string& csv_path, const std::string& command,
                   const ExperimentConfig& config, const json& summary) {
  json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = {{"base", config.seed},
                {"noise_seeds", config.noise_seeds},
                {"synth_seed", config.dataset.synth_seed},
                {"derivation", "splitmix64 chain over (base, tags)"}};
  if (!summary.is_null()) j["summary"] = summary;
  auto os = open_output(csv_path + ".json");
  os << j.dump(2) << "\n";
}

TrainOutput cmd_train(const ExperimentConfig& config) {
  config.validate();
  const ModelConfig mc = config.model_config();
  prepare_out_dir(config.out_dir);
  const Datasets data = load_datasets(config);
  const ChannelSpec channel{config.channel, config.train_snr_db, 0};

  TrainOutput out;
  out.run = run_rounds<float>(config.effective_federated(), mc, channel, data.train, config.seed);
  out.checkpoint = join_path(config.out_dir, "model.ckpt");
  save_checkpoint(out.checkpoint, *model_from_params(mc, out.run.global_params));
  out.rounds_csv = join_path(config.out_dir, "train_rounds.csv");
  {
    auto os = open_output(out.rounds_csv);
    write_round_csv(os, out.run.records);
  }
  write_sidecar(out.rounds_csv, "train", config,
                {{"rounds_run", out.run.rounds.size()},
                 {"stopped_early", out.run.stopped_early},
                 {"checkpoint", out.checkpoint}});
  return out;
}

SweepOutput cmd_sweep_snr(const ExperimentConfig& config, const std::vector<std::string>& checkpoints) {
  config.validate();
  if (checkpoints.empty() && !config.sweep_separate) {
    throw ConfigError("sweep-snr needs at least one checkpoint or sweep_separate");
  }
  std::vector<std::unique_ptr<JsccModel<float>>> models;
  for (const auto& path : checkpoints) models.push_back(load_checkpoint<float>(path));
  prepare_out_dir(config.out_dir);
  const Datasets data = load_datasets(config);

  SweepOutput out;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto rows = sweep_model(*models[m], std::filesystem::path(checkpoints[m]).stem().string(),
                                  data.test, config);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  if (config.sweep_separate) {
    const auto rows = sweep_separate(data.test, config, config.snr_grid);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  out.csv = join_path(config.out_dir, "sweep_snr.csv");
  {
    auto os = open_output(out.csv);
    write_sweep_csv(os, out.rows);
  }
  write_sidecar(out.csv, "sweep-snr", config, {{"checkpoints", checkpoints}});
  return out;
}

CompareOutput cmd_compare_fed(const ExperimentConfig& config) {
  config.validate();
  if (!config.fed) throw ConfigError("compare-fed needs fed = true");
  const ModelConfig mc = config.model_config();
  prepare_out_dir(config.out_dir);
  const Datasets data = load_datasets(config);
  const ChannelSpec channel{config.channel, config.train_snr_db, 0};
  const FedConfig fed = config.federated;

  CompareOutput out;
  out.federated = run_rounds<float>(fed, mc, channel, data.train, config.seed);
  out.local = run_local_only<float>(fed, mc, channel, data.train, config.seed);

  std::vector<std::unique_ptr<JsccModel<float>>> models;
  models.push_back(model_from_params(mc, out.federated.global_params));
  out.models.push_back("global");
  for (std::size_t k = 0; k < out.local.client_ids.size(); ++k) {
    models.push_back(model_from_params(mc, out.local.final_params[k]));
    out.models.push_back(out.local.client_ids[k]);
  }
  const std::uint64_t loss_seed = derive_seed(config.seed, {kTestLossTag});
  for (std::size_t m = 0; m < models.size(); ++m) {
    save_checkpoint(join_path(config.out_dir, out.models[m] + ".ckpt"), *models[m]);
    out.test_losses.push_back(
        evaluate_loss(*models[m], data.test, channel, loss_seed, fed.batch_size));
    const auto rows = sweep_model(*models[m], out.models[m], data.test, config);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }

  out.psnr_csv = join_path(config.out_dir, "compare_psnr.csv");
  {
    auto os = open_output(out.psnr_csv);
    write_sweep_csv(os, out.rows);
  }
  out.convergence_csv = join_path(config.out_dir, "compare_convergence.csv");
  {
    auto os = open_output(out.convergence_csv);
    os << "regime,round,loss,psnr_db\n";
    char line[160];
    for (const auto& r : out.federated.rounds) {
      std::snprintf(line, sizeof line, "federated,%lld,%.10g,%.6f\n", static_cast<long long>(r.round),
                    r.global_loss, psnr_from_mse(r.global_loss));
      os << line;
    }
    for (std::size_t k = 0; k < out.local.client_ids.size(); ++k) {
      for (const auto& r : out.local.rounds) {
        const double loss = r.client_losses[k];
        std::snprintf(line, sizeof line, "local_%s,%lld,%.10g,%.6f\n",
                      out.local.client_ids[k].c_str(), static_cast<long long>(r.round), loss,
                      psnr_from_mse(loss));
        os << line;
      }
    }
  }
  out.test_loss_csv = join_path(config.out_dir, "compare_test_loss.csv");
  {
    auto os = open_output(out.test_loss_csv);
    os << "model,test_loss,test_psnr_db\n";
    char line[160];
    for (std::size_t m = 0; m < out.models.size(); ++m) {
      std::snprintf(line, sizeof line, "%s,%.10g,%.6f\n", out.models[m].c_str(), out.test_losses[m],
                    psnr_from_mse(out.test_losses[m]));
      os << line;
    }
  }
  const json summary = {{"rounds_federated", out.federated.rounds.size()},
                        {"rounds_local", out.local.rounds.size()},
                        {"stopped_early", out.federated.stopped_early},
                        {"models", out.models}};
  write_sidecar(out.psnr_csv, "compare-fed", config, summary);
  write_sidecar(out.convergence_csv, "compare-fed", config, summary);
  write_sidecar(out.test_loss_csv, "compare-fed", config, summary);
  return out;
}

BaselineOutput cmd_baseline(const ExperimentConfig& config) {
  config.validate();
  prepare_out_dir(config.out_dir);
  const Datasets data = load_datasets(config);
  BaselineOutput out;
  out.rows = sweep_separate(data.test, config, config.snr_grid);
  out.cliff = find_cliff(out.rows);
  out.csv = join_path(config.out_dir, "baseline.csv");
  {
    auto os = open_output(out.csv);
    write_sweep_csv(os, out.rows);
  }
  json summary = {{"codec_psnr_db", out.rows.front().psnr_mean}};
  summary["snr_lo"] = out.cliff.snr_lo ? json(*out.cliff.snr_lo) : json(nullptr);
  summary["snr_hi"] = out.cliff.snr_hi ? json(*out.cliff.snr_hi) : json(nullptr);
  write_sidecar(out.csv, "baseline", config, summary);
  return out;
}

template std::vector<SweepRow> sweep_model(const JsccModel<float>&, const std::string&,
                                           const ImageDataset&, const ExperimentConfig&);
template std::vector<SweepRow> sweep_model(const JsccModel<double>&, const std::string&,
                                           const ImageDataset&, const ExperimentConfig&);

}  // namespace fssc
