#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fssc/channel.hpp"
#include "fssc/data.hpp"
#include "fssc/federated.hpp"
#include "fssc/model.hpp"
#include "fssc/stsc_config.hpp"

namespace fssc {

/// System under test: one of the two learned codecs or the separate
/// DCT + LDPC + QPSK chain.
enum class SystemKind { Stsc, ConvJscc, Separate };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& s);

struct DatasetSpec {
  /// "synthetic" or "cifar10".
  std::string source = "synthetic";
  std::string cifar_dir;
  SynthKind synth_kind = SynthKind::GaussianBlobs;
  /// Seed of the synthetic images; independent of the experiment seed.
  std::uint64_t synth_seed = 2024;
  /// Image counts; 0 keeps the whole CIFAR split.
  Index train_count = 2000;
  Index test_count = 200;
};

struct ExperimentConfig {
  std::string preset = "desk";
  SystemKind model = SystemKind::Stsc;
  bool fed = true;
  FedConfig federated;
  StscConfig geometry;
  ChannelFamily channel = ChannelFamily::Awgn;
  double train_snr_db = 12.0;
  std::vector<double> snr_grid = {-5, 0, 4, 8, 12, 16, 20};
  DatasetSpec dataset;
  std::uint64_t seed = 1;
  /// Channel realizations averaged per sweep point.
  Index noise_seeds = 20;
  int baseline_quality = 75;
  /// Include the separate pipeline as a series in sweep-snr.
  bool sweep_separate = true;
  /// Worker threads for sweep points.
  Index threads = 1;
  std::string out_dir = "fssc_out";

  /// Throws ConfigError when the model is the separate pipeline.
  ModelConfig model_config() const;
  /// The federated settings actually used: fed off means one client that
  /// holds the whole training set.
  FedConfig effective_federated() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// "desk" (2000 synthetic images, C=16, 20 rounds) or "paper" (C=32,
/// 60 rounds, whole training split).
ExperimentConfig preset_config(const std::string& name);

void to_json(nlohmann::json& j, const FedConfig& c);
void from_json(const nlohmann::json& j, FedConfig& c);
void to_json(nlohmann::json& j, const DatasetSpec& c);
void from_json(const nlohmann::json& j, DatasetSpec& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Overrides the fields present in `j`; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Preset, then the JSON file (if any) on top of it.
ExperimentConfig load_experiment_config(const std::string& preset, const std::string& path);

struct Datasets {
  ImageDataset train;
  ImageDataset test;
};

Datasets load_datasets(const ExperimentConfig& config);

/// One PSNR-vs-SNR point. The identity channel row leaves snr_db unset;
/// failure_rate is reported for the separate pipeline only.
struct SweepRow {
  std::string model;
  std::string channel;
  std::optional<double> snr_db;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  std::optional<double> failure_rate;
  Index samples = 0;
};

/// Mean per-image PSNR on `test` for each grid SNR, averaged over
/// config.noise_seeds channel realizations (std across realizations),
/// preceded by the identity-channel row. The encoder runs once; only
/// channel and decoder are repeated.
template <typename S>
std::vector<SweepRow> sweep_model(const JsccModel<S>& model, const std::string& label,
                                  const ImageDataset& test, const ExperimentConfig& config);

/// The separate pipeline over `grid`, preceded by the channel-free codec row.
std::vector<SweepRow> sweep_separate(const ImageDataset& test, const ExperimentConfig& config,
                                     const std::vector<double>& grid);

/// model,channel,snr_db,psnr_mean,psnr_std,failure_rate,samples
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Thresholds read off a measured failure curve: the highest SNR up to
/// which every point fails at least 95% of the time, and the lowest SNR
/// from which every point fails at most 5% of the time.
struct CliffEstimate {
  std::optional<double> snr_lo;
  std::optional<double> snr_hi;
};

CliffEstimate find_cliff(const std::vector<SweepRow>& separate_rows);

/// Sidecar written next to every CSV: command, resolved config, seeds and
/// any command-specific summary.
void write_sidecar(const std::string& csv_path, const std::string& command,
                   const ExperimentConfig& config, const nlohmann::json& summary = {});

struct TrainOutput {
  std::string checkpoint;
  std::string rounds_csv;
  FedRun<float> run;
};

/// Federated (or single-client) training at config.train_snr_db. Writes
/// model.ckpt and train_rounds.csv into config.out_dir.
TrainOutput cmd_train(const ExperimentConfig& config);

struct SweepOutput {
  std::string csv;
  std::vector<SweepRow> rows;
};

/// Sweeps every checkpoint (labelled by file stem) over the grid, plus the
/// separate pipeline when config.sweep_separate is set. Writes sweep_snr.csv.
SweepOutput cmd_sweep_snr(const ExperimentConfig& config, const std::vector<std::string>& checkpoints);

struct CompareOutput {
  FedRun<float> federated;
  LocalRun<float> local;
  std::vector<SweepRow> rows;
  /// Test-set loss at the training SNR: "global" first, then each client.
  std::vector<std::string> models;
  std::vector<double> test_losses;
  std::string psnr_csv, convergence_csv, test_loss_csv;
};

/// Trains the FedAvg global model and each client alone on the same shards
/// and schedule, then sweeps all K+1 models. Writes compare_psnr.csv,
/// compare_convergence.csv (regime,round,loss,psnr_db), compare_test_loss.csv
/// and one checkpoint per model.
CompareOutput cmd_compare_fed(const ExperimentConfig& config);

struct BaselineOutput {
  std::string csv;
  std::vector<SweepRow> rows;
  CliffEstimate cliff;
};

/// Separate pipeline over config.snr_grid. Writes baseline.csv.
BaselineOutput cmd_baseline(const ExperimentConfig& config);

}  // namespace fssc
