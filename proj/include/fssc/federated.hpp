#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fssc/channel.hpp"
#include "fssc/data.hpp"
#include "fssc/metrics.hpp"
#include "fssc/model.hpp"
#include "fssc/optim.hpp"
#include "fssc/params.hpp"

namespace fssc {

struct FedConfig {
  Index num_clients = 3;
  Index local_epochs = 1;
  Index batch_size = 64;
  double learning_rate = 1e-3;
  Index rounds = 60;
  OptimizerKind optimizer = OptimizerKind::Adam;
  /// Relative shard sizes, one per client.
  std::vector<double> partition_weights = {0.2, 0.3, 0.5};
  /// Stop once the global loss improved by less than early_stop_delta over
  /// the last early_stop_window rounds.
  bool early_stop = true;
  double early_stop_delta = 1e-5;
  Index early_stop_window = 5;
  /// Keep per-round parameter snapshots in RoundState (memory heavy).
  bool keep_params = false;
  /// Train clients on separate threads within a round.
  bool parallel_clients = false;

  OptimizerConfig optimizer_config() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct ClientShard {
  std::string client_id;
  ImageDataset data;
  /// Rows of the source dataset held by this client.
  std::vector<Index> source_rows;
  Index size() const { return data.size(); }
};

/// Shuffles the dataset and splits it in proportion to `weights` with
/// largest-remainder rounding. Throws ConfigError when there are more
/// clients than samples or a weight is not positive.
std::vector<ClientShard> partition(const ImageDataset& dataset, const std::vector<double>& weights,
                                   std::uint64_t seed);

/// (1/|D|) * sum over images of the per-image MSE of model.forward(image).
/// Noise is drawn from a generator seeded with `seed`.
template <typename S>
double evaluate_loss(JsccModel<S>& model, const ImageDataset& data, const ChannelSpec& channel,
                     std::uint64_t seed, Index batch_size = 64);

template <typename S>
struct LocalResult {
  ModelParams<S> params;
  double mean_loss = 0.0;
};

/// Loads `start` into `model`, runs config.local_epochs epochs of minibatch
/// updates with a fresh optimizer, and returns the trained parameters with
/// their loss over the shard (evaluate_loss with a seed derived from `seed`).
/// A non-finite batch loss throws TrainingError naming the seed and batch.
template <typename S>
LocalResult<S> local_train(JsccModel<S>& model, const ModelParams<S>& start,
                           const ImageDataset& shard, const FedConfig& config,
                           const ChannelSpec& channel, std::uint64_t seed);

/// sum_k (|D_k| / |D|) * w_k for every entry. Clients are put in a canonical
/// order first, so the result does not depend on the order of the inputs.
template <typename S>
ModelParams<S> fedavg_aggregate(const std::vector<ModelParams<S>>& client_params,
                                const std::vector<Index>& sizes);

/// sum_k (|D_k| / |D|) * loss_k.
double global_loss(const std::vector<double>& client_losses, const std::vector<Index>& sizes);

/// What a client reports after a round: parameters, sample count and loss.
template <typename S>
struct ClientUpdate {
  ModelParams<S> params;
  Index size = 0;
  double loss = 0.0;
};

template <typename S>
ModelParams<S> fedavg_aggregate(const std::vector<ClientUpdate<S>>& updates);

/// A simulated client. Its images stay private; only parameters, sizes and
/// scalar losses leave it.
template <typename S>
class Client {
 public:
  Client(ClientShard shard, const ModelConfig& model_config, std::uint64_t seed);

  const std::string& id() const { return shard_.client_id; }
  Index size() const { return shard_.size(); }

  ClientUpdate<S> train(const ModelParams<S>& global, const FedConfig& config,
                        const ChannelSpec& channel, Index round);
  /// Loss of `params` on the local shard.
  double evaluate(const ModelParams<S>& params, const ChannelSpec& channel, Index round,
                  Index batch_size);

 private:
  ClientShard shard_;
  std::unique_ptr<JsccModel<S>> model_;
  std::uint64_t seed_;
};

template <typename S>
struct RoundState {
  Index round = 0;
  double global_loss = 0.0;
  std::vector<std::string> client_ids;
  std::vector<double> client_losses;
  std::vector<Index> client_sizes;
  std::optional<ModelParams<S>> global_params;
  std::vector<ModelParams<S>> client_params;
};

template <typename S>
struct FedRun {
  std::vector<RoundState<S>> rounds;
  std::vector<MetricRecord> records;
  ModelParams<S> global_params;
  bool stopped_early = false;
};

/// FedAvg: initialize a global model, then per round broadcast it, train
/// every client locally, aggregate, and score the new global model on the
/// shards (weighted loss). With one client this is centralized training.
template <typename S>
FedRun<S> run_rounds(const FedConfig& fed, const ModelConfig& model_config,
                     const ChannelSpec& channel, const ImageDataset& train, std::uint64_t seed);

/// Local-only regime: the same shards and schedule without aggregation.
/// Every client continues from its own parameters; final_params holds one
/// collection per client.
template <typename S>
struct LocalRun {
  std::vector<RoundState<S>> rounds;
  std::vector<MetricRecord> records;
  std::vector<std::string> client_ids;
  std::vector<ModelParams<S>> final_params;
};

template <typename S>
LocalRun<S> run_local_only(const FedConfig& fed, const ModelConfig& model_config,
                           const ChannelSpec& channel, const ImageDataset& train,
                           std::uint64_t seed);

/// "round,client_id,loss,psnr_db" rows, one per record.
void write_round_csv(std::ostream& os, const std::vector<MetricRecord>& records);

/// True when the best loss of the last `window` values improves on the best
/// earlier value by less than `delta`.
bool converged(const std::vector<double>& losses, Index window, double delta);

}  // namespace fssc
