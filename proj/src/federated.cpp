#include "fssc/federated.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <future>
#include <numeric>
#include <ostream>

#include "fssc/ops.hpp"

namespace fssc {

namespace {

// Seed tags.
constexpr std::uint64_t kInitTag = 1, kPartitionTag = 2, kClientTag = 3;
constexpr std::uint64_t kShuffleTag = 10, kNoiseTag = 11, kEvalTag = 12, kGlobalEvalTag = 13;

std::string client_name(Index k) { return "client" + std::to_string(k); }

template <typename S>
bool values_less(const ModelParams<S>& a, const ModelParams<S>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].value();
    const auto& y = b[i].value();
    for (Index j = 0; j < x.size(); ++j) {
      if (x[j] < y[j]) return true;
      if (y[j] < x[j]) return false;
    }
  }
  return false;
}

}  // namespace

OptimizerConfig FedConfig::optimizer_config() const {
  OptimizerConfig c;
  c.kind = optimizer;
  c.learning_rate = learning_rate;
  return c;
}

void FedConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("fed config: " + what); };
  if (num_clients < 1) fail("num_clients must be at least 1");
  if (local_epochs < 1) fail("local_epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (rounds < 1) fail("rounds must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be finite and non-negative");
  }
  if (static_cast<Index>(partition_weights.size()) != num_clients) {
    fail("partition_weights has " + std::to_string(partition_weights.size()) + " entries for " +
         std::to_string(num_clients) + " clients");
  }
  for (double w : partition_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) fail("partition_weights must be positive");
  }
  if (early_stop_window < 1) fail("early_stop_window must be at least 1");
  if (!(early_stop_delta >= 0.0)) fail("early_stop_delta must be non-negative");
}

std::vector<ClientShard> partition(const ImageDataset& dataset, const std::vector<double>& weights,
                                   std::uint64_t seed) {
  const auto k = static_cast<Index>(weights.size());
  const Index n = dataset.size();
  if (k < 1) throw ConfigError("partition: no clients");
  if (k > n) {
    throw ConfigError("partition: " + std::to_string(k) + " clients for " + std::to_string(n) +
                      " samples");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("partition: weights must be positive");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<Index> sizes(static_cast<std::size_t>(k));
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index i = 0; i < k; ++i) {
    const double exact = double(n) * weights[static_cast<std::size_t>(i)] / total;
    sizes[static_cast<std::size_t>(i)] = static_cast<Index>(std::floor(exact));
    assigned += sizes[static_cast<std::size_t>(i)];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  // Largest remainders first; ties go to the lower client index.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (Index r = 0; assigned < n; ++r, ++assigned) {
    ++sizes[static_cast<std::size_t>(remainders[static_cast<std::size_t>(r % k)].second)];
  }
  // Every client needs at least one sample; take from the largest shard.
  for (auto& s : sizes) {
    if (s == 0) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      s = 1;
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  std::vector<ClientShard> shards;
  Index offset = 0;
  for (Index i = 0; i < k; ++i) {
    ClientShard shard;
    shard.client_id = client_name(i);
    const Index s = sizes[static_cast<std::size_t>(i)];
    shard.source_rows.assign(order.begin() + offset, order.begin() + offset + s);
    shard.data = dataset.subset(shard.source_rows);
    offset += s;
    shards.push_back(std::move(shard));
  }
  return shards;
}

template <typename S>
double evaluate_loss(JsccModel<S>& model, const ImageDataset& data, const ChannelSpec& channel,
                     std::uint64_t seed, Index batch_size) {
  if (data.size() == 0) throw ConfigError("evaluate_loss: empty dataset");
  Rng noise(seed);
  const Index n = data.size(), per = data.values_per_image();
  double total = 0.0;
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    std::vector<Index> idx(static_cast<std::size_t>(end - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<S> x = data.batch<S>(idx);
    const Tensor<S> y = model.forward(x, channel, noise);
    for (Index b = 0; b < end - start; ++b) {
      total += mse(x.value().segment(b * per, per), y.value().segment(b * per, per));
    }
  }
  return total / double(n);
}

template <typename S>
LocalResult<S> local_train(JsccModel<S>& model, const ModelParams<S>& start,
                           const ImageDataset& shard, const FedConfig& config,
                           const ChannelSpec& channel, std::uint64_t seed) {
  if (const std::string m = model.params().schema_mismatch(start); !m.empty()) {
    throw ConfigError("local_train: parameters do not match the model: " + m);
  }
  model.params().assign(start);
  Optimizer<S> opt(config.optimizer_config());
  Rng order_rng(derive_seed(seed, {kShuffleTag}));
  Rng noise(derive_seed(seed, {kNoiseTag}));
  const Index n = shard.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index epoch = 0; epoch < config.local_epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    Index batch_index = 0;
    for (Index b0 = 0; b0 < n; b0 += config.batch_size, ++batch_index) {
      const std::vector<Index> idx(order.begin() + b0,
                                   order.begin() + std::min(n, b0 + config.batch_size));
      const Tensor<S> x = shard.batch<S>(idx);
      Tape<S> tape;
      TapeScope<S> scope(tape);
      Tensor<S> loss = mse_loss(model.forward(x, channel, noise), x);
      if (!std::isfinite(double(loss.item()))) {
        throw TrainingError("non-finite loss (seed " + std::to_string(seed) + ", epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ")");
      }
      tape.backward(loss);
      opt.step(model.params());
    }
  }
  LocalResult<S> result;
  result.mean_loss =
      evaluate_loss(model, shard, channel, derive_seed(seed, {kEvalTag}), config.batch_size);
  result.params = model.params().clone();
  return result;
}

template <typename S>
ModelParams<S> fedavg_aggregate(const std::vector<ModelParams<S>>& client_params,
                                const std::vector<Index>& sizes) {
  if (client_params.empty()) throw AggregationError("fedavg: no clients");
  if (client_params.size() != sizes.size()) {
    throw AggregationError("fedavg: " + std::to_string(client_params.size()) +
                           " parameter sets for " + std::to_string(sizes.size()) + " sizes");
  }
  Index total = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1) {
      throw AggregationError("fedavg: client " + std::to_string(k) + " has size " +
                             std::to_string(sizes[k]));
    }
    total += sizes[k];
    if (k > 0) {
      const std::string m = client_params[0].schema_mismatch(client_params[k]);
      if (!m.empty()) throw AggregationError("fedavg: client " + std::to_string(k) + ": " + m);
    }
  }
  // Canonical order: by size, then by parameter values.
  std::vector<std::size_t> order(client_params.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sizes[a] != sizes[b]) return sizes[a] < sizes[b];
    return values_less(client_params[a], client_params[b]);
  });

  // Offsets from the first client keep identical inputs exact.
  ModelParams<S> out = client_params[order[0]].clone();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec<double> ref = client_params[order[0]][i].value().template cast<double>();
    Vec<double> acc = Vec<double>::Zero(ref.size());
    for (std::size_t k : order) {
      const double w = double(sizes[k]) / double(total);
      acc += w * (client_params[k][i].value().template cast<double>() - ref);
    }
    out[i].value() = (ref + acc).template cast<S>();
    out[i].set_requires_grad(client_params[order[0]][i].requires_grad());
  }
  return out;
}

template <typename S>
ModelParams<S> fedavg_aggregate(const std::vector<ClientUpdate<S>>& updates) {
  std::vector<ModelParams<S>> params;
  std::vector<Index> sizes;
  for (const auto& u : updates) {
    params.push_back(u.params);
    sizes.push_back(u.size);
  }
  return fedavg_aggregate(params, sizes);
}

double global_loss(const std::vector<double>& client_losses, const std::vector<Index>& sizes) {
  if (client_losses.size() != sizes.size() || sizes.empty()) {
    throw ConfigError("global_loss: " + std::to_string(client_losses.size()) + " losses for " +
                      std::to_string(sizes.size()) + " sizes");
  }
  const double total = double(std::accumulate(sizes.begin(), sizes.end(), Index{0}));
  double out = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) out += double(sizes[k]) / total * client_losses[k];
  return out;
}

template <typename S>
Client<S>::Client(ClientShard shard, const ModelConfig& model_config, std::uint64_t seed)
    : shard_(std::move(shard)), model_(make_model<S>(model_config, seed)), seed_(seed) {}

template <typename S>
ClientUpdate<S> Client<S>::train(const ModelParams<S>& global, const FedConfig& config,
                                 const ChannelSpec& channel, Index round) {
  LocalResult<S> r = local_train(*model_, global, shard_.data, config, channel,
                                 derive_seed(seed_, {static_cast<std::uint64_t>(round)}));
  return {std::move(r.params), size(), r.mean_loss};
}

template <typename S>
double Client<S>::evaluate(const ModelParams<S>& params, const ChannelSpec& channel, Index round,
                           Index batch_size) {
  model_->params().assign(params);
  return evaluate_loss(*model_, shard_.data, channel,
                       derive_seed(seed_, {static_cast<std::uint64_t>(round), kGlobalEvalTag}),
                       batch_size);
}

bool converged(const std::vector<double>& losses, Index window, double delta) {
  const auto n = static_cast<Index>(losses.size());
  if (n <= window) return false;
  const double before = *std::min_element(losses.begin(), losses.end() - window);
  const double recent = *std::min_element(losses.end() - window, losses.end());
  return before - recent < delta;
}

namespace {

template <typename S>
std::vector<Client<S>> make_clients(const FedConfig& fed, const ModelConfig& model_config,
                                    const ImageDataset& train, std::uint64_t seed) {
  fed.validate();
  model_config.validate();
  if (train.height != model_config.geometry.image_h || train.width != model_config.geometry.image_w) {
    throw ConfigError("training images are " + std::to_string(train.height) + "x" +
                      std::to_string(train.width) + " but the model expects " +
                      std::to_string(model_config.geometry.image_h) + "x" +
                      std::to_string(model_config.geometry.image_w));
  }
  auto shards = partition(train, fed.partition_weights, derive_seed(seed, {kPartitionTag}));
  std::vector<Client<S>> clients;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    clients.emplace_back(std::move(shards[k]), model_config,
                         derive_seed(seed, {kClientTag, static_cast<std::uint64_t>(k)}));
  }
  return clients;
}

// Runs fn(k) for every client, optionally on separate threads.
template <typename Fn>
auto for_clients(std::size_t count, bool parallel, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  if (!parallel) {
    for (std::size_t k = 0; k < count; ++k) out.push_back(fn(k));
    return out;
  }
  std::vector<std::future<R>> jobs;
  for (std::size_t k = 0; k < count; ++k) jobs.push_back(std::async(std::launch::async, fn, k));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace

template <typename S>
FedRun<S> run_rounds(const FedConfig& fed, const ModelConfig& model_config,
                     const ChannelSpec& channel, const ImageDataset& train, std::uint64_t seed) {
  auto clients = make_clients<S>(fed, model_config, train, seed);
  FedRun<S> run;
  run.global_params = make_model<S>(model_config, derive_seed(seed, {kInitTag}))->params().clone();
  std::vector<double> history;
  for (Index t = 1; t <= fed.rounds; ++t) {
    auto updates = for_clients(clients.size(), fed.parallel_clients, [&](std::size_t k) {
      return clients[k].train(run.global_params, fed, channel, t);
    });
    run.global_params = fedavg_aggregate(updates);
    const auto losses = for_clients(clients.size(), fed.parallel_clients, [&](std::size_t k) {
      return clients[k].evaluate(run.global_params, channel, t, fed.batch_size);
    });

    RoundState<S> state;
    state.round = t;
    for (std::size_t k = 0; k < clients.size(); ++k) {
      state.client_ids.push_back(clients[k].id());
      state.client_losses.push_back(updates[k].loss);
      state.client_sizes.push_back(updates[k].size);
      run.records.push_back(MetricRecord::from_mse(static_cast<int>(t), clients[k].id(),
                                                   channel.snr_db, updates[k].loss));
    }
    state.global_loss = global_loss(losses, state.client_sizes);
    run.records.push_back(
        MetricRecord::from_mse(static_cast<int>(t), "global", channel.snr_db, state.global_loss));
    if (fed.keep_params) {
      state.global_params = run.global_params.clone();
      for (auto& u : updates) state.client_params.push_back(std::move(u.params));
    }
    run.rounds.push_back(std::move(state));
    history.push_back(run.rounds.back().global_loss);
    if (fed.early_stop && t < fed.rounds &&
        converged(history, fed.early_stop_window, fed.early_stop_delta)) {
      run.stopped_early = true;
      break;
    }
  }
  return run;
}

template <typename S>
LocalRun<S> run_local_only(const FedConfig& fed, const ModelConfig& model_config,
                           const ChannelSpec& channel, const ImageDataset& train,
                           std::uint64_t seed) {
  auto clients = make_clients<S>(fed, model_config, train, seed);
  LocalRun<S> run;
  const auto init = make_model<S>(model_config, derive_seed(seed, {kInitTag}))->params().clone();
  run.final_params.assign(clients.size(), ModelParams<S>{});
  for (std::size_t k = 0; k < clients.size(); ++k) {
    run.client_ids.push_back(clients[k].id());
    run.final_params[k] = init.clone();
  }
  for (Index t = 1; t <= fed.rounds; ++t) {
    auto updates = for_clients(clients.size(), fed.parallel_clients, [&](std::size_t k) {
      return clients[k].train(run.final_params[k], fed, channel, t);
    });
    RoundState<S> state;
    state.round = t;
    for (std::size_t k = 0; k < clients.size(); ++k) {
      state.client_ids.push_back(clients[k].id());
      state.client_losses.push_back(updates[k].loss);
      state.client_sizes.push_back(updates[k].size);
      run.records.push_back(MetricRecord::from_mse(static_cast<int>(t), clients[k].id(),
                                                   channel.snr_db, updates[k].loss));
      run.final_params[k] = std::move(updates[k].params);
      if (fed.keep_params) state.client_params.push_back(run.final_params[k].clone());
    }
    state.global_loss = global_loss(state.client_losses, state.client_sizes);
    run.rounds.push_back(std::move(state));
  }
  return run;
}

void write_round_csv(std::ostream& os, const std::vector<MetricRecord>& records) {
  os << "round,client_id,loss,psnr_db\n";
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%d,%s,%.10g,%.6f\n", r.round, r.scope.c_str(), r.mse,
                  r.psnr_db);
    os << line;
  }
}

#define FSSC_INSTANTIATE_FED(S)                                                                \
  template double evaluate_loss(JsccModel<S>&, const ImageDataset&, const ChannelSpec&,        \
                                std::uint64_t, Index);                                         \
  template LocalResult<S> local_train(JsccModel<S>&, const ModelParams<S>&, const ImageDataset&, \
                                      const FedConfig&, const ChannelSpec&, std::uint64_t);     \
  template ModelParams<S> fedavg_aggregate(const std::vector<ModelParams<S>>&,                 \
                                           const std::vector<Index>&);                         \
  template ModelParams<S> fedavg_aggregate(const std::vector<ClientUpdate<S>>&);               \
  template class Client<S>;                                                                    \
  template FedRun<S> run_rounds(const FedConfig&, const ModelConfig&, const ChannelSpec&,      \
                                const ImageDataset&, std::uint64_t);                           \
  template LocalRun<S> run_local_only(const FedConfig&, const ModelConfig&, const ChannelSpec&, \
                                      const ImageDataset&, std::uint64_t);

FSSC_INSTANTIATE_FED(float)
FSSC_INSTANTIATE_FED(double)

}  // namespace fssc
