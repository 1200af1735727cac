#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedforge/adam.hpp"
#include "embedforge/checkpoint.hpp"
#include "embedforge/datasets.hpp"
#include "embedforge/losses.hpp"
#include "embedforge/rng.hpp"
#include "embedforge/sampler.hpp"

namespace embedforge {

enum class LossKind { cluster, batch_hard_cluster, triplet, batch_hard_triplet };

std::string to_string(LossKind kind);
// Throws ConfigError for unknown names.
LossKind parse_loss_kind(const std::string& name);
double default_alpha(LossKind kind);

struct TrainConfig {
  LossKind loss = LossKind::batch_hard_cluster;
  LossConfig loss_config{kDefaultClusterMargin, 1.0, 1e-8};
  SamplerConfig sampler;
  AdamHyperparams adam{1e-3, 0.9, 0.999, 1e-8, 1000, 2000, 1e-3};
  std::int64_t total_iters = 2000;
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 128;
  std::vector<std::size_t> hidden{256};
  double output_gain = 0.1;  // initial scale of the embedding layer
  std::size_t triplet_cap = 512;  // within-batch triplets per step, plain triplet loss

  void validate() const;
  // Adam hyperparameters with total_iters taken from this config.
  AdamHyperparams resolved_adam() const;

  // Small-scale defaults used throughout the tools.
  static TrainConfig desk();
  // Batch composition and optimiser schedule of the full-scale setup
  // (P=16, K=16, lr 3e-5 decaying after 25k of 50k steps).
  static TrainConfig full_scale();
};

nlohmann::json to_json(const TrainConfig& config);
// Keys absent from `j` keep the values of `base`. "alpha" defaults by loss
// kind when absent. Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base = TrainConfig::desk());

struct IterRecord {
  std::int64_t iter = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::size_t active_hinges = 0;
  double ms = 0.0;
};

struct TrainLog {
  std::vector<IterRecord> records;
  std::string csv() const;  // iter,loss,lr,active_hinges,ms
};

// Every (anchor, positive, negative) row triple inside a labelled batch;
// a seeded sample of `cap` of them (kept in enumeration order) when there
// are more.
std::vector<Triplet> within_batch_triplets(const std::vector<int>& labels, std::size_t cap, Rng& rng);

// Loss of `kind` on one batch. The plain triplet loss draws its triplets from `rng`.
LossResult evaluate_loss(LossKind kind, const EmbeddingBatch& batch, const TrainConfig& config, Rng& rng);

struct TrainHooks {
  // Called every checkpoint_every steps and once at the end.
  std::function<void(const Checkpoint&)> on_checkpoint;
  // Called with the last finite state before a DivergenceError is thrown.
  std::function<void(const Checkpoint&)> on_divergence;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainLog log;
};

Checkpoint initial_checkpoint(const TrainConfig& config, std::size_t input_dim);

// Runs steps until config.total_iters. Starting from `resume` (when given)
// continues that trajectory exactly. Throws DivergenceError on a non-finite
// loss, gradient or parameter.
TrainResult train(const TrainConfig& config, const LabeledDataset& dataset,
                  const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);

}  // namespace embedforge
