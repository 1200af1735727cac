#include "embedforge/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "embedforge/error.hpp"
#include "embedforge/nn.hpp"
#include "embedforge/seqclust.hpp"

namespace embedforge {

using nlohmann::json;

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::cluster: return "cluster";
    case LossKind::batch_hard_cluster: return "batch_hard_cluster";
    case LossKind::triplet: return "triplet";
    case LossKind::batch_hard_triplet: return "batch_hard_triplet";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  for (LossKind k : {LossKind::cluster, LossKind::batch_hard_cluster, LossKind::triplet,
                     LossKind::batch_hard_triplet}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown loss kind '" + name +
                    "' (expected cluster, batch_hard_cluster, triplet or batch_hard_triplet)");
}

double default_alpha(LossKind kind) {
  return kind == LossKind::batch_hard_cluster || kind == LossKind::cluster ? kDefaultClusterMargin
                                                                           : kDefaultTripletMargin;
}

void TrainConfig::validate() const {
  loss_config.validate();
  resolved_adam().validate();
  if (total_iters < 0) throw ConfigError("total_iters must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (sampler.P < 2) throw ConfigError("sampler: P must be >= 2");
  if (sampler.K < 1) throw ConfigError("sampler: K must be >= 1");
  if ((loss == LossKind::batch_hard_triplet || loss == LossKind::triplet) && sampler.K < 2) {
    throw ConfigError("triplet losses need K >= 2 so every anchor has a positive");
  }
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be >= 1");
  }
  if (!(output_gain > 0.0) || !std::isfinite(output_gain)) throw ConfigError("output_gain must be positive");
  if (loss == LossKind::triplet && triplet_cap == 0) throw ConfigError("triplet_cap must be >= 1");
}

AdamHyperparams TrainConfig::resolved_adam() const {
  AdamHyperparams h = adam;
  h.total_iters = total_iters;
  return h;
}

TrainConfig TrainConfig::desk() { return {}; }

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.sampler = {16, 16};
  c.adam = {3e-5, 0.9, 0.999, 1e-8, 25000, 50000, 1e-3};
  c.total_iters = 50000;
  c.embedding_dim = 128;
  c.hidden = {1024};
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss)},
          {"alpha", c.loss_config.alpha},
          {"beta", c.loss_config.beta},
          {"gamma", c.loss_config.gamma},
          {"P", c.sampler.P},
          {"K", c.sampler.K},
          {"learning_rate", c.adam.learning_rate},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"adam_epsilon", c.adam.epsilon},
          {"decay_start", c.adam.decay_start},
          {"final_lr_factor", c.adam.final_lr_factor},
          {"total_iters", c.total_iters},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed},
          {"embedding_dim", c.embedding_dim},
          {"hidden", c.hidden},
          {"output_gain", c.output_gain},
          {"triplet_cap", c.triplet_cap}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::set<std::string> known{
      "loss", "alpha", "beta", "beta_preset", "gamma", "P", "K", "learning_rate",
      "adam_beta1", "adam_beta2", "adam_epsilon", "decay_start", "final_lr_factor",
      "total_iters", "checkpoint_every", "seed", "embedding_dim", "hidden", "output_gain", "triplet_cap"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown train config key '" + key + "'");
  }
  TrainConfig c = base;
  try {
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("loss")) c.loss = parse_loss_kind(j.at("loss").get<std::string>());
    c.loss_config.alpha = j.contains("alpha") ? j.at("alpha").get<double>()
                          : j.contains("loss") ? default_alpha(c.loss)
                                               : base.loss_config.alpha;
    take("beta", c.loss_config.beta);
    take("gamma", c.loss_config.gamma);
    take("P", c.sampler.P);
    take("K", c.sampler.K);
    take("learning_rate", c.adam.learning_rate);
    take("adam_beta1", c.adam.beta1);
    take("adam_beta2", c.adam.beta2);
    take("adam_epsilon", c.adam.epsilon);
    take("final_lr_factor", c.adam.final_lr_factor);
    take("total_iters", c.total_iters);
    if (j.contains("decay_start")) {
      take("decay_start", c.adam.decay_start);
    } else if (j.contains("total_iters")) {
      c.adam.decay_start = c.total_iters / 2;
    }
    take("checkpoint_every", c.checkpoint_every);
    take("seed", c.seed);
    take("embedding_dim", c.embedding_dim);
    take("hidden", c.hidden);
    take("output_gain", c.output_gain);
    take("triplet_cap", c.triplet_cap);
    if (j.contains("beta_preset")) {
      const auto preset = j.at("beta_preset").get<std::string>();
      if (preset == "count_balanced") {
        c.loss_config.beta = LossConfig::count_balanced(c.sampler.P, c.sampler.K).beta;
      } else if (preset != "fixed") {
        throw ConfigError("beta_preset must be 'fixed' or 'count_balanced'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainLog::csv() const {
  std::ostringstream out;
  out << "iter,loss,lr,active_hinges,ms\n";
  for (const auto& r : records) {
    out << r.iter << ',' << format_double(r.loss) << ',' << format_double(r.lr) << ','
        << r.active_hinges << ',' << format_double(r.ms) << '\n';
  }
  return out.str();
}

std::vector<Triplet> within_batch_triplets(const std::vector<int>& labels, std::size_t cap, Rng& rng) {
  std::vector<Triplet> all;
  const std::size_t n = labels.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t ng = 0; ng < n; ++ng) {
        if (labels[ng] != labels[a]) all.push_back({a, p, ng});
      }
    }
  }
  if (all.size() <= cap) return all;
  // Partial Fisher-Yates over positions, then restore enumeration order.
  std::vector<std::size_t> pos(all.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  for (std::size_t i = 0; i < cap; ++i) std::swap(pos[i], pos[i + rng.below(pos.size() - i)]);
  pos.resize(cap);
  std::sort(pos.begin(), pos.end());
  std::vector<Triplet> picked;
  picked.reserve(cap);
  for (std::size_t p : pos) picked.push_back(all[p]);
  return picked;
}

LossResult evaluate_loss(LossKind kind, const EmbeddingBatch& batch, const TrainConfig& config, Rng& rng) {
  switch (kind) {
    case LossKind::cluster: return cluster_loss(batch, config.loss_config);
    case LossKind::batch_hard_cluster: return batch_hard_cluster_loss(batch, config.loss_config);
    case LossKind::batch_hard_triplet: return batch_hard_triplet_loss(batch, config.loss_config.alpha);
    case LossKind::triplet: {
      const IdentityGroups groups = group_by_identity(batch.labels);
      if (groups.size() == 0) throw StructureError("empty batch");
      require_pk(groups, 2, 2);
      const auto triplets = within_batch_triplets(batch.labels, config.triplet_cap, rng);
      return triplet_loss(batch.vectors, triplets, config.loss_config.alpha);
    }
  }
  throw ConfigError("unhandled loss kind");
}

Checkpoint initial_checkpoint(const TrainConfig& config, std::size_t input_dim) {
  config.validate();
  Rng rng(config.seed);
  Checkpoint c;
  c.params = init_mlp(input_dim, config.hidden, config.embedding_dim, rng, config.output_gain);
  c.adam = AdamState::for_params(c.params, config.resolved_adam());
  c.rng_seed = rng.seed();
  c.rng_counter = rng.counter();
  return c;
}

namespace {

bool finite_params(const MlpParams& p) {
  for (const auto& l : p.layers) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

InputBatch gather(const LabeledDataset& ds, const std::vector<ItemRef>& refs) {
  InputBatch batch{Matrix(refs.size(), ds.items.cols()), {}};
  batch.labels.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto src = ds.items.row(refs[i].item);
    std::copy(src.begin(), src.end(), batch.rows.row(i).begin());
    batch.labels.push_back(refs[i].label);
  }
  return batch;
}

}  // namespace

TrainResult train(const TrainConfig& config, const LabeledDataset& dataset, const TrainHooks& hooks,
                  const Checkpoint* resume) {
  config.validate();
  dataset.validate();
  const DatasetIndex index = DatasetIndex::from_labels(dataset.labels);
  config.sampler.validate(index);

  TrainResult result;
  Checkpoint& state = result.checkpoint;
  if (resume != nullptr) {
    state = *resume;
    if (state.params.input_dim() != dataset.items.cols()) {
      throw ConfigError("checkpoint expects input dimension " +
                        std::to_string(state.params.input_dim()) + ", dataset has " +
                        std::to_string(dataset.items.cols()));
    }
  } else {
    state = initial_checkpoint(config, dataset.items.cols());
  }
  state.adam.hyper = config.resolved_adam();
  Rng rng(state.rng_seed, state.rng_counter);

  Checkpoint last_good = state;
  auto diverge = [&](const std::string& what, std::int64_t iter) {
    if (hooks.on_divergence) hooks.on_divergence(last_good);
    throw DivergenceError("training diverged at iteration " + std::to_string(iter) + ": " + what, iter);
  };

  for (std::int64_t iter = state.adam.step_count + 1; iter <= config.total_iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    last_good = state;

    const InputBatch batch = gather(dataset, pk_sample(index, config.sampler, rng));
    const ForwardResult fwd = mlp_forward(state.params, batch);
    LossResult loss;
    try {
      loss = evaluate_loss(config.loss, fwd.embeddings, config, rng);
    } catch (const DataError& e) {
      if (!fwd.embeddings.vectors.all_finite()) diverge("non-finite embeddings", iter);
      throw;
    }
    if (!std::isfinite(loss.value) || !loss.grad.all_finite()) diverge("non-finite loss", iter);
    const MlpGrads grads = mlp_backward(state.params, fwd.cache, loss.grad);
    if (!finite_params(grads)) diverge("non-finite gradient", iter);
    const double lr = adam_step(state.adam, state.params, grads);
    if (!finite_params(state.params)) diverge("non-finite parameters after update", iter);
    state.rng_counter = rng.counter();

    const auto t1 = std::chrono::steady_clock::now();
    result.log.records.push_back({iter, loss.value, lr, loss.diagnostics.active_count(),
                                  std::chrono::duration<double, std::milli>(t1 - t0).count()});
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && iter % config.checkpoint_every == 0 &&
        iter != config.total_iters) {
      hooks.on_checkpoint(state);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);
  return result;
}

}  // namespace embedforge
