#include "embedforge/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "embedforge/checkpoint.hpp"
#include "embedforge/datasets.hpp"
#include "embedforge/error.hpp"
#include "embedforge/gradcheck.hpp"
#include "embedforge/metrics.hpp"
#include "embedforge/sampler.hpp"
#include "embedforge/seqclust.hpp"
#include "embedforge/trainer.hpp"

namespace embedforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(std::string_view contents) {
  const std::string header = "blob " + std::to_string(contents.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, contents.data(), contents.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Collects inputs and outputs of one run and writes manifest.json last.
class Run {
 public:
  Run(std::string command, fs::path out_dir)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    manifest_["command"] = std::move(command);
    manifest_["inputs"] = json::array();
    manifest_["outputs"] = json::array();
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec || !fs::is_directory(out_dir_)) {
      throw ConfigError("cannot create output directory " + out_dir_.string());
    }
  }

  json& manifest() { return manifest_; }

  void input_file(const std::string& role, const fs::path& path) {
    manifest_["inputs"].push_back({{"role", role}, {"path", path.string()},
                                   {"sha1", git_blob_sha1(read_file(path))}});
  }
  void input_content(const std::string& role, const std::string& contents) {
    manifest_["inputs"].push_back({{"role", role}, {"sha1", git_blob_sha1(contents)}});
  }

  void write(const std::string& name, const std::string& contents) {
    write_file_atomic(out_dir_ / name, contents);
    manifest_["outputs"].push_back(name);
  }
  void write_checkpoint(const std::string& name, const Checkpoint& c) {
    save_checkpoint(c, out_dir_ / name);
    manifest_["outputs"].push_back(name);
  }

  void finish(const std::string& status) {
    manifest_["status"] = status;
    manifest_["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_file_atomic(out_dir_ / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  fs::path out_dir_;
  json manifest_;
  std::chrono::steady_clock::time_point start_;
};

struct DatasetArgs {
  std::string kind = "synthetic";
  SyntheticSpec synth;
  std::string images, labels, csv;
  std::size_t max_per_identity = 0;
  std::size_t holdout = 0;
  std::uint64_t split_seed = 0;
  std::string part;  // train | test | all; empty picks the command's default

  void add_options(CLI::App* app) {
    app->add_option("--dataset", kind, "synthetic | idx | csv")
        ->check(CLI::IsMember({"synthetic", "idx", "csv"}));
    app->add_option("--identities", synth.num_identities, "synthetic: identity count");
    app->add_option("--per-identity", synth.per_identity, "synthetic: items per identity");
    app->add_option("--input-dim", synth.input_dim, "synthetic: input dimension");
    app->add_option("--center-scale", synth.center_scale, "synthetic: centers in [-s, s]^dim");
    app->add_option("--noise", synth.noise_sigma, "synthetic: per-coordinate noise sigma");
    app->add_option("--data-seed", synth.seed, "synthetic: generator seed");
    app->add_option("--images", images, "idx: image file");
    app->add_option("--labels", labels, "idx: label file");
    app->add_option("--csv", csv, "csv: features file (label,e0,...)");
    app->add_option("--max-per-identity", max_per_identity, "keep at most this many items per identity");
    app->add_option("--holdout", holdout, "items per identity held out for evaluation");
    app->add_option("--split-seed", split_seed, "seed of the holdout split");
    app->add_option("--part", part, "train | test | all")->check(CLI::IsMember({"train", "test", "all"}));
  }

  LabeledDataset load(Run& run, const std::string& default_part) const {
    LabeledDataset ds;
    if (kind == "synthetic") {
      ds = gen_synthetic(synth);
    } else if (kind == "idx") {
      if (images.empty() || labels.empty()) throw ConfigError("--dataset idx needs --images and --labels");
      run.input_file("images", images);
      run.input_file("labels", labels);
      ds = load_idx(images, labels);
    } else {
      if (csv.empty()) throw ConfigError("--dataset csv needs --csv");
      run.input_file("features", csv);
      ds = load_csv_dataset(csv);
    }
    if (max_per_identity > 0) ds = take_per_identity(ds, max_per_identity);
    const std::string which = part.empty() ? (holdout > 0 ? default_part : "all") : part;
    if (which != "all") {
      if (holdout == 0) throw ConfigError("--part " + which + " needs --holdout > 0");
      DatasetSplit split = split_per_identity(ds, holdout, split_seed);
      ds = which == "train" ? std::move(split.train) : std::move(split.test);
    }
    json meta = metadata_sidecar(ds);
    meta["part"] = which;
    meta["holdout"] = holdout;
    meta["split_seed"] = split_seed;
    meta["max_per_identity"] = max_per_identity;
    run.manifest()["dataset"] = meta;
    if (kind == "synthetic") run.input_content("dataset", embeddings_csv({ds.items, ds.labels}));
    return ds;
  }
};

// Flags that override the JSON train config.
struct TrainFlags {
  std::string config_path;
  std::optional<std::string> loss, beta_preset;
  std::optional<double> alpha, beta, gamma, lr, output_gain;
  std::optional<std::int64_t> iters, decay_start, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> P, K, embedding_dim;
  std::vector<std::size_t> hidden;

  void add_options(CLI::App* app) {
    app->add_option("--config", config_path, "train config JSON");
    app->add_option("--loss", loss, "cluster | batch_hard_cluster | triplet | batch_hard_triplet");
    app->add_option("--alpha", alpha, "margin");
    app->add_option("--beta", beta, "intra weight");
    app->add_option("--beta-preset", beta_preset, "fixed | count_balanced");
    app->add_option("--gamma", gamma, "denominator offset");
    app->add_option("--lr", lr, "initial learning rate");
    app->add_option("--iters", iters, "training iterations");
    app->add_option("--decay-start", decay_start, "iteration where learning rate decay begins");
    app->add_option("--checkpoint-every", checkpoint_every, "periodic checkpoint interval");
    app->add_option("--seed", seed, "experiment seed");
    app->add_option("--P", P, "identities per batch");
    app->add_option("--K", K, "items per identity");
    app->add_option("--embedding-dim", embedding_dim, "embedding dimension");
    app->add_option("--hidden", hidden, "hidden layer widths");
    app->add_option("--output-gain", output_gain, "initial scale of the embedding layer");
  }

  json merged(Run* run) const {
    json j = json::object();
    if (!config_path.empty()) {
      const std::string text = read_file(config_path);
      if (run != nullptr) run->input_file("config", config_path);
      try {
        j = json::parse(text);
      } catch (const json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    if (loss) j["loss"] = *loss;
    if (alpha) j["alpha"] = *alpha;
    if (beta) j["beta"] = *beta;
    if (beta_preset) j["beta_preset"] = *beta_preset;
    if (gamma) j["gamma"] = *gamma;
    if (lr) j["learning_rate"] = *lr;
    if (iters) j["total_iters"] = *iters;
    if (decay_start) j["decay_start"] = *decay_start;
    if (checkpoint_every) j["checkpoint_every"] = *checkpoint_every;
    if (seed) j["seed"] = *seed;
    if (P) j["P"] = *P;
    if (K) j["K"] = *K;
    if (embedding_dim) j["embedding_dim"] = *embedding_dim;
    if (!hidden.empty()) j["hidden"] = hidden;
    if (output_gain) j["output_gain"] = *output_gain;
    return j;
  }

  TrainConfig resolve(Run* run) const { return train_config_from_json(merged(run)); }
};

std::string checkpoint_name(std::int64_t step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint_%08lld.json", static_cast<long long>(step));
  return buf;
}

int cmd_train(const TrainFlags& flags, const DatasetArgs& data, const std::string& resume,
              const fs::path& out_dir, std::ostream& out) {
  Run run("train", out_dir);
  const TrainConfig config = flags.resolve(&run);
  run.manifest()["config"] = to_json(config);
  run.manifest()["seed"] = config.seed;
  const LabeledDataset ds = data.load(run, "train");

  std::optional<Checkpoint> start;
  if (!resume.empty()) {
    run.input_file("resume", resume);
    start = load_checkpoint(resume);
  }

  TrainHooks hooks;
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    if (c.adam.step_count != config.total_iters) run.write_checkpoint(checkpoint_name(c.adam.step_count), c);
  };
  hooks.on_divergence = [&](const Checkpoint& c) { run.write_checkpoint("checkpoint_last_good.json", c); };
  try {
    const TrainResult result = train(config, ds, hooks, start ? &*start : nullptr);
    run.write_checkpoint("checkpoint.json", result.checkpoint);
    run.write("train_log.csv", result.log.csv());
    const double final_loss = result.log.records.empty() ? 0.0 : result.log.records.back().loss;
    run.manifest()["final_loss"] = final_loss;
    run.finish("ok");
    out << "trained " << to_string(config.loss) << " for " << result.log.records.size()
        << " iterations, final loss " << format_double(final_loss) << "\n";
  } catch (const DivergenceError& e) {
    run.manifest()["diverged_at"] = e.iteration();
    run.finish("diverged");
    throw;
  }
  return kExitOk;
}

// Embeds `ds` through the checkpoint, or takes the items as embeddings when none is given.
EmbeddingBatch embed_dataset(Run& run, const std::string& checkpoint, const LabeledDataset& ds) {
  if (checkpoint.empty()) return {ds.items, ds.labels};
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint);
  run.input_file("checkpoint", checkpoint);
  const Checkpoint c = load_checkpoint(checkpoint);
  if (c.params.input_dim() != ds.items.cols()) {
    throw ConfigError("checkpoint expects input dimension " + std::to_string(c.params.input_dim()) +
                      ", dataset has " + std::to_string(ds.items.cols()));
  }
  return {mlp_embed(c.params, ds.items), ds.labels};
}

struct StreamArgs {
  std::string checkpoint;
  std::optional<double> th;
  bool sweep = false;
  std::vector<double> sweep_values;
  std::size_t group_min = 4, group_max = 6;
  std::uint64_t seed = 0;
  std::size_t interval = kDefaultMetricsInterval;
  std::size_t grid_size = 24;
};

int cmd_eval_stream(const StreamArgs& a, const DatasetArgs& data, const fs::path& out_dir,
                    std::ostream& out) {
  if (a.th.has_value() == (a.sweep || !a.sweep_values.empty())) {
    throw ConfigError("eval-stream needs exactly one of --th or --sweep");
  }
  Run run("eval-stream", out_dir);
  const LabeledDataset ds = data.load(run, "test");
  const EmbeddingBatch emb = embed_dataset(run, a.checkpoint, ds);

  const DatasetIndex index = DatasetIndex::from_labels(emb.labels);
  const std::size_t gmax = std::min(a.group_max, index.identity_count());
  const std::size_t gmin = std::min(a.group_min, gmax);
  Rng rng(a.seed);
  const std::vector<ItemRef> order = build_stream(index, gmin, gmax, rng);
  EmbeddingBatch stream{Matrix(order.size(), emb.vectors.cols()), {}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = emb.vectors.row(order[i].item);
    std::copy(src.begin(), src.end(), stream.vectors.row(i).begin());
    stream.labels.push_back(order[i].label);
  }

  json metrics{{"stream_length", order.size()}, {"identities", index.identity_count()},
               {"group_min", gmin}, {"group_max", gmax}, {"seed", a.seed}};
  double th = 0.0;
  if (a.th) {
    th = *a.th;
  } else {
    const std::vector<double> grid =
        a.sweep_values.empty() ? default_threshold_grid(stream.vectors, a.grid_size, a.seed) : a.sweep_values;
    const SweepResult sweep = threshold_sweep(stream, grid);
    run.write("sweep.csv", sweep_csv(sweep));
    th = sweep.rows[sweep.best].th;
    json rows = json::array();
    for (const auto& r : sweep.rows) rows.push_back({{"th", r.th}, {"C_q", r.cluster_quality}, {"rand_index", r.rand_index}});
    metrics["sweep"] = rows;
  }
  const StreamRun result = run_stream(stream, th, a.interval);
  const StreamMetrics& last = result.curve.back();
  metrics["th"] = th;
  metrics["clusters"] = result.state.clusters.size();
  metrics["final"] = to_json(last);
  run.write("curve.csv", curve_csv(result.curve));
  run.write("trace.csv", trace_csv(result.trace));
  run.write("stream_metrics.json", metrics.dump(2) + "\n");
  run.manifest()["seed"] = a.seed;
  run.manifest()["th"] = th;
  run.finish("ok");
  out << "th " << format_double(th) << ": C_q " << format_double(last.cluster_quality) << ", rand index "
      << format_double(last.rand_index) << ", " << result.state.clusters.size() << " clusters over "
      << last.n_fed << " records\n";
  return kExitOk;
}

int cmd_eval_rank(const std::string& checkpoint, const DatasetArgs& data, std::uint64_t seed,
                  std::size_t max_rank, const fs::path& out_dir, std::ostream& out) {
  Run run("eval-rank", out_dir);
  const LabeledDataset ds = data.load(run, "test");
  const EmbeddingBatch gallery = embed_dataset(run, checkpoint, ds);

  // One query per identity; the query stays in the gallery but not in its own ranking.
  const DatasetIndex index = DatasetIndex::from_labels(gallery.labels);
  Rng rng(seed);
  EmbeddingBatch queries{Matrix(index.identity_count(), gallery.vectors.cols()), {}};
  std::vector<std::int64_t> self;
  for (std::size_t id = 0; id < index.identity_count(); ++id) {
    const auto& items = index.items[id];
    const std::size_t pick = items[rng.below(items.size())];
    const auto src = gallery.vectors.row(pick);
    std::copy(src.begin(), src.end(), queries.vectors.row(id).begin());
    queries.labels.push_back(index.identities[id]);
    self.push_back(static_cast<std::int64_t>(pick));
  }
  const RankingReport report = cmc_map(queries, gallery, std::min(max_rank, gallery.labels.size() - 1), self);
  json j = to_json(report);
  j["seed"] = seed;
  run.write("rank_metrics.json", j.dump(2) + "\n");
  run.manifest()["seed"] = seed;
  run.finish("ok");
  out << "rank-1 " << format_double(report.cmc.at(0)) << ", mAP " << format_double(report.map) << " over "
      << report.evaluated << " queries\n";
  return kExitOk;
}

struct GradcheckArgs {
  std::string loss = "batch_hard_cluster";
  std::size_t P = 3, K = 4, d = 5;
  std::uint64_t seed = 0;
  std::optional<double> alpha;
  double beta = 1.0, gamma = 1e-8;
  std::size_t batches = 1;
  bool collapse = false;
  std::string out_dir;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  TrainConfig config;
  config.loss = parse_loss_kind(a.loss);
  config.loss_config = {a.alpha.value_or(default_alpha(config.loss)), a.beta, a.gamma};
  config.loss_config.validate();
  if (a.P < 2 || a.K < 1 || a.d < 1 || a.batches < 1) throw ConfigError("gradcheck needs P >= 2, K >= 1, d >= 1");

  Rng rng(a.seed);
  json reports = json::array();
  bool pass = true;
  for (std::size_t b = 0; b < a.batches; ++b) {
    InputBatch inputs{Matrix(a.P * a.K, a.d), {}};
    for (std::size_t i = 0; i < a.P * a.K; ++i) inputs.labels.push_back(static_cast<int>(i / a.K));
    if (!a.collapse) {
      for (double& v : inputs.rows.data()) v = rng.normal();
    }
    // Plain triplet draws its triplets from a fixed stream so every evaluation sees the same set.
    const Rng triplet_rng(rng.next_u64());
    const EmbeddingLossFn loss = [&](const EmbeddingBatch& e) {
      Rng r = triplet_rng;
      return evaluate_loss(config.loss, e, config, r);
    };
    const GradcheckReport direct = gradcheck_embeddings(loss, {inputs.rows, inputs.labels});
    const MlpParams net = init_mlp(a.d, {8}, a.d, rng);
    const GradcheckReport through = gradcheck(loss, net, inputs);
    pass = pass && direct.pass && through.pass;
    reports.push_back({{"embeddings", {{"max_rel_error", direct.max_rel_error}, {"checked", direct.checked},
                                       {"skipped", direct.skipped}, {"pass", direct.pass}}},
                       {"network", {{"max_rel_error", through.max_rel_error}, {"checked", through.checked},
                                    {"skipped", through.skipped}, {"pass", through.pass}}}});
    out << "batch " << b << ": embeddings max rel err " << format_double(direct.max_rel_error) << " ("
        << direct.checked << " checked, " << direct.skipped << " skipped), network max rel err "
        << format_double(through.max_rel_error) << " (" << through.checked << " checked, " << through.skipped
        << " skipped)\n";
  }
  out << "gradcheck " << a.loss << ": " << (pass ? "PASS" : "FAIL") << "\n";
  if (!a.out_dir.empty()) {
    Run run("gradcheck", a.out_dir);
    json args{{"loss", a.loss}, {"P", a.P}, {"K", a.K}, {"d", a.d}, {"alpha", config.loss_config.alpha},
              {"beta", a.beta}, {"gamma", a.gamma}, {"batches", a.batches}, {"collapse", a.collapse}};
    run.manifest()["config"] = args;
    run.manifest()["seed"] = a.seed;
    run.write("gradcheck.json", json{{"pass", pass}, {"batches", reports}}.dump(2) + "\n");
    run.finish(pass ? "ok" : "failed");
  }
  return pass ? kExitOk : kExitFailed;
}

int cmd_export(const std::string& checkpoint, const DatasetArgs& data, const fs::path& out_dir,
               std::ostream& out) {
  Run run("export", out_dir);
  const LabeledDataset ds = data.load(run, "test");
  const EmbeddingBatch emb = embed_dataset(run, checkpoint, ds);
  run.write("embeddings.csv", embeddings_csv(emb));
  run.write("dataset.json", run.manifest()["dataset"].dump(2) + "\n");
  run.finish("ok");
  out << "exported " << emb.labels.size() << " rows of dimension " << emb.vectors.cols() << "\n";
  return kExitOk;
}

int cmd_print_config(const TrainFlags& flags, std::ostream& out) {
  json j{{"desk", to_json(TrainConfig::desk())},
         {"full_scale", to_json(TrainConfig::full_scale())},
         {"resolved", to_json(flags.resolve(nullptr))}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding training and sequential clustering toolkit", "embedforge"};
  app.require_subcommand(1);

  TrainFlags flags;
  DatasetArgs data;
  std::string out_dir, checkpoint, resume;

  auto* train_cmd = app.add_subcommand("train", "train an embedding network");
  flags.add_options(train_cmd);
  data.add_options(train_cmd);
  train_cmd->add_option("--resume", resume, "continue from a checkpoint");
  train_cmd->add_option("--out", out_dir, "output directory")->required();

  StreamArgs stream;
  auto* stream_cmd = app.add_subcommand("eval-stream", "sequential clustering of an embedded stream");
  data.add_options(stream_cmd);
  stream_cmd->add_option("--checkpoint", stream.checkpoint, "trained checkpoint (omit to use items as embeddings)");
  stream_cmd->add_option("--th", stream.th, "squared-distance threshold");
  stream_cmd->add_flag("--sweep", stream.sweep, "sweep the default threshold grid");
  stream_cmd->add_option("--sweep-values", stream.sweep_values, "explicit threshold candidates");
  stream_cmd->add_option("--grid-size", stream.grid_size, "default grid size");
  stream_cmd->add_option("--group-min", stream.group_min, "smallest identity group");
  stream_cmd->add_option("--group-max", stream.group_max, "largest identity group");
  stream_cmd->add_option("--seed", stream.seed, "stream order seed");
  stream_cmd->add_option("--interval", stream.interval, "records between curve points");
  stream_cmd->add_option("--out", out_dir, "output directory")->required();

  std::uint64_t rank_seed = 0;
  std::size_t max_rank = 10;
  auto* rank_cmd = app.add_subcommand("eval-rank", "CMC and mAP with one query per identity");
  data.add_options(rank_cmd);
  rank_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint (omit to use items as embeddings)");
  rank_cmd->add_option("--seed", rank_seed, "query draw seed");
  rank_cmd->add_option("--max-rank", max_rank, "longest CMC rank reported");
  rank_cmd->add_option("--out", out_dir, "output directory")->required();

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of a loss on a random batch");
  gc_cmd->add_option("--loss", gc.loss, "loss kind");
  gc_cmd->add_option("--P", gc.P, "identities");
  gc_cmd->add_option("--K", gc.K, "items per identity");
  gc_cmd->add_option("--d", gc.d, "embedding dimension");
  gc_cmd->add_option("--seed", gc.seed, "batch seed");
  gc_cmd->add_option("--alpha", gc.alpha, "margin");
  gc_cmd->add_option("--beta", gc.beta, "intra weight");
  gc_cmd->add_option("--gamma", gc.gamma, "denominator offset");
  gc_cmd->add_option("--batches", gc.batches, "number of random batches");
  gc_cmd->add_flag("--collapse", gc.collapse, "put every item at the origin");
  gc_cmd->add_option("--out", gc.out_dir, "optional output directory");

  auto* export_cmd = app.add_subcommand("export", "write dataset embeddings as CSV");
  data.add_options(export_cmd);
  export_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint (omit to export raw items)");
  export_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* print_cmd = app.add_subcommand("print-config", "show default and resolved train configs");
  print_cmd->add_option("--config", flags.config_path, "train config JSON");
  print_cmd->add_option("--loss", flags.loss, "loss kind");
  print_cmd->add_option("--iters", flags.iters, "training iterations");
  print_cmd->add_option("--seed", flags.seed, "experiment seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(flags, data, resume, out_dir, out);
    if (stream_cmd->parsed()) return cmd_eval_stream(stream, data, out_dir, out);
    if (rank_cmd->parsed()) return cmd_eval_rank(checkpoint, data, rank_seed, max_rank, out_dir, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc, out);
    if (export_cmd->parsed()) return cmd_export(checkpoint, data, out_dir, out);
    return cmd_print_config(flags, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace embedforge
