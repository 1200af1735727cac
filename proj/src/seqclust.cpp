#include "embedforge/seqclust.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "embedforge/error.hpp"
#include "embedforge/parallel.hpp"
#include "embedforge/rng.hpp"

namespace embedforge {

TraceEntry seq_cluster_step(ClusterState& state, std::span<const double> embedding, double th) {
  if (!(th > 0.0)) throw ConfigError("clustering threshold must be > 0");
  for (double v : embedding) {
    if (!std::isfinite(v)) throw DataError("non-finite embedding in stream");
  }
  TraceEntry entry;
  entry.min_distance = std::numeric_limits<double>::infinity();
  std::size_t nearest = 0;
  for (std::size_t c = 0; c < state.clusters.size(); ++c) {
    const auto& mean = state.clusters[c].mean;
    if (mean.size() != embedding.size()) {
      throw DataError("stream embedding has dimension " + std::to_string(embedding.size()) +
                      ", clusters have " + std::to_string(mean.size()));
    }
    const double d = squared_distance(mean, embedding);
    if (d < entry.min_distance) {
      entry.min_distance = d;
      nearest = c;
    }
  }

  if (!state.clusters.empty() && entry.min_distance < th) {
    Cluster& c = state.clusters[nearest];
    const double n = static_cast<double>(c.count);
    for (std::size_t k = 0; k < embedding.size(); ++k) {
      c.mean[k] = (n * c.mean[k] + embedding[k]) / (n + 1.0);
    }
    ++c.count;
    entry.assigned_cluster = c.id;
  } else {
    const int id = static_cast<int>(state.clusters.size());
    state.clusters.push_back({std::vector<double>(embedding.begin(), embedding.end()), 1, id});
    entry.assigned_cluster = id;
    entry.new_cluster = true;
  }
  ++state.records;
  return entry;
}

namespace {

StreamMetrics measure(const std::vector<int>& assigned, const std::vector<int>& truths) {
  StreamMetrics m;
  m.n_fed = assigned.size();
  m.cluster_quality = cluster_quality(assigned, truths);
  // A single record has no pairs; every (vacuous) pair agrees.
  m.rand_index = assigned.size() < 2 ? 1.0 : rand_index(assigned, truths);
  return m;
}

}  // namespace

StreamRun run_stream(const EmbeddingBatch& stream, double th, std::size_t interval) {
  const std::size_t n = stream.vectors.rows();
  if (n == 0) throw DataError("empty stream");
  if (stream.labels.size() != n) throw StructureError("stream rows and labels differ in count");
  if (interval == 0) throw ConfigError("metrics interval must be >= 1");

  StreamRun run;
  run.trace.reserve(n);
  std::vector<int> assigned;
  std::vector<int> truths;
  assigned.reserve(n);
  truths.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    run.trace.push_back(seq_cluster_step(run.state, stream.vectors.row(i), th));
    assigned.push_back(run.trace.back().assigned_cluster);
    truths.push_back(stream.labels[i]);
    if ((i + 1) % interval == 0 || i + 1 == n) run.curve.push_back(measure(assigned, truths));
  }
  return run;
}

SweepResult threshold_sweep(const EmbeddingBatch& stream, const std::vector<double>& candidates,
                            std::size_t threads) {
  if (candidates.empty()) throw ConfigError("threshold sweep needs at least one candidate");
  SweepResult result;
  result.rows.resize(candidates.size());
  parallel_for(candidates.size(), threads == 0 ? worker_threads() : threads, [&](std::size_t i) {
    const StreamRun run = run_stream(stream, candidates[i], std::max<std::size_t>(stream.vectors.rows(), 1));
    const StreamMetrics& last = run.curve.back();
    result.rows[i] = {candidates[i], last.cluster_quality, last.rand_index};
  });
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    const auto& b = result.rows[result.best];
    if (r.cluster_quality > b.cluster_quality ||
        (r.cluster_quality == b.cluster_quality && r.th < b.th)) {
      result.best = i;
    }
  }
  return result;
}

std::vector<double> default_threshold_grid(const Matrix& embeddings, std::size_t count,
                                           std::uint64_t seed) {
  const std::size_t n = embeddings.rows();
  if (n < 2) throw DataError("threshold grid needs at least 2 embeddings");
  if (count == 0) throw ConfigError("threshold grid needs count >= 1");

  constexpr std::size_t kMaxPairs = 20000;
  std::vector<double> dists;
  if (n * (n - 1) / 2 <= kMaxPairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        dists.push_back(squared_distance(embeddings.row(i), embeddings.row(j)));
      }
    }
  } else {
    Rng rng(seed);
    while (dists.size() < kMaxPairs) {
      const std::size_t i = rng.below(n);
      const std::size_t j = rng.below(n);
      if (i != j) dists.push_back(squared_distance(embeddings.row(i), embeddings.row(j)));
    }
  }
  std::sort(dists.begin(), dists.end());
  auto percentile = [&](double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(dists.size())));
    return dists[std::clamp<std::size_t>(rank, 1, dists.size()) - 1];
  };
  double lo = percentile(1.0);
  double hi = percentile(99.0);
  if (!(lo > 0.0)) {
    const auto pos = std::upper_bound(dists.begin(), dists.end(), 0.0);
    if (pos == dists.end()) throw DataError("all stream embeddings coincide; no threshold scale");
    lo = *pos;
  }
  hi = std::max(hi, lo);
  if (count == 1 || hi == lo) return std::vector<double>(count, lo);

  std::vector<double> grid(count);
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  grid.back() = hi;
  return grid;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  out << "index,assigned_cluster,d_k,new_flag\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& t = trace[i];
    out << i << ',' << t.assigned_cluster << ',' << format_double(t.min_distance) << ','
        << (t.new_cluster ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string curve_csv(const std::vector<StreamMetrics>& curve) {
  std::ostringstream out;
  out << "n_fed,C_q,rand_index\n";
  for (const auto& m : curve) {
    out << m.n_fed << ',' << format_double(m.cluster_quality) << ','
        << format_double(m.rand_index) << '\n';
  }
  return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "th,C_q,rand_index,best\n";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const auto& r = sweep.rows[i];
    out << format_double(r.th) << ',' << format_double(r.cluster_quality) << ','
        << format_double(r.rand_index) << ',' << (i == sweep.best ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace embedforge
