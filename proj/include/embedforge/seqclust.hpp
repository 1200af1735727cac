#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "embedforge/metrics.hpp"
#include "embedforge/types.hpp"

namespace embedforge {

// Online clustering of an embedding stream: each arrival joins the cluster
// with the nearest running mean when that squared distance is below the
// threshold, and opens a new cluster otherwise (distance == threshold opens
// a new one). Thresholds are in squared-distance units. Clusters are never
// merged or removed.

struct Cluster {
  std::vector<double> mean;
  std::size_t count = 0;
  int id = 0;  // creation order, dense from 0
};

struct ClusterState {
  std::vector<Cluster> clusters;
  std::size_t records = 0;
};

struct TraceEntry {
  int assigned_cluster = 0;
  double min_distance = 0.0;  // +inf for the first record
  bool new_cluster = false;
};

// Only the embedding reaches the assignment path; labels are for metrics.
TraceEntry seq_cluster_step(ClusterState& state, std::span<const double> embedding, double th);

inline constexpr std::size_t kDefaultMetricsInterval = 1000;

struct StreamRun {
  ClusterState state;
  std::vector<TraceEntry> trace;
  std::vector<StreamMetrics> curve;  // every `interval` records and at the end
};

// `stream` rows are embeddings in arrival order; labels are the true identities.
StreamRun run_stream(const EmbeddingBatch& stream, double th,
                     std::size_t interval = kDefaultMetricsInterval);

struct SweepRow {
  double th = 0.0;
  double cluster_quality = 0.0;
  double rand_index = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // candidate order
  std::size_t best = 0;        // highest final C_q, ties to the smaller th
};

// threads == 0 uses worker_threads().
SweepResult threshold_sweep(const EmbeddingBatch& stream, const std::vector<double>& candidates,
                            std::size_t threads = 0);

// `count` log-spaced thresholds between the 1st and 99th percentile of
// pairwise squared distances (all pairs for short streams, otherwise a
// seeded sample of pairs).
std::vector<double> default_threshold_grid(const Matrix& embeddings, std::size_t count = 24,
                                           std::uint64_t seed = 0);

std::string trace_csv(const std::vector<TraceEntry>& trace);
std::string curve_csv(const std::vector<StreamMetrics>& curve);
std::string sweep_csv(const SweepResult& sweep);

// Shortest round-trip formatting shared by the CSV writers.
std::string format_double(double v);

}  // namespace embedforge
