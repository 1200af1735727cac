#include "embedforge/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "embedforge/error.hpp"

namespace embedforge {

namespace {

void check_aligned(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    throw StructureError("assignment list has " + std::to_string(a.size()) +
                         " entries, truth list has " + std::to_string(b.size()));
  }
}

std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

}  // namespace

double cluster_quality(const std::vector<int>& assignments, const std::vector<int>& truths) {
  check_aligned(assignments, truths);
  if (assignments.empty()) throw StructureError("cluster quality of an empty assignment");

  // counts[cluster][identity]
  std::map<int, std::map<int, std::int64_t>> counts;
  for (std::size_t i = 0; i < assignments.size(); ++i) ++counts[assignments[i]][truths[i]];

  // identity -> (cluster, count) of the cluster keeping that identity's tag
  std::map<int, std::pair<int, std::int64_t>> keeper;
  for (const auto& [cluster, by_id] : counts) {
    int tag = by_id.begin()->first;
    std::int64_t best = by_id.begin()->second;
    for (const auto& [id, c] : by_id) {
      if (c > best) {
        best = c;
        tag = id;
      }
    }
    auto it = keeper.find(tag);
    // Clusters are visited in ascending id, so strict > keeps the lower id on ties.
    if (it == keeper.end() || best > it->second.second) keeper[tag] = {cluster, best};
  }

  std::int64_t correct = 0;
  for (const auto& [id, kc] : keeper) correct += kc.second;
  return static_cast<double>(correct) / static_cast<double>(assignments.size());
}

double rand_index(const std::vector<int>& assignments, const std::vector<int>& truths) {
  check_aligned(assignments, truths);
  const auto n = static_cast<std::int64_t>(assignments.size());
  if (n < 2) throw StructureError("Rand index needs at least 2 records");

  std::map<std::pair<int, int>, std::int64_t> joint;
  std::map<int, std::int64_t> by_cluster;
  std::map<int, std::int64_t> by_truth;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    ++joint[{assignments[i], truths[i]}];
    ++by_cluster[assignments[i]];
    ++by_truth[truths[i]];
  }
  std::int64_t same_both = 0;
  for (const auto& [k, c] : joint) same_both += pairs(c);
  std::int64_t same_cluster = 0;
  for (const auto& [k, c] : by_cluster) same_cluster += pairs(c);
  std::int64_t same_truth = 0;
  for (const auto& [k, c] : by_truth) same_truth += pairs(c);

  const std::int64_t total = pairs(n);
  // together in both + apart in both
  const std::int64_t agree = same_both + (total - same_cluster - same_truth + same_both);
  return static_cast<double>(agree) / static_cast<double>(total);
}

RankingReport cmc_map(const EmbeddingBatch& queries, const EmbeddingBatch& gallery,
                      std::size_t max_rank, const std::vector<std::int64_t>& query_gallery_index) {
  const std::size_t nq = queries.vectors.rows();
  const std::size_t ng = gallery.vectors.rows();
  if (queries.labels.size() != nq || gallery.labels.size() != ng) {
    throw StructureError("ranking inputs: labels and rows differ in count");
  }
  if (nq > 0 && ng > 0 && queries.vectors.cols() != gallery.vectors.cols()) {
    throw StructureError("query and gallery embeddings differ in dimension");
  }
  if (!query_gallery_index.empty() && query_gallery_index.size() != nq) {
    throw StructureError("query_gallery_index must have one entry per query");
  }
  if (max_rank == 0) throw ConfigError("max_rank must be >= 1");

  RankingReport report;
  report.cmc.assign(max_rank, 0.0);
  std::vector<double> dist(ng);
  std::vector<std::size_t> order;
  for (std::size_t q = 0; q < nq; ++q) {
    const std::int64_t self = query_gallery_index.empty() ? -1 : query_gallery_index[q];
    order.clear();
    std::size_t relevant = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (static_cast<std::int64_t>(g) == self) continue;
      dist[g] = squared_distance(queries.vectors.row(q), gallery.vectors.row(g));
      order.push_back(g);
      if (gallery.labels[g] == queries.labels[q]) ++relevant;
    }
    if (relevant == 0) {
      report.skipped_queries.push_back(q);
      continue;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    std::size_t hits = 0;
    std::size_t first_hit = 0;
    double ap = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (gallery.labels[order[pos]] != queries.labels[q]) continue;
      if (hits == 0) first_hit = pos;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
    ap /= static_cast<double>(relevant);
    for (std::size_t r = first_hit; r < max_rank; ++r) report.cmc[r] += 1.0;
    report.average_precision.push_back(ap);
    ++report.evaluated;
  }
  if (report.evaluated == 0) throw DataError("no query has a matching gallery item");
  const double n = static_cast<double>(report.evaluated);
  for (double& c : report.cmc) c /= n;
  report.map = std::accumulate(report.average_precision.begin(), report.average_precision.end(), 0.0) / n;
  return report;
}

nlohmann::json to_json(const StreamMetrics& m) {
  return {{"n_fed", m.n_fed}, {"cluster_quality", m.cluster_quality}, {"rand_index", m.rand_index}};
}

nlohmann::json to_json(const RankingReport& r) {
  nlohmann::json j{{"cmc", r.cmc},
                   {"map", r.map},
                   {"rank1", r.cmc.front()},
                   {"evaluated_queries", r.evaluated},
                   {"skipped_queries", r.skipped_queries}};
  if (r.cmc.size() >= 5) j["rank5"] = r.cmc[4];
  return j;
}

}  // namespace embedforge
