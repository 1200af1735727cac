#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "embedforge/types.hpp"

namespace embedforge {

// Fraction of records that sit in a cluster tagged with their own identity.
// A cluster is tagged with its majority identity (ties: lower identity id);
// when one identity tags several clusters only the one holding most of that
// identity's records keeps the tag (ties: lower cluster id).
double cluster_quality(const std::vector<int>& assignments, const std::vector<int>& truths);

// Unadjusted Rand index from the contingency table. Needs n >= 2.
double rand_index(const std::vector<int>& assignments, const std::vector<int>& truths);

struct StreamMetrics {
  std::size_t n_fed = 0;
  double cluster_quality = 0.0;
  double rand_index = 0.0;
};

struct RankingReport {
  std::vector<double> cmc;  // cmc[r] = rate of a correct match within the top r+1
  double map = 0.0;
  std::vector<double> average_precision;  // per evaluated query
  std::size_t evaluated = 0;
  std::vector<std::size_t> skipped_queries;  // queries with no gallery match
};

// Ranks the gallery for each query by squared Euclidean distance (ties by
// gallery order). `query_gallery_index[q]`, when given and >= 0, names the
// gallery row that is the query itself; that row is left out of its ranking.
RankingReport cmc_map(const EmbeddingBatch& queries, const EmbeddingBatch& gallery,
                      std::size_t max_rank,
                      const std::vector<std::int64_t>& query_gallery_index = {});

nlohmann::json to_json(const StreamMetrics& m);
nlohmann::json to_json(const RankingReport& r);

}  // namespace embedforge
