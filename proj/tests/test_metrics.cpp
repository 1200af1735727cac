#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "embedforge/error.hpp"
#include "embedforge/metrics.hpp"
#include "embedforge/rng.hpp"
#include "oracles.hpp"

using namespace embedforge;

namespace {

std::vector<int> random_partition(std::size_t n, int k, Rng& rng) {
  std::vector<int> out(n);
  for (int& v : out) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return out;
}

std::vector<int> relabel(const std::vector<int>& v, int k, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 100);
  rng.shuffle(perm);
  std::vector<int> out;
  for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)]);
  return out;
}

// No cluster has a tied majority and no identity tags two clusters with equal counts.
bool tie_free(const std::vector<int>& a, const std::vector<int>& t, int k) {
  std::vector<std::vector<int>> c(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k)));
  for (std::size_t i = 0; i < a.size(); ++i) ++c[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(t[i])];
  std::vector<std::vector<int>> tagged(static_cast<std::size_t>(k));
  for (auto& row : c) {
    auto sorted = row;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted[0] == 0) continue;
    if (sorted[0] == sorted[1]) return false;
    tagged[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())].push_back(sorted[0]);
  }
  for (auto& counts : tagged) {
    std::sort(counts.rbegin(), counts.rend());
    if (counts.size() > 1 && counts[0] == counts[1]) return false;
  }
  return true;
}

EmbeddingBatch batch(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  return {Matrix::from_rows(rows), std::move(labels)};
}

}  // namespace

TEST_CASE("cluster quality") {
  CHECK(cluster_quality({0, 0, 1, 1, 2}, {7, 7, 3, 3, 1}) == 1.0);
  // A A B B in clusters 0 0 0 1
  CHECK(cluster_quality({0, 0, 0, 1}, {0, 0, 1, 1}) == 0.75);
  // A holds the majority of cluster 0 (3) and cluster 1 (2): cluster 1 loses its tag.
  CHECK(cluster_quality({0, 0, 0, 1, 1, 1}, {0, 0, 0, 0, 0, 1}) == doctest::Approx(3.0 / 6.0));
  // majority tie inside a cluster goes to the lower identity
  CHECK(cluster_quality({0, 0}, {4, 2}) == 0.5);
  CHECK(cluster_quality({0, 0, 1}, {4, 2, 4}) == doctest::Approx(2.0 / 3.0));
  // tag tie across clusters keeps the lower cluster id
  CHECK(cluster_quality({5, 3}, {1, 1}) == 0.5);
  CHECK_THROWS_AS(cluster_quality({0}, {0, 1}), StructureError);
}

TEST_CASE("rand index") {
  CHECK(rand_index({0, 0, 1, 1}, {3, 3, 9, 9}) == 1.0);
  CHECK(rand_index({0, 1, 0, 1}, {0, 0, 1, 1}) == doctest::Approx(2.0 / 6.0));
  CHECK_THROWS_AS(rand_index({0}, {0}), StructureError);
  CHECK_THROWS_AS(rand_index({0, 1}, {0}), StructureError);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_partition(50, 1 + trial % 7, rng);
    const auto t = random_partition(50, 1 + trial % 5, rng);
    CHECK(rand_index(a, t) == oracle::rand_index_pairs(a, t));
    CHECK(rand_index(a, t) == rand_index(t, a));
    CHECK(rand_index(a, a) == 1.0);
  }
}

TEST_CASE("relabeling invariance") {
  Rng rng(2);
  int checked = 0;
  while (checked < 100) {
    const auto a = random_partition(30, 5, rng);
    const auto t = random_partition(30, 5, rng);
    if (!tie_free(a, t, 5)) continue;
    ++checked;
    const auto a2 = relabel(a, 5, rng);
    const auto t2 = relabel(t, 5, rng);
    CHECK(cluster_quality(a2, t2) == cluster_quality(a, t));
    CHECK(rand_index(a2, t2) == rand_index(a, t));
    const double cq = cluster_quality(a, t);
    CHECK(cq >= 0.0);
    CHECK(cq <= 1.0);
  }
}

TEST_CASE("CMC and mAP") {
  SUBCASE("exact duplicates with far decoys") {
    const auto q = batch({{0, 0}, {5, 5}}, {1, 2});
    const auto g = batch({{100, 100}, {5, 5}, {0, 0}, {-100, 0}}, {9, 2, 1, 8});
    const auto r = cmc_map(q, g, 3);
    CHECK(r.cmc[0] == 1.0);
    CHECK(r.map == 1.0);
  }
  SUBCASE("wrong match ranked first") {
    const auto r = cmc_map(batch({{0}}, {1}), batch({{1}, {2}}, {2, 1}), 2);
    CHECK(r.cmc == std::vector<double>{0.0, 1.0});
    CHECK(r.map == 0.5);
    CHECK(r.average_precision == std::vector<double>{0.5});
  }
  SUBCASE("distance ties keep gallery order") {
    const auto r = cmc_map(batch({{0}}, {1}), batch({{1}, {-1}}, {2, 1}), 1);
    CHECK(r.cmc[0] == 0.0);
  }
  SUBCASE("query without gallery match is skipped and reported") {
    const auto r = cmc_map(batch({{0}, {3}}, {1, 7}), batch({{0}, {1}}, {1, 2}), 1);
    CHECK(r.evaluated == 1);
    CHECK(r.skipped_queries == std::vector<std::size_t>{1});
    CHECK(r.map == 1.0);
    CHECK_THROWS_AS(cmc_map(batch({{3}}, {7}), batch({{0}}, {1}), 1), DataError);
  }
  SUBCASE("self matches are excluded") {
    const auto g = batch({{0}, {0.1}, {5}}, {1, 2, 1});
    const auto r = cmc_map(batch({{0}}, {1}), g, 1, {0});
    CHECK(r.cmc[0] == 0.0);
    CHECK(r.map == 0.5);
  }
  SUBCASE("random instances agree with the direct definition") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      EmbeddingBatch q{Matrix(50, 3), random_partition(50, 6, rng)};
      EmbeddingBatch g{Matrix(80, 3), random_partition(80, 6, rng)};
      for (double& v : q.vectors.data()) v = std::round(rng.normal() * 2) / 2;  // coarse grid forces ties
      for (double& v : g.vectors.data()) v = std::round(rng.normal() * 2) / 2;
      const auto r = cmc_map(q, g, 10);
      const auto o = oracle::ranking_direct(q, g, 10);
      CHECK(r.cmc == o.cmc);
      CHECK(r.map == o.map);
      for (std::size_t k = 1; k < r.cmc.size(); ++k) CHECK(r.cmc[k] >= r.cmc[k - 1]);
      for (double ap : r.average_precision) CHECK(ap <= 1.0);
    }
  }
  SUBCASE("json report") {
    const auto j = to_json(cmc_map(batch({{0}}, {1}), batch({{1}, {2}, {3}, {4}, {5}}, {2, 1, 2, 2, 2}), 5));
    CHECK(j["rank1"] == 0.0);
    CHECK(j["rank5"] == 1.0);
    CHECK(j["map"] == 0.5);
  }
}
