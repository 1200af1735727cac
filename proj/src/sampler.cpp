#include "embedforge/sampler.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "embedforge/error.hpp"

namespace embedforge {

DatasetIndex DatasetIndex::from_labels(const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  DatasetIndex index;
  for (auto& [label, items] : by_label) {
    index.identities.push_back(label);
    index.items.push_back(std::move(items));
  }
  index.total_items = labels.size();
  return index;
}

void SamplerConfig::validate(const DatasetIndex& index) const {
  if (P < 2) throw ConfigError("sampler: P must be >= 2, got " + std::to_string(P));
  if (K < 1) throw ConfigError("sampler: K must be >= 1");
  if (P > index.identity_count()) {
    throw ConfigError("sampler: P=" + std::to_string(P) + " exceeds the " +
                      std::to_string(index.identity_count()) + " identities in the dataset");
  }
}

namespace {

// First `take` entries of a random permutation of 0..n-1.
std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t take, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

}  // namespace

std::vector<ItemRef> pk_sample(const DatasetIndex& index, const SamplerConfig& config, Rng& rng) {
  config.validate(index);
  std::vector<ItemRef> out;
  out.reserve(config.P * config.K);
  for (std::size_t id : choose_without_replacement(index.identity_count(), config.P, rng)) {
    const auto& items = index.items[id];
    const int label = index.identities[id];
    if (items.size() >= config.K) {
      for (std::size_t k : choose_without_replacement(items.size(), config.K, rng)) {
        out.push_back({items[k], label});
      }
    } else {
      for (std::size_t k = 0; k < config.K; ++k) out.push_back({items[rng.below(items.size())], label});
    }
  }
  return out;
}

std::vector<ItemRef> build_stream(const DatasetIndex& index, std::size_t group_min,
                                  std::size_t group_max, Rng& rng) {
  if (index.identity_count() == 0) throw DataError("cannot build a stream from an empty dataset");
  if (group_min < 2 || group_min > group_max || group_max > index.identity_count()) {
    throw ConfigError("stream group sizes must satisfy 2 <= min <= max <= identities (" +
                      std::to_string(group_min) + ", " + std::to_string(group_max) + ", " +
                      std::to_string(index.identity_count()) + ")");
  }
  std::vector<std::size_t> order(index.identity_count());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<ItemRef> stream;
  stream.reserve(index.total_items);
  std::size_t next = 0;
  while (next < order.size()) {
    const std::size_t want = group_min + rng.below(group_max - group_min + 1);
    const std::size_t take = std::min(want, order.size() - next);
    std::vector<ItemRef> group;
    for (std::size_t g = next; g < next + take; ++g) {
      for (std::size_t item : index.items[order[g]]) group.push_back({item, index.identities[order[g]]});
    }
    rng.shuffle(group);
    stream.insert(stream.end(), group.begin(), group.end());
    next += take;
  }
  return stream;
}

}  // namespace embedforge
