#pragma once

#include <cstddef>
#include <vector>

#include "embedforge/rng.hpp"

namespace embedforge {

// identity -> item indices, identities in ascending label order.
struct DatasetIndex {
  std::vector<int> identities;
  std::vector<std::vector<std::size_t>> items;
  std::size_t total_items = 0;

  static DatasetIndex from_labels(const std::vector<int>& labels);
  std::size_t identity_count() const { return identities.size(); }
};

struct SamplerConfig {
  std::size_t P = 8;  // identities per batch
  std::size_t K = 4;  // items per identity

  // Throws ConfigError unless P >= 2, K >= 1 and P <= identity count.
  void validate(const DatasetIndex& index) const;
};

struct ItemRef {
  std::size_t item;
  int label;
  friend bool operator==(const ItemRef&, const ItemRef&) = default;
};

// P distinct identities, K items each (with replacement only when the
// identity has fewer than K items). Rows are grouped by identity.
std::vector<ItemRef> pk_sample(const DatasetIndex& index, const SamplerConfig& config, Rng& rng);

// Consumes identities in random groups of group_min..group_max (the last
// group may be smaller), shuffling each group's items together. Every item
// appears exactly once.
std::vector<ItemRef> build_stream(const DatasetIndex& index, std::size_t group_min,
                                  std::size_t group_max, Rng& rng);

}  // namespace embedforge
