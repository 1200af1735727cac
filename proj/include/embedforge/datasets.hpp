#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedforge/matrix.hpp"
#include "embedforge/types.hpp"

namespace embedforge {

// Items with dense identity labels 0..num_identities-1.
struct LabeledDataset {
  Matrix items;
  std::vector<int> labels;
  std::string name;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t num_identities() const;
  // Throws DataError on misaligned labels, non-dense labels or non-finite items.
  void validate() const;
};

// Maps arbitrary labels onto 0..n-1 preserving their sorted order.
std::vector<int> relabel_dense(const std::vector<int>& labels);

struct SyntheticSpec {
  std::size_t num_identities = 10;
  std::size_t per_identity = 40;
  std::size_t input_dim = 32;
  double center_scale = 1.0;  // centers uniform in [-center_scale, center_scale]^dim
  double noise_sigma = 0.5;   // isotropic Gaussian noise per coordinate
  std::uint64_t seed = 0;
};

// Items are emitted identity by identity: labels 0,0,..,1,1,..
LabeledDataset gen_synthetic(const SyntheticSpec& spec);

// MNIST-style IDX pair: unsigned-byte images (magic 0x00000803) and labels
// (magic 0x00000801). Pixels are scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// `label,e0,...,e{d-1}` with 17 significant digits per value.
std::string embeddings_csv(const EmbeddingBatch& batch);
EmbeddingBatch parse_embeddings_csv(const std::string& text);
void export_embeddings(const EmbeddingBatch& batch, const std::filesystem::path& path);
EmbeddingBatch import_embeddings(const std::filesystem::path& path);

// A features CSV in the embeddings layout, with labels made dense.
LabeledDataset load_csv_dataset(const std::filesystem::path& path);

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& rows);

// Keeps at most `per_identity` items of each identity (first ones in file order).
LabeledDataset take_per_identity(const LabeledDataset& ds, std::size_t per_identity);

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

// Moves `holdout` randomly chosen items of every identity into the test part.
// Identities with no more than `holdout` items stay entirely in train.
DatasetSplit split_per_identity(const LabeledDataset& ds, std::size_t holdout, std::uint64_t seed);

nlohmann::json metadata_sidecar(const LabeledDataset& ds);

}  // namespace embedforge
