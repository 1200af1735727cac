#include "embedforge/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "embedforge/checkpoint.hpp"
#include "embedforge/error.hpp"
#include "embedforge/rng.hpp"
#include "embedforge/sampler.hpp"
#include "embedforge/seqclust.hpp"

namespace embedforge {

std::size_t LabeledDataset::num_identities() const {
  return std::set<int>(labels.begin(), labels.end()).size();
}

void LabeledDataset::validate() const {
  if (labels.size() != items.rows()) {
    throw DataError("dataset '" + name + "' has " + std::to_string(items.rows()) + " items but " +
                    std::to_string(labels.size()) + " labels");
  }
  const std::set<int> ids(labels.begin(), labels.end());
  if (!ids.empty() && (*ids.begin() != 0 || *ids.rbegin() != static_cast<int>(ids.size()) - 1)) {
    throw DataError("dataset '" + name + "' labels are not dense 0..n-1");
  }
  if (!items.all_finite()) throw DataError("dataset '" + name + "' has non-finite items");
}

std::vector<int> relabel_dense(const std::vector<int>& labels) {
  std::map<int, int> dense;
  for (int l : labels) dense.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : dense) id = next++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(dense.at(l));
  return out;
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.num_identities < 1 || spec.per_identity < 1 || spec.input_dim < 1) {
    throw ConfigError("synthetic dataset counts must all be >= 1");
  }
  if (!(spec.noise_sigma >= 0.0) || !(spec.center_scale >= 0.0)) {
    throw ConfigError("synthetic noise_sigma and center_scale must be >= 0");
  }
  Rng rng(spec.seed);
  Matrix centers(spec.num_identities, spec.input_dim);
  for (double& c : centers.data()) c = rng.uniform(-spec.center_scale, spec.center_scale);

  LabeledDataset ds;
  ds.items = Matrix(spec.num_identities * spec.per_identity, spec.input_dim);
  std::size_t row = 0;
  for (std::size_t id = 0; id < spec.num_identities; ++id) {
    for (std::size_t k = 0; k < spec.per_identity; ++k, ++row) {
      for (std::size_t c = 0; c < spec.input_dim; ++c) {
        ds.items(row, c) = centers(id, c) + spec.noise_sigma * rng.normal();
      }
      ds.labels.push_back(static_cast<int>(id));
    }
  }
  ds.name = "synthetic";
  ds.metadata = {{"generator", "gaussian_identity_clusters"},
                 {"num_identities", spec.num_identities},
                 {"per_identity", spec.per_identity},
                 {"input_dim", spec.input_dim},
                 {"center_scale", spec.center_scale},
                 {"noise_sigma", spec.noise_sigma},
                 {"seed", spec.seed}};
  return ds;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError(path.string() + ": truncated header at byte offset " + std::to_string(offset));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void expect_magic(const std::vector<unsigned char>& bytes, std::uint32_t magic,
                  const std::filesystem::path& path) {
  const std::uint32_t got = read_be32(bytes, 0, path);
  if (got != magic) {
    std::ostringstream msg;
    msg << path.string() << ": bad IDX magic 0x" << std::hex << got << " at byte offset 0, expected 0x"
        << magic;
    throw FormatError(msg.str());
  }
}

void expect_size(const std::vector<unsigned char>& bytes, std::size_t needed,
                 const std::filesystem::path& path) {
  if (bytes.size() < needed) {
    throw FormatError(path.string() + ": truncated data, file ends at byte offset " +
                      std::to_string(bytes.size()) + " but payload needs " +
                      std::to_string(needed) + " bytes");
  }
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_bytes(images);
  const auto lab = read_bytes(labels);
  expect_magic(img, 0x00000803, images);
  expect_magic(lab, 0x00000801, labels);

  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count) {
    throw FormatError(images.string() + " declares " + std::to_string(count) + " images at byte offset 4 but " +
                      labels.string() + " declares " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  expect_size(img, 16 + count * pixels, images);
  expect_size(lab, 8 + count, labels);

  LabeledDataset ds;
  ds.items = Matrix(count, pixels);
  std::vector<int> raw;
  raw.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) ds.items(i, p) = img[16 + i * pixels + p] / 255.0;
    raw.push_back(lab[8 + i]);
  }
  ds.labels = relabel_dense(raw);
  ds.name = images.filename().string();
  ds.metadata = {{"source_images", images.string()},
                 {"source_labels", labels.string()},
                 {"rows", rows},
                 {"cols", cols}};
  return ds;
}

std::string embeddings_csv(const EmbeddingBatch& batch) {
  if (batch.labels.size() != batch.vectors.rows()) {
    throw StructureError("embedding batch rows and labels differ in count");
  }
  std::string out = "label";
  for (std::size_t c = 0; c < batch.vectors.cols(); ++c) out += ",e" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < batch.vectors.rows(); ++r) {
    out += std::to_string(batch.labels[r]);
    for (double v : batch.vectors.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <typename T>
T parse_cell(std::string_view cell, std::size_t line_no) {
  T value{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw FormatError("embeddings CSV line " + std::to_string(line_no) + ": non-numeric cell '" +
                      std::string(cell) + "'");
  }
  return value;
}

}  // namespace

EmbeddingBatch parse_embeddings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError("embeddings CSV line 1: missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.empty() || header[0] != "label") {
    throw FormatError("embeddings CSV line 1: header must start with 'label'");
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t c = 0; c < d; ++c) {
    if (header[c + 1] != "e" + std::to_string(c)) {
      throw FormatError("embeddings CSV line 1: expected column 'e" + std::to_string(c) + "'");
    }
  }

  std::vector<double> values;
  EmbeddingBatch batch;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != d + 1) {
      throw FormatError("embeddings CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(d) + " values, found " + std::to_string(cells.size() - 1));
    }
    batch.labels.push_back(parse_cell<int>(cells[0], line_no));
    for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_cell<double>(cells[c], line_no));
  }
  batch.vectors = Matrix(batch.labels.size(), d, std::move(values));
  return batch;
}

void export_embeddings(const EmbeddingBatch& batch, const std::filesystem::path& path) {
  write_file_atomic(path, embeddings_csv(batch));
}

EmbeddingBatch import_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings_csv(buf.str());
}

LabeledDataset load_csv_dataset(const std::filesystem::path& path) {
  EmbeddingBatch batch = import_embeddings(path);
  LabeledDataset ds;
  ds.items = std::move(batch.vectors);
  ds.labels = relabel_dense(batch.labels);
  ds.name = path.filename().string();
  ds.metadata = {{"source", path.string()}};
  ds.validate();
  return ds;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.items = Matrix(rows.size(), ds.items.cols());
  std::vector<int> raw;
  raw.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = ds.items.row(rows[i]);
    std::copy(src.begin(), src.end(), out.items.row(i).begin());
    raw.push_back(ds.labels[rows[i]]);
  }
  out.labels = relabel_dense(raw);
  out.name = ds.name;
  out.metadata = ds.metadata;
  return out;
}

LabeledDataset take_per_identity(const LabeledDataset& ds, std::size_t per_identity) {
  std::map<int, std::size_t> seen;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (seen[ds.labels[i]]++ < per_identity) rows.push_back(i);
  }
  LabeledDataset out = subset(ds, rows);
  out.metadata["max_per_identity"] = per_identity;
  return out;
}

DatasetSplit split_per_identity(const LabeledDataset& ds, std::size_t holdout, std::uint64_t seed) {
  const DatasetIndex index = DatasetIndex::from_labels(ds.labels);
  Rng rng(seed);
  std::vector<bool> is_test(ds.labels.size(), false);
  for (const auto& items : index.items) {
    if (items.size() <= holdout) continue;
    std::vector<std::size_t> shuffled = items;
    rng.shuffle(shuffled);
    for (std::size_t k = 0; k < holdout; ++k) is_test[shuffled[k]] = true;
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < is_test.size(); ++i) (is_test[i] ? test_rows : train_rows).push_back(i);
  DatasetSplit split{subset(ds, train_rows), subset(ds, test_rows)};
  split.train.metadata["split"] = {{"part", "train"}, {"holdout_per_identity", holdout}, {"seed", seed}};
  split.test.metadata["split"] = {{"part", "test"}, {"holdout_per_identity", holdout}, {"seed", seed}};
  return split;
}

nlohmann::json metadata_sidecar(const LabeledDataset& ds) {
  return {{"name", ds.name},
          {"items", ds.items.rows()},
          {"input_dim", ds.items.cols()},
          {"num_identities", ds.num_identities()},
          {"metadata", ds.metadata}};
}

}  // namespace embedforge
