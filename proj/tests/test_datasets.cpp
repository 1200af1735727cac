#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "embedforge/datasets.hpp"
#include "embedforge/error.hpp"
#include "embedforge/rng.hpp"

using namespace embedforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("embedforge_ds_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols, const std::string& pixels) {
  std::string out;
  put_be32(out, 0x00000803);
  put_be32(out, n);
  put_be32(out, rows);
  put_be32(out, cols);
  return out + pixels;
}

std::string idx_labels(const std::string& labels) {
  std::string out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  return out + labels;
}

}  // namespace

TEST_CASE("synthetic generator") {
  SUBCASE("structure") {
    const auto ds = gen_synthetic({2, 3, 4, 1.0, 0.5, 1});
    CHECK(ds.items.rows() == 6);
    CHECK(ds.items.cols() == 4);
    CHECK(ds.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(ds.num_identities() == 2);
    CHECK_NOTHROW(ds.validate());
  }
  SUBCASE("zero noise collapses each identity") {
    const auto ds = gen_synthetic({3, 4, 5, 2.0, 0.0, 2});
    for (std::size_t i = 0; i < ds.items.rows(); ++i) {
      const std::size_t first = static_cast<std::size_t>(ds.labels[i]) * 4;
      for (std::size_t k = 0; k < 5; ++k) {
        CHECK(ds.items(i, k) == ds.items(first, k));
        CHECK(std::abs(ds.items(i, k)) <= 2.0);
      }
    }
  }
  SUBCASE("seeded determinism") {
    CHECK(gen_synthetic({4, 5, 6, 1.0, 0.3, 7}).items == gen_synthetic({4, 5, 6, 1.0, 0.3, 7}).items);
    CHECK_FALSE(gen_synthetic({4, 5, 6, 1.0, 0.3, 7}).items == gen_synthetic({4, 5, 6, 1.0, 0.3, 8}).items);
  }
  SUBCASE("noise scale") {
    const auto ds = gen_synthetic({1, 4000, 1, 0.0, 0.5, 3});
    double sum2 = 0.0;
    for (double v : ds.items.data()) sum2 += v * v;
    CHECK(std::sqrt(sum2 / 4000.0) == doctest::Approx(0.5).epsilon(0.05));
  }
  SUBCASE("bad parameters") {
    CHECK_THROWS_AS(gen_synthetic({0, 3, 4, 1.0, 0.5, 1}), ConfigError);
    CHECK_THROWS_AS(gen_synthetic({2, 3, 4, 1.0, -0.5, 1}), ConfigError);
  }
}

TEST_CASE("IDX loader") {
  TempDir dir;
  const fs::path img = dir.path / "img.idx", lbl = dir.path / "lbl.idx";
  SUBCASE("hand-built fixture") {
    // two 2x3 images
    const std::string pixels{'\x00', '\xff', '\x33', '\x66', '\x99', '\x01', '\x80', '\x00', '\x00', '\xcc', '\x02', '\xfe'};
    write_bytes(img, idx_images(2, 2, 3, pixels));
    write_bytes(lbl, idx_labels(std::string{'\x07', '\x03'}));
    const auto ds = load_idx(img, lbl);
    REQUIRE(ds.items.rows() == 2);
    REQUIRE(ds.items.cols() == 6);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      CHECK(ds.items.data()[i] == static_cast<unsigned char>(pixels[i]) / 255.0);
    }
    CHECK(ds.labels == std::vector<int>{1, 0});  // 7 and 3 relabeled densely
  }
  SUBCASE("MNIST-sized images") {
    write_bytes(img, idx_images(2, 28, 28, std::string(2 * 784, '\x80')));
    write_bytes(lbl, idx_labels(std::string{'\x01', '\x02'}));
    const auto ds = load_idx(img, lbl);
    CHECK(ds.items.rows() == 2);
    CHECK(ds.items.cols() == 784);
    CHECK(ds.items(1, 783) == 128.0 / 255.0);
  }
  SUBCASE("count mismatch") {
    write_bytes(img, idx_images(2, 1, 1, std::string(2, '\x01')));
    write_bytes(lbl, idx_labels(std::string(3, '\x01')));
    CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
  }
  SUBCASE("bad magic names the offset") {
    std::string bytes = idx_images(1, 1, 1, std::string(1, '\x01'));
    bytes[3] = '\x08';
    write_bytes(img, bytes);
    write_bytes(lbl, idx_labels(std::string(1, '\x01')));
    try {
      load_idx(img, lbl);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
  }
  SUBCASE("truncated pixels") {
    write_bytes(img, idx_images(2, 2, 2, std::string(5, '\x01')));
    write_bytes(lbl, idx_labels(std::string(2, '\x01')));
    CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
  }
}

TEST_CASE("embeddings CSV") {
  SUBCASE("single row body") {
    const EmbeddingBatch b{Matrix(1, 2, {0.5, -1.0}), {7}};
    CHECK(embeddings_csv(b) == "label,e0,e1\n7,0.5,-1\n");
  }
  SUBCASE("round trip is exact") {
    Rng rng(4);
    EmbeddingBatch b{Matrix(30, 7), {}};
    for (double& v : b.vectors.data()) v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    for (int i = 0; i < 30; ++i) b.labels.push_back(i % 4);
    const auto back = parse_embeddings_csv(embeddings_csv(b));
    CHECK(back.vectors == b.vectors);
    CHECK(back.labels == b.labels);

    TempDir dir;
    export_embeddings(b, dir.path / "e.csv");
    const auto loaded = import_embeddings(dir.path / "e.csv");
    CHECK(loaded.vectors == b.vectors);
  }
  SUBCASE("ragged row names its line") {
    try {
      parse_embeddings_csv("label,e0,e1\n1,2,3\n4,5\n");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_embeddings_csv("label,e0\n1,abc\n"), FormatError);
    CHECK_THROWS_AS(parse_embeddings_csv("id,e0\n1,2\n"), FormatError);
  }
  SUBCASE("feature CSV becomes a dense dataset") {
    TempDir dir;
    std::ofstream(dir.path / "f.csv") << "label,e0\n40,1\n10,2\n40,3\n";
    const auto ds = load_csv_dataset(dir.path / "f.csv");
    CHECK(ds.labels == std::vector<int>{1, 0, 1});
    CHECK(ds.num_identities() == 2);
  }
}

TEST_CASE("dataset helpers") {
  const auto ds = gen_synthetic({5, 6, 3, 1.0, 0.5, 5});
  SUBCASE("per-identity split") {
    const auto split = split_per_identity(ds, 2, 11);
    CHECK(split.train.items.rows() == 20);
    CHECK(split.test.items.rows() == 10);
    CHECK(split.test.num_identities() == 5);
    CHECK_NOTHROW(split.train.validate());
    CHECK_NOTHROW(split.test.validate());
    const auto again = split_per_identity(ds, 2, 11);
    CHECK(again.test.items == split.test.items);
  }
  SUBCASE("take and subset relabel densely") {
    const auto few = take_per_identity(ds, 2);
    CHECK(few.items.rows() == 10);
    const auto sub = subset(ds, {12, 13, 29});
    CHECK(sub.labels == std::vector<int>{0, 0, 1});
  }
  SUBCASE("validation") {
    LabeledDataset bad = ds;
    bad.labels[0] = 9;
    CHECK_THROWS_AS(bad.validate(), DataError);
    CHECK(relabel_dense({5, -1, 5, 3}) == std::vector<int>{2, 0, 2, 1});
    CHECK(metadata_sidecar(ds).contains("name"));
  }
}
