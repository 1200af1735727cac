#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "embedforge/error.hpp"
#include "embedforge/losses.hpp"
#include "oracles.hpp"

using namespace embedforge;

namespace {

EmbeddingBatch batch_1d(std::vector<double> values, std::vector<int> labels) {
  const std::size_t n = values.size();
  return {Matrix(n, 1, std::move(values)), std::move(labels)};
}

// Worked example: identity A {0, 2}, identity B {10, 12}.
EmbeddingBatch worked_batch() { return batch_1d({0, 2, 10, 12}, {0, 0, 1, 1}); }

}  // namespace

TEST_CASE("pairwise squared distances") {
  const Matrix d = pairwise_sq_dists(Matrix(2, 1, {0.0, 3.0}));
  CHECK(d == Matrix(2, 2, {0, 9, 9, 0}));
  CHECK(pairwise_sq_dists(Matrix(3, 2, {1, 2, 1, 2, 1, 2})) == Matrix(3, 3, 0.0));

  Rng rng(11);
  const auto b = oracle::random_pk_batch(5, 1, 3, rng);
  const Matrix fast = pairwise_sq_dists(b.vectors);
  const Matrix slow = oracle::pairwise(b.vectors);
  for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast.data()[i] == doctest::Approx(slow.data()[i]).epsilon(1e-14));
}

TEST_CASE("class means, intra and inter distances") {
  SUBCASE("hand values") {
    const auto b = batch_1d({0, 2}, {5, 5});
    const ClassMeans cm = class_means(b);
    CHECK(cm.means(0, 0) == 1.0);
    CHECK(intra_dists(b, cm) == std::vector<double>{2.0});
    CHECK(inter_dists(Matrix(2, 1, {1.0, 11.0})) == std::vector<double>{100.0, 100.0});
    CHECK(inter_dists(Matrix(3, 2, 4.0)) == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(intra_dists(batch_1d({3, 3, 3}, {1, 1, 1}), class_means(batch_1d({3, 3, 3}, {1, 1, 1}))) ==
          std::vector<double>{0.0});
  }
  SUBCASE("K = 1 mean is the member") {
    const auto b = batch_1d({4, -7}, {0, 1});
    const ClassMeans cm = class_means(b);
    CHECK(cm.means(0, 0) == 4.0);
    CHECK(cm.means(1, 0) == -7.0);
  }
  SUBCASE("random batch against loop oracle") {
    Rng rng(3);
    const auto b = oracle::permuted(oracle::random_pk_batch(3, 4, 2, rng), rng);
    const ClassMeans cm = class_means(b);
    const auto ref = oracle::means_by_label(b);
    const auto intra = intra_dists(b, cm);
    const auto inter = inter_dists(cm.means);
    for (std::size_t i = 0; i < cm.groups.size(); ++i) {
      const int label = cm.groups.identities[i];
      double ref_intra = 0.0;
      double ref_inter = 0.0;
      for (std::size_t c = 0; c < 2; ++c) CHECK(cm.means(i, c) == doctest::Approx(ref.at(label)[c]).epsilon(1e-14));
      for (std::size_t r = 0; r < b.labels.size(); ++r) {
        if (b.labels[r] != label) continue;
        ref_intra += oracle::vdist2({b.vectors(r, 0), b.vectors(r, 1)}, ref.at(label));
      }
      for (const auto& [other, m] : ref) {
        if (other != label) ref_inter += oracle::vdist2(ref.at(label), m);
      }
      CHECK(intra[i] == doctest::Approx(ref_intra).epsilon(1e-13));
      CHECK(inter[i] == doctest::Approx(ref_inter).epsilon(1e-13));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(class_means(batch_1d({0, 1, 2}, {0, 0, 1})), StructureError);
    CHECK_THROWS_AS(inter_dists(Matrix(1, 3)), StructureError);
  }
}

TEST_CASE("cluster loss") {
  SUBCASE("worked example") {
    const LossResult r = cluster_loss(worked_batch(), {1.0, 1.0, 0.0});
    CHECK(r.value == 0.02);
    CHECK(r.diagnostics.d_intra == std::vector<double>{2.0, 2.0});
    CHECK(r.diagnostics.d_inter == std::vector<double>{100.0, 100.0});
  }
  SUBCASE("collapsed identities give zero") {
    const LossResult r = cluster_loss(batch_1d({1, 1, 5, 5, -2, -2}, {0, 0, 1, 1, 2, 2}), {});
    CHECK(r.value == 0.0);
  }
  SUBCASE("finite differences on random batches") {
    Rng rng(21);
    for (int t = 0; t < 5; ++t) {
      const auto b = oracle::random_pk_batch(3, 3, 4, rng);
      const LossConfig cfg{1.0, 1.3, 1e-8};
      const LossResult r = cluster_loss(b, cfg);
      const Matrix fd = oracle::fd_gradient([&](const EmbeddingBatch& x) { return cluster_loss(x, cfg).value; }, b);
      CHECK(oracle::max_rel_error(r.grad, fd) < 1e-4);
    }
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(cluster_loss(batch_1d({3, 3, 3, 3}, {0, 0, 1, 1}), {1.0, 1.0, 0.0}), DivisionError);
    CHECK_THROWS_AS(cluster_loss(batch_1d({0, 1}, {0, 0}), {}), StructureError);
    CHECK_THROWS_AS(cluster_loss(worked_batch(), {1.0, 0.0, 0.0}), ConfigError);
  }
  SUBCASE("count-balanced preset") {
    CHECK(LossConfig::count_balanced(16, 16).beta == doctest::Approx(240.0 / 256.0));
  }
}

TEST_CASE("batch-hard cluster loss") {
  SUBCASE("worked example is inactive") {
    const LossResult r = batch_hard_cluster_loss(worked_batch(), {1.0, 1.0, 1e-8});
    CHECK(r.value == 0.0);
    CHECK(r.diagnostics.d_intra == std::vector<double>{1.0, 1.0});
    CHECK(r.diagnostics.d_inter == std::vector<double>{100.0, 100.0});
    CHECK(r.diagnostics.active_count() == 0);
    CHECK(r.grad == Matrix(4, 1, 0.0));
  }
  SUBCASE("overlapping identities") {
    // A {0, 2} and B {-1, 3} share mean 1: d_inter = 0, d_intra = 1 and 4.
    const LossResult r = batch_hard_cluster_loss(batch_1d({0, 2, -1, 3}, {0, 0, 1, 1}), {1.0, 1.0, 0.0});
    CHECK(r.value == (1.0 + 1.0) + (4.0 + 1.0));
    CHECK(r.diagnostics.active_count() == 2);
  }
  SUBCASE("ties go to the lowest index") {
    const LossResult r = batch_hard_cluster_loss(batch_1d({0, 2, 10, 12, -10, -8}, {0, 0, 1, 1, 2, 2}), {});
    CHECK(r.diagnostics.hard_member == std::vector<std::size_t>{0, 2, 4});
    // identity 0's mean (1) is equidistant from 11 and -9: lower identity index wins
    CHECK(r.diagnostics.nearest_identity[0] == 1);
  }
  SUBCASE("hard selection matches exhaustive search") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
      const auto b = oracle::permuted(oracle::random_pk_batch(4, 3, 3, rng), rng);
      const LossResult r = batch_hard_cluster_loss(b, {});
      const auto ref = oracle::hard_cluster_bruteforce(b, 1.0);
      CHECK(r.diagnostics.hard_member == ref.farthest_row);
      for (std::size_t i = 0; i < ref.nearest_label.size(); ++i) {
        CHECK(r.diagnostics.identities[r.diagnostics.nearest_identity[i]] == ref.nearest_label[i]);
      }
      CHECK(r.value == doctest::Approx(ref.value).epsilon(1e-12));
    }
  }
  SUBCASE("finite differences and indirect sensitivity") {
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
      const auto b = oracle::random_pk_batch(3, 4, 5, rng);
      const LossConfig cfg{1.0, 1.0, 1e-8};
      const LossResult r = batch_hard_cluster_loss(b, cfg);
      REQUIRE(r.diagnostics.active_count() > 0);
      auto value = [&](const EmbeddingBatch& x) { return batch_hard_cluster_loss(x, cfg).value; };
      CHECK(oracle::max_rel_error(r.grad, oracle::fd_gradient(value, b)) < 1e-4);
      // every member of an active identity moves the loss
      for (std::size_t i = 0; i < 3; ++i) {
        if (!r.diagnostics.active[i]) continue;
        for (std::size_t row = i * 4; row < i * 4 + 4; ++row) {
          double sensitivity = 0.0;
          EmbeddingBatch work = b;
          for (std::size_t c = 0; c < 5; ++c) {
            work.vectors(row, c) += 1e-5;
            sensitivity = std::max(sensitivity, std::abs(value(work) - r.value));
            work.vectors(row, c) = b.vectors(row, c);
          }
          CHECK(sensitivity > 1e-10);
        }
      }
    }
  }
  SUBCASE("structure errors") {
    CHECK_THROWS_AS(batch_hard_cluster_loss(batch_1d({0, 1, 2}, {0, 0, 0}), {}), StructureError);
    CHECK_THROWS_AS(batch_hard_cluster_loss(batch_1d({0, 1, 2}, {0, 0, 1}), {}), StructureError);
  }
}

TEST_CASE("triplet loss") {
  SUBCASE("hand values") {
    CHECK(triplet_loss(Matrix(1, 1, 0.0), Matrix(1, 1, 0.0), Matrix(1, 1, 1.0), 0.5).value == 0.0);
    const LossResult same = triplet_loss(Matrix(2, 3, 1.0), Matrix(2, 3, 1.0), Matrix(2, 3, 1.0), 0.5);
    CHECK(same.value == 1.0);
    CHECK(triplet_loss(Matrix(1, 2, 1.0), Matrix(1, 2, 1.0), Matrix(1, 2, 1.0), 0.0).value == 0.0);
  }
  SUBCASE("finite differences") {
    Rng rng(13);
    for (int t = 0; t < 5; ++t) {
      Matrix a(6, 4), p(6, 4), n(6, 4);
      for (Matrix* m : {&a, &p, &n}) {
        for (double& v : m->data()) v = rng.normal();
      }
      const LossResult r = triplet_loss(a, p, n, 2.0);
      EmbeddingBatch stacked{Matrix(18, 4), std::vector<int>(18, 0)};
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
          stacked.vectors(i, c) = a(i, c);
          stacked.vectors(6 + i, c) = p(i, c);
          stacked.vectors(12 + i, c) = n(i, c);
        }
      }
      auto value = [](const EmbeddingBatch& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
          s += std::max(oracle::dist2(x.vectors, i, x.vectors, 6 + i) - oracle::dist2(x.vectors, i, x.vectors, 12 + i) + 2.0, 0.0);
        }
        return s;
      };
      CHECK(r.value == doctest::Approx(value(stacked)).epsilon(1e-12));
      CHECK(oracle::max_rel_error(r.grad, oracle::fd_gradient(value, stacked)) < 1e-4);
    }
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(triplet_loss(Matrix(2, 2), Matrix(1, 2), Matrix(2, 2), 0.2), StructureError);
  }
}

TEST_CASE("batch-hard triplet loss") {
  SUBCASE("hand enumeration") {
    // A {0, 2}, B {3, 5}: anchors 2 and 3 each contribute 4 - 1 = 3.
    const LossResult r = batch_hard_triplet_loss(batch_1d({0, 2, 3, 5}, {0, 0, 1, 1}), 0.0);
    CHECK(r.value == 6.0);
    CHECK(r.diagnostics.active == std::vector<bool>{false, true, true, false});
  }
  SUBCASE("separated tight clusters") {
    CHECK(batch_hard_triplet_loss(batch_1d({0, 0.1, 50, 50.1}, {0, 0, 1, 1}), 0.2).value == 0.0);
  }
  SUBCASE("selection matches pair enumeration") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
      const auto b = oracle::permuted(oracle::random_pk_batch(3, 4, 2, rng), rng);
      const LossResult r = batch_hard_triplet_loss(b, 0.2);
      const auto ref = oracle::hard_triplet_bruteforce(b, 0.2);
      CHECK(r.diagnostics.hard_positive == ref.positive);
      CHECK(r.diagnostics.hard_negative == ref.negative);
      CHECK(r.value == doctest::Approx(ref.value).epsilon(1e-12));
    }
  }
  SUBCASE("finite differences") {
    Rng rng(19);
    const auto b = oracle::random_pk_batch(3, 4, 5, rng);
    const LossResult r = batch_hard_triplet_loss(b, 0.2);
    const Matrix fd = oracle::fd_gradient([](const EmbeddingBatch& x) { return batch_hard_triplet_loss(x, 0.2).value; }, b);
    CHECK(oracle::max_rel_error(r.grad, fd) < 1e-4);
  }
  SUBCASE("needs two rows per identity") {
    CHECK_THROWS_AS(batch_hard_triplet_loss(batch_1d({0, 1}, {0, 1}), 0.2), StructureError);
  }
}

TEST_CASE("loss invariances") {
  Rng rng(29);
  for (int t = 0; t < 20; ++t) {
    const auto b = oracle::random_pk_batch(3, 4, 3, rng);
    const LossConfig cfg{1.0, 1.0, 0.0};
    const double c1 = cluster_loss(b, cfg).value;
    const double c2 = batch_hard_cluster_loss(b, cfg).value;
    const double t2 = batch_hard_triplet_loss(b, 0.2).value;

    EmbeddingBatch shifted = b;
    for (std::size_t r = 0; r < shifted.vectors.rows(); ++r) {
      for (std::size_t c = 0; c < 3; ++c) shifted.vectors(r, c) += 3.0 - static_cast<double>(c);
    }
    CHECK(cluster_loss(shifted, cfg).value == doctest::Approx(c1).epsilon(1e-10));
    CHECK(batch_hard_cluster_loss(shifted, cfg).value == doctest::Approx(c2).epsilon(1e-10));
    CHECK(batch_hard_triplet_loss(shifted, 0.2).value == doctest::Approx(t2).epsilon(1e-10));

    EmbeddingBatch scaled = b;
    for (double& v : scaled.vectors.data()) v *= -2.5;
    CHECK(cluster_loss(scaled, cfg).value == doctest::Approx(c1).epsilon(1e-12));

    const auto perm = oracle::permuted(b, rng);
    CHECK(cluster_loss(perm, cfg).value == doctest::Approx(c1).epsilon(1e-12));
    CHECK(batch_hard_cluster_loss(perm, cfg).value == doctest::Approx(c2).epsilon(1e-12));
    CHECK(batch_hard_triplet_loss(perm, 0.2).value == doctest::Approx(t2).epsilon(1e-12));

    CHECK(c1 >= 0.0);
    CHECK(c2 >= 0.0);
    CHECK(t2 >= 0.0);
  }
}

TEST_CASE("batch-hard cluster loss is zero exactly when every margin is met") {
  Rng rng(31);
  int zero_seen = 0;
  for (int t = 0; t < 200; ++t) {
    // spread the means so that both outcomes occur
    auto b = oracle::random_pk_batch(3, 3, 2, rng, 0.5);
    const double spread = 0.5 + 3.0 * rng.uniform01();
    for (std::size_t r = 0; r < b.vectors.rows(); ++r) b.vectors(r, 0) += spread * b.labels[r];
    const LossResult r = batch_hard_cluster_loss(b, {1.0, 1.0, 0.0});
    bool all_met = true;
    for (std::size_t i = 0; i < 3; ++i) all_met &= r.diagnostics.d_intra[i] <= r.diagnostics.d_inter[i] - 1.0;
    CHECK((r.value == 0.0) == all_met);
    zero_seen += r.value == 0.0;
  }
  CHECK(zero_seen > 0);
}
