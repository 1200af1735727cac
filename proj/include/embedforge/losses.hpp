#pragma once

#include <cstddef>
#include <vector>

#include "embedforge/matrix.hpp"
#include "embedforge/types.hpp"

namespace embedforge {

// alpha: hinge margin. beta, gamma: numerator scale and denominator
// stabiliser of the ratio-form cluster loss.
struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1e-8;

  void validate() const;

  // beta = P(P-1)/(PK): balances the PK intra terms against the P(P-1)
  // inter terms of the ratio loss.
  static LossConfig count_balanced(std::size_t P, std::size_t K, double alpha = 1.0,
                                   double gamma = 1e-8);
};

inline constexpr double kDefaultClusterMargin = 1.0;
inline constexpr double kDefaultTripletMargin = 0.2;

// Rows grouped by label; groups ordered by first appearance of the label.
struct IdentityGroups {
  std::vector<int> identities;
  std::vector<std::vector<std::size_t>> members;

  std::size_t size() const { return identities.size(); }
};

IdentityGroups group_by_identity(const std::vector<int>& labels);

// Every group holds the same number of rows; returns that K. Throws
// StructureError for ragged groups or fewer than `min_identities` groups.
std::size_t require_pk(const IdentityGroups& groups, std::size_t min_identities = 2,
                       std::size_t min_per_identity = 1);

// Squared Euclidean distances between all row pairs.
Matrix pairwise_sq_dists(const Matrix& vectors);

struct ClassMeans {
  IdentityGroups groups;
  Matrix means;  // [P x d], row i is the mean of groups.members[i]
};

ClassMeans class_means(const EmbeddingBatch& batch);

// Sum over each identity's members of the squared distance to its mean.
std::vector<double> intra_dists(const EmbeddingBatch& batch, const ClassMeans& means);

// Sum over every other identity of the squared distance between means.
std::vector<double> inter_dists(const Matrix& means);

// beta * sum(intra) / (gamma + sum(inter)).
LossResult cluster_loss(const EmbeddingBatch& batch, const LossConfig& config);

// Sum over identities of max(hardest intra - closest inter + alpha, 0), where
// hardest intra is the member farthest from its mean and closest inter is the
// nearest other mean. Ties go to the lowest row / identity index.
LossResult batch_hard_cluster_loss(const EmbeddingBatch& batch, const LossConfig& config);

struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Hinged triplet loss over row-index triplets of one embedding matrix.
LossResult triplet_loss(const Matrix& vectors, const std::vector<Triplet>& triplets, double alpha);

// Aligned-list form; the gradient rows are [anchors; positives; negatives].
LossResult triplet_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                        double alpha);

// For every anchor, hardest positive (farthest same identity) against hardest
// negative (closest other identity).
LossResult batch_hard_triplet_loss(const EmbeddingBatch& batch, double alpha);

}  // namespace embedforge
