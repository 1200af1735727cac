#include "embedforge/losses.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "embedforge/error.hpp"

namespace embedforge {

void LossConfig::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  if (!std::isfinite(beta) || !(beta > 0.0)) throw ConfigError("beta must be finite and > 0");
  if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("gamma must be finite and >= 0");
}

LossConfig LossConfig::count_balanced(std::size_t P, std::size_t K, double alpha, double gamma) {
  if (P < 2 || K < 1) throw ConfigError("count-balanced beta needs P >= 2 and K >= 1");
  const double p = static_cast<double>(P);
  return {alpha, p * (p - 1.0) / (p * static_cast<double>(K)), gamma};
}

IdentityGroups group_by_identity(const std::vector<int>& labels) {
  IdentityGroups g;
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto [it, inserted] = slot.try_emplace(labels[r], g.identities.size());
    if (inserted) {
      g.identities.push_back(labels[r]);
      g.members.emplace_back();
    }
    g.members[it->second].push_back(r);
  }
  return g;
}

std::size_t require_pk(const IdentityGroups& groups, std::size_t min_identities,
                       std::size_t min_per_identity) {
  if (groups.size() < min_identities) {
    throw StructureError("batch has " + std::to_string(groups.size()) +
                         " identities, need at least " + std::to_string(min_identities));
  }
  const std::size_t K = groups.members.front().size();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups.members[i].size() != K) {
      throw StructureError("identity " + std::to_string(groups.identities[i]) + " has " +
                           std::to_string(groups.members[i].size()) + " rows, expected K=" +
                           std::to_string(K));
    }
  }
  if (K < min_per_identity) {
    throw StructureError("K=" + std::to_string(K) + " but at least " +
                         std::to_string(min_per_identity) + " rows per identity are needed");
  }
  return K;
}

Matrix pairwise_sq_dists(const Matrix& vectors) {
  // Direct differences rather than the |a|^2+|b|^2-2ab expansion: never
  // negative and the diagonal is exactly zero.
  const std::size_t n = vectors.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = squared_distance(vectors.row(i), vectors.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

namespace {

void check_batch(const EmbeddingBatch& batch) {
  if (batch.labels.size() != batch.vectors.rows()) {
    throw StructureError("batch has " + std::to_string(batch.vectors.rows()) + " rows but " +
                         std::to_string(batch.labels.size()) + " labels");
  }
  if (!batch.vectors.all_finite()) throw DataError("non-finite embedding in batch");
}

std::vector<double> diff(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

// Adds mean_grad[i] / K to every member row of identity i.
void spread_mean_grads(const IdentityGroups& groups, const Matrix& mean_grad, Matrix& grad) {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double inv_k = 1.0 / static_cast<double>(groups.members[i].size());
    for (std::size_t r : groups.members[i]) axpy(inv_k, mean_grad.row(i), grad.row(r));
  }
}

}  // namespace

ClassMeans class_means(const EmbeddingBatch& batch) {
  check_batch(batch);
  ClassMeans cm{group_by_identity(batch.labels), {}};
  if (cm.groups.size() == 0) throw StructureError("empty batch");
  require_pk(cm.groups, 1, 1);
  const std::size_t d = batch.vectors.cols();
  cm.means = Matrix(cm.groups.size(), d);
  for (std::size_t i = 0; i < cm.groups.size(); ++i) {
    auto mean = cm.means.row(i);
    for (std::size_t r : cm.groups.members[i]) axpy(1.0, batch.vectors.row(r), mean);
    const double k = static_cast<double>(cm.groups.members[i].size());
    for (double& v : mean) v /= k;
  }
  return cm;
}

std::vector<double> intra_dists(const EmbeddingBatch& batch, const ClassMeans& means) {
  std::vector<double> out(means.groups.size(), 0.0);
  for (std::size_t i = 0; i < means.groups.size(); ++i) {
    for (std::size_t r : means.groups.members[i]) {
      out[i] += squared_distance(batch.vectors.row(r), means.means.row(i));
    }
  }
  return out;
}

std::vector<double> inter_dists(const Matrix& means) {
  const std::size_t P = means.rows();
  if (P < 2) {
    throw StructureError("inter-class distances need at least 2 identities, got " +
                         std::to_string(P));
  }
  std::vector<double> out(P, 0.0);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      if (j != i) out[i] += squared_distance(means.row(i), means.row(j));
    }
  }
  return out;
}

LossResult cluster_loss(const EmbeddingBatch& batch, const LossConfig& config) {
  config.validate();
  const ClassMeans cm = class_means(batch);
  require_pk(cm.groups, 2, 1);
  const std::size_t P = cm.groups.size();
  const std::size_t d = batch.vectors.cols();

  LossResult res;
  auto& diag = res.diagnostics;
  diag.identities = cm.groups.identities;
  diag.d_intra = intra_dists(batch, cm);
  diag.d_inter = inter_dists(cm.means);

  double numer = 0.0;
  double inter_total = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    numer += diag.d_intra[i];
    inter_total += diag.d_inter[i];
  }
  const double denom = config.gamma + inter_total;
  if (!(denom > 0.0)) {
    throw DivisionError("cluster loss denominator is zero: all identity means coincide and gamma = 0");
  }
  res.value = config.beta * numer / denom;

  // dL/dx = beta/den * dNum/dx - beta*Num/den^2 * dDen/dx.
  // dNum/dx_k = 2 (x_k - m_i); the mean's own dependence cancels because the
  // deviations of a group sum to zero.
  // dDen/dm_i = 4 sum_{j != i} (m_i - m_j), reaching each member as 1/K of it.
  const double a = config.beta / denom;
  const double b = -config.beta * numer / (denom * denom);
  res.grad = Matrix(batch.vectors.rows(), d);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t r : cm.groups.members[i]) {
      const auto dev = diff(batch.vectors.row(r), cm.means.row(i));
      axpy(2.0 * a, dev, res.grad.row(r));
    }
  }
  Matrix mean_grad(P, d);
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      if (j == i) continue;
      axpy(4.0 * b, diff(cm.means.row(i), cm.means.row(j)), mean_grad.row(i));
    }
  }
  spread_mean_grads(cm.groups, mean_grad, res.grad);
  return res;
}

LossResult batch_hard_cluster_loss(const EmbeddingBatch& batch, const LossConfig& config) {
  config.validate();
  const ClassMeans cm = class_means(batch);
  require_pk(cm.groups, 2, 1);
  const std::size_t P = cm.groups.size();
  const std::size_t d = batch.vectors.cols();

  LossResult res;
  auto& diag = res.diagnostics;
  diag.identities = cm.groups.identities;
  diag.d_intra.assign(P, 0.0);
  diag.d_inter.assign(P, 0.0);
  diag.hard_member.assign(P, 0);
  diag.nearest_identity.assign(P, 0);
  diag.active.assign(P, false);

  for (std::size_t i = 0; i < P; ++i) {
    const auto& members = cm.groups.members[i];
    diag.hard_member[i] = members.front();
    diag.d_intra[i] = squared_distance(batch.vectors.row(members.front()), cm.means.row(i));
    for (std::size_t r : members) {
      const double v = squared_distance(batch.vectors.row(r), cm.means.row(i));
      if (v > diag.d_intra[i]) {
        diag.d_intra[i] = v;
        diag.hard_member[i] = r;
      }
    }
    bool found = false;
    for (std::size_t j = 0; j < P; ++j) {
      if (j == i) continue;
      const double v = squared_distance(cm.means.row(i), cm.means.row(j));
      if (!found || v < diag.d_inter[i]) {
        diag.d_inter[i] = v;
        diag.nearest_identity[i] = j;
        found = true;
      }
    }
  }

  res.grad = Matrix(batch.vectors.rows(), d);
  Matrix mean_grad(P, d);
  for (std::size_t i = 0; i < P; ++i) {
    const double margin = diag.d_intra[i] - diag.d_inter[i] + config.alpha;
    if (!(margin > 0.0)) continue;
    diag.active[i] = true;
    res.value += margin;

    // d_intra: the hard member directly, and every member through m_i.
    const std::size_t h = diag.hard_member[i];
    const auto dev = diff(batch.vectors.row(h), cm.means.row(i));
    axpy(2.0, dev, res.grad.row(h));
    axpy(-2.0, dev, mean_grad.row(i));
    // -d_inter: both means of the closest pair.
    const std::size_t j = diag.nearest_identity[i];
    const auto sep = diff(cm.means.row(i), cm.means.row(j));
    axpy(-2.0, sep, mean_grad.row(i));
    axpy(2.0, sep, mean_grad.row(j));
  }
  spread_mean_grads(cm.groups, mean_grad, res.grad);
  return res;
}

LossResult triplet_loss(const Matrix& vectors, const std::vector<Triplet>& triplets, double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  if (!vectors.all_finite()) throw DataError("non-finite embedding in batch");
  const std::size_t n = vectors.rows();
  LossResult res;
  res.grad = Matrix(n, vectors.cols());
  res.diagnostics.active.assign(triplets.size(), false);
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const auto [a, p, ng] = triplets[t];
    if (a >= n || p >= n || ng >= n) throw StructureError("triplet index out of range");
    const double d_ap = squared_distance(vectors.row(a), vectors.row(p));
    const double d_an = squared_distance(vectors.row(a), vectors.row(ng));
    const double margin = d_ap - d_an + alpha;
    if (!(margin > 0.0)) continue;
    res.diagnostics.active[t] = true;
    res.value += margin;
    const auto ap = diff(vectors.row(a), vectors.row(p));
    const auto an = diff(vectors.row(a), vectors.row(ng));
    axpy(2.0, ap, res.grad.row(a));
    axpy(-2.0, an, res.grad.row(a));
    axpy(-2.0, ap, res.grad.row(p));
    axpy(2.0, an, res.grad.row(ng));
  }
  return res;
}

LossResult triplet_loss(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                        double alpha) {
  const std::size_t n = anchors.rows();
  if (positives.rows() != n || negatives.rows() != n) {
    throw StructureError("triplet lists differ in length: " + std::to_string(n) + ", " +
                         std::to_string(positives.rows()) + ", " +
                         std::to_string(negatives.rows()));
  }
  if (positives.cols() != anchors.cols() || negatives.cols() != anchors.cols()) {
    throw StructureError("triplet lists differ in embedding dimension");
  }
  Matrix stacked(3 * n, anchors.cols());
  std::vector<Triplet> triplets;
  triplets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(anchors.row(i).begin(), anchors.row(i).end(), stacked.row(i).begin());
    std::copy(positives.row(i).begin(), positives.row(i).end(), stacked.row(n + i).begin());
    std::copy(negatives.row(i).begin(), negatives.row(i).end(), stacked.row(2 * n + i).begin());
    triplets.push_back({i, n + i, 2 * n + i});
  }
  return triplet_loss(stacked, triplets, alpha);
}

LossResult batch_hard_triplet_loss(const EmbeddingBatch& batch, double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  check_batch(batch);
  const IdentityGroups groups = group_by_identity(batch.labels);
  if (groups.size() == 0) throw StructureError("empty batch");
  require_pk(groups, 2, 2);

  const std::size_t n = batch.vectors.rows();
  const Matrix dist = pairwise_sq_dists(batch.vectors);
  LossResult res;
  auto& diag = res.diagnostics;
  diag.identities = groups.identities;
  diag.hard_positive.assign(n, 0);
  diag.hard_negative.assign(n, 0);
  diag.active.assign(n, false);
  res.grad = Matrix(n, batch.vectors.cols());

  for (std::size_t a = 0; a < n; ++a) {
    bool have_pos = false;
    bool have_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (batch.labels[j] == batch.labels[a]) {
        if (!have_pos || dist(a, j) > dist(a, diag.hard_positive[a])) {
          diag.hard_positive[a] = j;
          have_pos = true;
        }
      } else if (!have_neg || dist(a, j) < dist(a, diag.hard_negative[a])) {
        diag.hard_negative[a] = j;
        have_neg = true;
      }
    }
    const std::size_t p = diag.hard_positive[a];
    const std::size_t ng = diag.hard_negative[a];
    const double margin = dist(a, p) - dist(a, ng) + alpha;
    if (!(margin > 0.0)) continue;
    diag.active[a] = true;
    res.value += margin;
    const auto ap = diff(batch.vectors.row(a), batch.vectors.row(p));
    const auto an = diff(batch.vectors.row(a), batch.vectors.row(ng));
    axpy(2.0, ap, res.grad.row(a));
    axpy(-2.0, an, res.grad.row(a));
    axpy(-2.0, ap, res.grad.row(p));
    axpy(2.0, an, res.grad.row(ng));
  }
  return res;
}

}  // namespace embedforge
