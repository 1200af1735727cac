#pragma once

#include <cstddef>
#include <vector>

#include "embedforge/matrix.hpp"

namespace embedforge {

// Feature vectors fed to the network, one per row, with identity labels.
struct InputBatch {
  Matrix rows;
  std::vector<int> labels;
};

// Network outputs f(x), one per row, with identity labels.
struct EmbeddingBatch {
  Matrix vectors;
  std::vector<int> labels;
};

// Which samples / means a loss picked and which hinge terms were active.
// Fields a loss does not use stay empty.
struct LossDiagnostics {
  std::vector<int> identities;  // label of each identity group, first-appearance order
  std::vector<double> d_intra;  // per identity group
  std::vector<double> d_inter;  // per identity group
  std::vector<std::size_t> hard_member;       // row farthest from its own mean
  std::vector<std::size_t> nearest_identity;  // group index of the closest other mean
  std::vector<std::size_t> hard_positive;     // per anchor row
  std::vector<std::size_t> hard_negative;     // per anchor row
  std::vector<bool> active;                   // per hinge term

  std::size_t active_count() const {
    std::size_t n = 0;
    for (bool a : active) n += a ? 1 : 0;
    return n;
  }
};

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d embedding, same shape as the embeddings
  LossDiagnostics diagnostics;
};

}  // namespace embedforge
