#pragma once

#include <cstddef>
#include <functional>

#include "embedforge/nn.hpp"
#include "embedforge/types.hpp"

namespace embedforge {

using EmbeddingLossFn = std::function<LossResult(const EmbeddingBatch&)>;

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Entries much smaller than the largest gradient entry are compared
  // against floor_fraction * max|grad| instead of their own magnitude.
  double floor_fraction = 1e-4;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/- step crosses a hinge, max/min tie or ReLU kink.
  std::size_t skipped = 0;
  bool pass = false;
};

// Central finite differences of loss(mlp(params, inputs)) against the
// analytic chain loss -> embeddings -> parameters. Throws DataError if the
// loss is non-finite.
GradcheckReport gradcheck(const EmbeddingLossFn& loss_fn, const MlpParams& params,
                          const InputBatch& inputs, const GradcheckOptions& options = {});

// Same comparison directly against the embedding gradient of a loss.
GradcheckReport gradcheck_embeddings(const EmbeddingLossFn& loss_fn, const EmbeddingBatch& batch,
                                     const GradcheckOptions& options = {});

}  // namespace embedforge
