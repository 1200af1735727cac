#pragma once

#include <cstddef>
#include <vector>

#include "embedforge/matrix.hpp"
#include "embedforge/rng.hpp"
#include "embedforge/types.hpp"

namespace embedforge {

struct DenseLayer {
  Matrix weight;  // [out x in]
  std::vector<double> bias;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Dense layers with ReLU between them and a linear final layer; the final
// output size is the embedding dimension.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t embedding_dim() const;
  std::size_t parameter_count() const;
  // Throws ConfigError when layer shapes do not chain.
  void validate() const;
  // Same shapes, all zeros.
  MlpParams zeros_like() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Parameter gradients share the parameter layout.
using MlpGrads = MlpParams;

// Glorot-uniform weights, zero biases. `hidden` lists the hidden layer widths.
// `output_gain` scales the final layer's weights, and with them the initial
// embedding scale.
MlpParams init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                   std::size_t embedding_dim, Rng& rng, double output_gain = 1.0);

struct ForwardCache {
  std::vector<Matrix> layer_inputs;     // input to each layer; [0] is the raw batch
  std::vector<Matrix> pre_activations;  // W x + b of each layer
};

struct ForwardResult {
  EmbeddingBatch embeddings;
  ForwardCache cache;
};

ForwardResult mlp_forward(const MlpParams& params, const InputBatch& inputs);

// Plain embedding pass for evaluation; no cache is kept.
Matrix mlp_embed(const MlpParams& params, const Matrix& inputs);

MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache,
                      const Matrix& grad_embeddings);

}  // namespace embedforge
