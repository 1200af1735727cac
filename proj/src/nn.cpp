#include "embedforge/nn.hpp"

#include <cmath>
#include <string>

#include "embedforge/error.hpp"

namespace embedforge {

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().in();
}

std::size_t MlpParams::embedding_dim() const {
  return layers.empty() ? 0 : layers.back().out();
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in() == 0 || l.out() == 0) {
      throw ConfigError("layer " + std::to_string(i) + " has an empty weight matrix");
    }
    if (l.bias.size() != l.out()) {
      throw ConfigError("layer " + std::to_string(i) + " bias has " +
                        std::to_string(l.bias.size()) + " entries, expected " +
                        std::to_string(l.out()));
    }
    if (i > 0 && layers[i - 1].out() != l.in()) {
      throw ConfigError("layer " + std::to_string(i) + " expects input size " +
                        std::to_string(l.in()) + " but previous layer emits " +
                        std::to_string(layers[i - 1].out()));
    }
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.out(), l.in()), std::vector<double>(l.out(), 0.0)});
  }
  return z;
}

MlpParams init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                   std::size_t embedding_dim, Rng& rng, double output_gain) {
  if (input_dim == 0 || embedding_dim == 0) {
    throw ConfigError("input and embedding dimensions must be positive");
  }
  if (!(output_gain > 0.0) || !std::isfinite(output_gain)) throw ConfigError("output_gain must be positive");
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(embedding_dim);

  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = widths[i];
    const std::size_t out = widths[i + 1];
    if (out == 0) throw ConfigError("hidden layer width must be positive");
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    if (i + 2 == widths.size()) limit *= output_gain;
    for (double& w : layer.weight.data()) w = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

void check_input(const MlpParams& params, const Matrix& inputs) {
  params.validate();
  if (inputs.cols() != params.input_dim()) {
    throw ConfigError("input has " + std::to_string(inputs.cols()) +
                      " features, network expects " + std::to_string(params.input_dim()));
  }
  if (!inputs.all_finite()) throw DataError("non-finite value in network input");
}

// out = x W^T + b
Matrix dense(const DenseLayer& layer, const Matrix& x) {
  Matrix out(x.rows(), layer.out());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto xr = x.row(n);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      const auto w = layer.weight.row(o);
      double s = layer.bias[o];
      for (std::size_t i = 0; i < xr.size(); ++i) s += xr[i] * w[i];
      out(n, o) = s;
    }
  }
  return out;
}

Matrix relu(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

}  // namespace

ForwardResult mlp_forward(const MlpParams& params, const InputBatch& inputs) {
  check_input(params, inputs.rows);
  if (inputs.labels.size() != inputs.rows.rows()) {
    throw StructureError("input batch has " + std::to_string(inputs.rows.rows()) +
                         " rows but " + std::to_string(inputs.labels.size()) + " labels");
  }
  ForwardResult result;
  Matrix x = inputs.rows;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = dense(params.layers[l], x);
    result.cache.layer_inputs.push_back(std::move(x));
    const bool last = l + 1 == params.layers.size();
    x = last ? z : relu(z);
    result.cache.pre_activations.push_back(std::move(z));
  }
  result.embeddings.vectors = std::move(x);
  result.embeddings.labels = inputs.labels;
  return result;
}

Matrix mlp_embed(const MlpParams& params, const Matrix& inputs) {
  check_input(params, inputs);
  Matrix x = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = dense(params.layers[l], x);
    x = l + 1 == params.layers.size() ? std::move(z) : relu(z);
  }
  return x;
}

MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache,
                      const Matrix& grad_embeddings) {
  params.validate();
  const std::size_t num_layers = params.layers.size();
  if (cache.layer_inputs.size() != num_layers || cache.pre_activations.size() != num_layers) {
    throw ConfigError("forward cache does not match the network depth");
  }
  const Matrix& last = cache.pre_activations.back();
  if (grad_embeddings.rows() != last.rows() || grad_embeddings.cols() != last.cols()) {
    throw ConfigError("embedding gradient is " + std::to_string(grad_embeddings.rows()) + "x" +
                      std::to_string(grad_embeddings.cols()) + ", embeddings are " +
                      std::to_string(last.rows()) + "x" + std::to_string(last.cols()));
  }

  MlpGrads grads = params.zeros_like();
  Matrix g = grad_embeddings;
  for (std::size_t l = num_layers; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const Matrix& x = cache.layer_inputs[l];
    if (l + 1 != num_layers) {
      // ReLU subgradient is 0 at exactly zero pre-activation.
      const Matrix& z = cache.pre_activations[l];
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(z.data()[k] > 0.0)) g.data()[k] = 0.0;
      }
    }
    DenseLayer& gl = grads.layers[l];
    for (std::size_t n = 0; n < g.rows(); ++n) {
      const auto gr = g.row(n);
      const auto xr = x.row(n);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        gl.bias[o] += gr[o];
        axpy(gr[o], xr, gl.weight.row(o));
      }
    }
    if (l == 0) break;
    Matrix prev(g.rows(), layer.in());
    for (std::size_t n = 0; n < g.rows(); ++n) {
      const auto gr = g.row(n);
      auto pr = prev.row(n);
      for (std::size_t o = 0; o < layer.out(); ++o) axpy(gr[o], layer.weight.row(o), pr);
    }
    g = std::move(prev);
  }
  return grads;
}

}  // namespace embedforge
