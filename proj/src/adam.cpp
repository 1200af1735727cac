#include "embedforge/adam.hpp"

#include <cmath>
#include <string>

#include "embedforge/error.hpp"

namespace embedforge {

void AdamHyperparams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (decay_start < 0) throw ConfigError("decay_start must be non-negative");
  if (!(final_lr_factor > 0.0 && final_lr_factor <= 1.0)) {
    throw ConfigError("final_lr_factor must lie in (0, 1]");
  }
}

double learning_rate_at(const AdamHyperparams& h, std::int64_t step) {
  if (step <= h.decay_start || h.total_iters <= h.decay_start) return h.learning_rate;
  const double progress = static_cast<double>(step - h.decay_start) /
                          static_cast<double>(h.total_iters - h.decay_start);
  return h.learning_rate * std::pow(h.final_lr_factor, progress);
}

AdamState AdamState::for_params(const MlpParams& params, const AdamHyperparams& hyper) {
  hyper.validate();
  return {hyper, 0, params.zeros_like(), params.zeros_like()};
}

namespace {

void check_same_shape(const MlpParams& a, const MlpParams& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (std::size_t i = 0; ok && i < a.layers.size(); ++i) {
    ok = a.layers[i].weight.rows() == b.layers[i].weight.rows() &&
         a.layers[i].weight.cols() == b.layers[i].weight.cols() &&
         a.layers[i].bias.size() == b.layers[i].bias.size();
  }
  if (!ok) throw ConfigError(std::string(what) + " shape does not match the parameters");
}

void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
            std::vector<double>& v, const AdamHyperparams& h, double lr, double c1, double c2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace

double adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  check_same_shape(params, grads, "gradient");
  check_same_shape(params, state.m, "first moment");
  check_same_shape(params, state.v, "second moment");

  ++state.step_count;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double lr = learning_rate_at(h, state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight.data(), grads.layers[l].weight.data(),
           state.m.layers[l].weight.data(), state.v.layers[l].weight.data(), h, lr, c1, c2);
    update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias,
           state.v.layers[l].bias, h, lr, c1, c2);
  }
  return lr;
}

}  // namespace embedforge
