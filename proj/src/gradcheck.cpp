#include "embedforge/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "embedforge/error.hpp"

namespace embedforge {

namespace {

LossResult checked_loss(const EmbeddingLossFn& loss_fn, const EmbeddingBatch& batch) {
  LossResult r = loss_fn(batch);
  if (!std::isfinite(r.value)) throw DataError("gradcheck: loss is not finite");
  return r;
}

bool same_selection(const LossDiagnostics& a, const LossDiagnostics& b) {
  return a.active == b.active && a.hard_member == b.hard_member &&
         a.nearest_identity == b.nearest_identity && a.hard_positive == b.hard_positive &&
         a.hard_negative == b.hard_negative;
}

std::vector<bool> relu_pattern(const ForwardCache& cache) {
  std::vector<bool> mask;
  for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l) {
    for (double z : cache.pre_activations[l].data()) mask.push_back(z > 0.0);
  }
  return mask;
}

std::vector<double*> flat_view(MlpParams& p) {
  std::vector<double*> out;
  for (auto& l : p.layers) {
    for (double& w : l.weight.data()) out.push_back(&w);
    for (double& b : l.bias) out.push_back(&b);
  }
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Probe {
  double value;
  bool kink;  // selection or activation pattern differs from the base point
};

// Shared driver: `analytic` holds the gradient per coordinate, `probe(i, x)`
// evaluates the loss with coordinate i set to x.
template <typename ProbeFn>
GradcheckReport compare(const std::vector<double>& analytic, const std::vector<double>& base,
                        ProbeFn probe, const GradcheckOptions& opt) {
  GradcheckReport report;
  const double floor = std::max(opt.floor_fraction * max_abs(analytic), 1e-12);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const Probe up = probe(i, base[i] + opt.step);
    const Probe down = probe(i, base[i] - opt.step);
    if (up.kink || down.kink) {
      ++report.skipped;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * opt.step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - analytic[i]) / denom);
    ++report.checked;
  }
  report.pass = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace

GradcheckReport gradcheck(const EmbeddingLossFn& loss_fn, const MlpParams& params,
                          const InputBatch& inputs, const GradcheckOptions& options) {
  const ForwardResult base_fwd = mlp_forward(params, inputs);
  const LossResult base = checked_loss(loss_fn, base_fwd.embeddings);
  const std::vector<bool> base_relu = relu_pattern(base_fwd.cache);
  MlpGrads grads = mlp_backward(params, base_fwd.cache, base.grad);

  std::vector<double> analytic;
  for (double* g : flat_view(grads)) analytic.push_back(*g);

  MlpParams work = params;
  const std::vector<double*> coords = flat_view(work);
  std::vector<double> start;
  for (double* c : coords) start.push_back(*c);

  auto probe = [&](std::size_t i, double x) {
    *coords[i] = x;
    const ForwardResult fwd = mlp_forward(work, inputs);
    const LossResult r = checked_loss(loss_fn, fwd.embeddings);
    *coords[i] = start[i];
    const bool kink = !same_selection(r.diagnostics, base.diagnostics) ||
                      relu_pattern(fwd.cache) != base_relu;
    return Probe{r.value, kink};
  };
  return compare(analytic, start, probe, options);
}

GradcheckReport gradcheck_embeddings(const EmbeddingLossFn& loss_fn, const EmbeddingBatch& batch,
                                     const GradcheckOptions& options) {
  const LossResult base = checked_loss(loss_fn, batch);
  if (base.grad.rows() != batch.vectors.rows() || base.grad.cols() != batch.vectors.cols()) {
    throw ConfigError("gradcheck: loss gradient shape differs from the embeddings");
  }
  EmbeddingBatch work = batch;
  auto probe = [&](std::size_t i, double x) {
    const double saved = work.vectors.data()[i];
    work.vectors.data()[i] = x;
    const LossResult r = checked_loss(loss_fn, work);
    work.vectors.data()[i] = saved;
    return Probe{r.value, !same_selection(r.diagnostics, base.diagnostics)};
  };
  return compare(base.grad.data(), batch.vectors.data(), probe, options);
}

}  // namespace embedforge
