#include "mtmrc/optim.hpp"

#include <cmath>

namespace mtmrc {

void adamax_step(ModelParameters& params, const ModelParameters& grads, AdamaxState& state, const AdamaxConfig& cfg) {
  if (!params.same_layout(grads) || !params.same_layout(state.moment)) {
    throw ShapeError("adamax: parameter, gradient and state layouts differ");
  }
  for (std::size_t i = 0; i < grads.tensor_count(); ++i) {
    for (double g : grads.tensor(i).data) {
      if (!std::isfinite(g)) throw NumericError("adamax: non-finite gradient in '" + grads.name(i) + "'");
    }
  }
  ++state.step;
  const double step_size = cfg.lr / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto& p = params.tensor(i).data;
    const auto& g = grads.tensor(i).data;
    auto& m = state.moment.tensor(i).data;
    auto& u = state.inf_norm.tensor(i).data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      u[k] = std::max(cfg.beta2 * u[k], std::abs(g[k]) + cfg.eps);
      p[k] -= step_size * m[k] / u[k];
    }
  }
}

double clip_global_norm(ModelParameters& grads, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.tensor_count(); ++i) {
    for (double g : grads.tensor(i).data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (std::size_t i = 0; i < grads.tensor_count(); ++i) {
      for (double& g : grads.tensor(i).data) g *= s;
    }
  }
  return norm;
}

void ema_update(EmaState& ema, const ModelParameters& params) {
  if (!ema.shadow.same_layout(params)) throw ShapeError("ema: shadow layout differs from parameters");
  const double keep = ema.decay, take = 1.0 - ema.decay;
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    auto& s = ema.shadow.tensor(i).data;
    const auto& p = params.tensor(i).data;
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = keep * s[k] + take * p[k];
  }
}

}  // namespace mtmrc
