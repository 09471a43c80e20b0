#pragma once

#include <cstdint>

#include "mtmrc/model.hpp"

namespace mtmrc {

struct AdamaxConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First moment and exponentially weighted infinity norm per parameter.
struct AdamaxState {
  ModelParameters moment;
  ModelParameters inf_norm;
  std::uint64_t step = 0;

  AdamaxState() = default;
  explicit AdamaxState(const ModelParameters& like) : moment(like.zeros_like()), inf_norm(like.zeros_like()) {}
};

/// m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g| + eps);  p <- p - lr / (1 - b1^t) * m / u.
/// Throws NumericError on non-finite gradients.
void adamax_step(ModelParameters& params, const ModelParameters& grads, AdamaxState& state, const AdamaxConfig& cfg);

/// Scales grads so their global L2 norm is at most max_norm; returns the norm before clipping.
double clip_global_norm(ModelParameters& grads, double max_norm);

struct EmaState {
  ModelParameters shadow;
  double decay = 0.995;

  EmaState() = default;
  /// Shadow starts as a copy of params.
  EmaState(const ModelParameters& params, double decay) : shadow(params), decay(decay) {}
};

/// shadow <- decay * shadow + (1 - decay) * params
void ema_update(EmaState& ema, const ModelParameters& params);

}  // namespace mtmrc
