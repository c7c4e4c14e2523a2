#pragma once

#include <cstdint>
#include <span>

#include "boxtax/autodiff.hpp"

namespace boxtax {

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ad::Matrix first_moment;
  ad::Matrix second_moment;
  std::int64_t step = 0;

  /// Zero moments shaped like a parameter.
  static AdamState like(const ad::Matrix& param);
  void reset();
};

/// One bias-corrected Adam update of params in place.
void adam_step(ad::Matrix& params, const ad::Matrix& grads, AdamState& state, const AdamConfig& cfg);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm);

}  // namespace boxtax
