#include "boxtax/adam.hpp"

#include <cmath>

#include "boxtax/errors.hpp"

namespace boxtax {

AdamState AdamState::like(const ad::Matrix& param) {
  AdamState s;
  s.first_moment = ad::Matrix::Zero(param.rows(), param.cols());
  s.second_moment = ad::Matrix::Zero(param.rows(), param.cols());
  return s;
}

void AdamState::reset() {
  first_moment.setZero();
  second_moment.setZero();
  step = 0;
}

void adam_step(ad::Matrix& params, const ad::Matrix& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.rows() != params.rows() || grads.cols() != params.cols()) {
    throw DimensionError("adam_step: gradient shape does not match parameters");
  }
  if (state.first_moment.rows() != params.rows() || state.first_moment.cols() != params.cols()) {
    throw DimensionError("adam_step: moment shape does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.first_moment = cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * grads;
  state.second_moment = cfg.beta2 * state.second_moment + (1.0 - cfg.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  params.array() -= cfg.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + cfg.epsilon);
}

double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad *= s;
  }
  return norm;
}

}  // namespace boxtax
