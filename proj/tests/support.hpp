#pragma once

// Shared oracles and generators for the test binaries.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "boxtax/autodiff.hpp"
#include "boxtax/box.hpp"

namespace boxtax::testing {

inline std::vector<double> normal_vec(std::mt19937_64& rng, int n, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

inline BoxEmbed random_box(std::mt19937_64& rng, int dim, double spread = 2.0) {
  return make_box(normal_vec(rng, dim, 0.0, spread), normal_vec(rng, dim, 0.0, spread));
}

inline ad::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0,
                                double mean = 0.0) {
  std::normal_distribution<double> d(mean, sd);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Builds a scalar loss from parameters bound to a fresh graph.
using LossBuilder = std::function<ad::Var(ad::Graph&, std::vector<ad::Var>&)>;

struct GradCheck {
  double max_rel = 0.0;
  int checked = 0;
};

/// Central differences with step h on every entry (or on `sample` random
/// entries when sample > 0) of the given parameters.
inline GradCheck gradcheck(std::vector<ad::Parameter*> params, const LossBuilder& build, double h = 1e-4,
                           int sample = 0, std::uint64_t seed = 1, double floor = 1e-6) {
  auto evaluate = [&](bool with_backward) {
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (auto* p : params) vars.push_back(g.parameter(*p));
    const ad::Var loss = build(g, vars);
    if (with_backward) g.backward(loss);
    return loss.scalar();
  };
  for (auto* p : params) p->zero_grad();
  evaluate(true);
  std::vector<ad::Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->value.size(); ++i) entries.emplace_back(k, i);
  }
  if (sample > 0 && static_cast<std::size_t>(sample) < entries.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(static_cast<std::size_t>(sample));
  }
  GradCheck r;
  for (const auto& [k, i] : entries) {
    double& x = params[k]->value.data()[i];
    const double saved = x;
    x = saved + h;
    const double up = evaluate(false);
    x = saved - h;
    const double down = evaluate(false);
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    r.max_rel = std::max(r.max_rel, rel_error(analytic[k].data()[i], numeric, floor));
    ++r.checked;
  }
  return r;
}

}  // namespace boxtax::testing
