#include "boxtax/box.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax {

namespace {

void require_same_dim(const BoxEmbed& a, const BoxEmbed& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("box dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
  }
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(log(1 + exp(u))), finite for every finite u.
double log_softplus_unit(double u) {
  if (u < -30.0) return u;  // log1p(exp(u)) == exp(u) to double precision
  if (u > 30.0) return std::log(u);
  return std::log(std::log1p(std::exp(u)));
}

}  // namespace

void BoxAlgebraConfig::validate() const {
  if (dim <= 0) throw PreconditionError("box dim must be positive");
  if (!(vol_temp > 0.0)) throw PreconditionError("vol_temp must be positive");
  if (!(int_temp > 0.0)) throw PreconditionError("int_temp must be positive");
  if (!(log_eps > 0.0 && log_eps <= 1e-6)) throw PreconditionError("log_eps must lie in (0, 1e-6]");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_t(double x, double t) {
  const double u = x / t;
  if (u > 30.0) return x + t * std::log1p(std::exp(-u));
  return t * std::log1p(std::exp(u));
}

double smooth_max(double a, double b, double t) {
  const double hi = std::max(a, b);
  return hi + t * std::log1p(std::exp(-std::abs(a - b) / t));
}

double smooth_min(double a, double b, double t) {
  const double lo = std::min(a, b);
  return lo - t * std::log1p(std::exp(-std::abs(a - b) / t));
}

BoxEmbed BoxEmbed::from_params(std::vector<double> params_min, std::vector<double> params_size) {
  if (params_min.size() != params_size.size()) {
    throw DimensionError("params_min and params_size differ in length");
  }
  BoxEmbed b;
  const std::size_t d = params_min.size();
  b.lower_.resize(d);
  b.upper_.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double lo = sigmoid(params_min[i]);
    b.lower_[i] = lo;
    b.upper_[i] = lo + sigmoid(params_size[i]) * (1.0 - lo);
  }
  b.params_min_ = std::move(params_min);
  b.params_size_ = std::move(params_size);
  return b;
}

BoxEmbed BoxEmbed::from_corners(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size()) throw DimensionError("corner vectors differ in length");
  BoxEmbed b;
  b.params_min_.resize(lower.size());
  b.params_size_.resize(lower.size());
  invert_box_transform(lower, upper, b.params_min_, b.params_size_);
  b.lower_ = std::move(lower);
  b.upper_ = std::move(upper);
  return b;
}

BoxEmbed make_box(std::vector<double> params_min, std::vector<double> params_size) {
  return BoxEmbed::from_params(std::move(params_min), std::move(params_size));
}

void invert_box_transform(std::span<const double> lower, std::span<const double> upper,
                          std::span<double> params_min, std::span<double> params_size) {
  if (lower.size() != upper.size() || params_min.size() != lower.size() ||
      params_size.size() != lower.size()) {
    throw DimensionError("invert_box_transform: length mismatch");
  }
  constexpr double kEdge = 1e-9;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const double lo = std::clamp(lower[i], kEdge, 1.0 - kEdge);
    const double frac = std::clamp((upper[i] - lo) / (1.0 - lo), kEdge, 1.0 - kEdge);
    params_min[i] = logit(lo);
    params_size[i] = logit(frac);
  }
}

double hard_volume(const BoxEmbed& b) {
  double v = 1.0;
  for (int i = 0; i < b.dim(); ++i) v *= std::max(0.0, b.upper()[i] - b.lower()[i]);
  return v;
}

double log_volume_corners(std::span<const double> lower, std::span<const double> upper,
                          const BoxAlgebraConfig& cfg) {
  const double log_t = std::log(cfg.vol_temp);
  double s = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    s += log_t + log_softplus_unit((upper[i] - lower[i]) / cfg.vol_temp);
  }
  return s;
}

double log_intersection_corners(std::span<const double> lower_a, std::span<const double> upper_a,
                                std::span<const double> lower_b, std::span<const double> upper_b,
                                const BoxAlgebraConfig& cfg) {
  const double log_t = std::log(cfg.vol_temp);
  double s = 0.0;
  for (std::size_t i = 0; i < lower_a.size(); ++i) {
    const double lo = smooth_max(lower_a[i], lower_b[i], cfg.int_temp);
    const double hi = smooth_min(upper_a[i], upper_b[i], cfg.int_temp);
    s += log_t + log_softplus_unit((hi - lo) / cfg.vol_temp);
  }
  return s;
}

double gumbel_log_volume(const BoxEmbed& b, const BoxAlgebraConfig& cfg) {
  return log_volume_corners(b.lower(), b.upper(), cfg);
}

BoxEmbed intersect(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg) {
  require_same_dim(a, b);
  std::vector<double> lo(a.dim()), hi(a.dim());
  for (int i = 0; i < a.dim(); ++i) {
    lo[i] = smooth_max(a.lower()[i], b.lower()[i], cfg.int_temp);
    hi[i] = smooth_min(a.upper()[i], b.upper()[i], cfg.int_temp);
  }
  return BoxEmbed::from_corners(std::move(lo), std::move(hi));
}

BoxEmbed union_box(const BoxEmbed& a, const BoxEmbed& b) {
  require_same_dim(a, b);
  std::vector<double> lo(a.dim()), hi(a.dim());
  for (int i = 0; i < a.dim(); ++i) {
    lo[i] = std::min(a.lower()[i], b.lower()[i]);
    hi[i] = std::max(a.upper()[i], b.upper()[i]);
  }
  return BoxEmbed::from_corners(std::move(lo), std::move(hi));
}

BoxEmbed soft_union(std::span<const BoxEmbed> boxes) {
  if (boxes.empty()) throw PreconditionError("soft_union of an empty box sequence");
  if (boxes.size() == 1) return boxes.front();
  const int d = boxes.front().dim();
  std::vector<double> lo(d, 0.0), hi(d, 0.0);
  for (const auto& b : boxes) {
    if (b.dim() != d) throw DimensionError("soft_union: box dimension mismatch");
    for (int i = 0; i < d; ++i) {
      lo[i] += b.lower()[i];
      hi[i] += b.upper()[i];
    }
  }
  const double n = static_cast<double>(boxes.size());
  for (int i = 0; i < d; ++i) {
    lo[i] /= n;
    hi[i] /= n;
  }
  return BoxEmbed::from_corners(std::move(lo), std::move(hi));
}

double sym_affinity(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg) {
  require_same_dim(a, b);
  // Fixed operand order inside smooth_max/min makes the result exactly symmetric.
  return log_intersection_corners(a.lower(), a.upper(), b.lower(), b.upper(), cfg);
}

double norm_sym_affinity(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg) {
  return sym_affinity(a, b, cfg) - (gumbel_log_volume(a, cfg) + gumbel_log_volume(b, cfg));
}

double asym_containment(const BoxEmbed& child, const BoxEmbed& parent, const BoxAlgebraConfig& cfg) {
  return sym_affinity(child, parent, cfg) - gumbel_log_volume(parent, cfg);
}

}  // namespace boxtax
