#pragma once

// Smoothed ("gumbel") box algebra over [0,1]^D.
//
// A box is stored by its unconstrained parameters (params_min, params_size)
// and the derived corner coordinates. All volumes and affinities are in the
// log domain.

#include <span>
#include <vector>

namespace boxtax {

struct BoxAlgebraConfig {
  int dim = 50;
  double vol_temp = 1.0;   // softplus temperature on side lengths
  double int_temp = 0.1;   // log-sum-exp temperature for the intersection
  double log_eps = 1e-10;  // floor inside residual logarithms

  void validate() const;
};

class BoxEmbed {
 public:
  BoxEmbed() = default;

  /// Builds a box from unconstrained parameters.
  /// x_m = sigmoid(params_min), x_M = x_m + sigmoid(params_size) * (1 - x_m).
  static BoxEmbed from_params(std::vector<double> params_min, std::vector<double> params_size);

  /// Builds a box directly from corners. Corners are not required to be
  /// ordered: smooth intersections legitimately produce inverted boxes.
  /// Parameters are recovered by inverting the transform where possible.
  static BoxEmbed from_corners(std::vector<double> lower, std::vector<double> upper);

  [[nodiscard]] int dim() const { return static_cast<int>(lower_.size()); }
  [[nodiscard]] const std::vector<double>& lower() const { return lower_; }
  [[nodiscard]] const std::vector<double>& upper() const { return upper_; }
  [[nodiscard]] const std::vector<double>& params_min() const { return params_min_; }
  [[nodiscard]] const std::vector<double>& params_size() const { return params_size_; }

 private:
  std::vector<double> params_min_;
  std::vector<double> params_size_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

BoxEmbed make_box(std::vector<double> params_min, std::vector<double> params_size);

/// Recovers (params_min, params_size) for given ordered corners in [0,1].
/// Values are clamped slightly inside (0,1) so the logits stay finite.
void invert_box_transform(std::span<const double> lower, std::span<const double> upper,
                          std::span<double> params_min, std::span<double> params_size);

// ---- elementwise kernels shared by the scalar and the differentiable paths

double sigmoid(double x);
/// t * log(1 + exp(x / t)), stable for large |x|.
double softplus_t(double x, double t);
/// t * log(exp(a / t) + exp(b / t)).
double smooth_max(double a, double b, double t);
/// -t * log(exp(-a / t) + exp(-b / t)).
double smooth_min(double a, double b, double t);

// ---- box operations

/// Product of side lengths. Non-differentiable; for tests and reporting.
double hard_volume(const BoxEmbed& b);
double gumbel_log_volume(const BoxEmbed& b, const BoxAlgebraConfig& cfg);
BoxEmbed intersect(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg);
BoxEmbed union_box(const BoxEmbed& a, const BoxEmbed& b);
BoxEmbed soft_union(std::span<const BoxEmbed> boxes);

/// log R_s(a, b): log volume of the smoothed intersection.
double sym_affinity(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg);
/// log [R_s(a, b) / (Vol(a) Vol(b))].
double norm_sym_affinity(const BoxEmbed& a, const BoxEmbed& b, const BoxAlgebraConfig& cfg);
/// log R_a(child | parent) = log R_s(child, parent) - log Vol(parent).
double asym_containment(const BoxEmbed& child, const BoxEmbed& parent, const BoxAlgebraConfig& cfg);

// ---- raw-corner kernels (one dimension row at a time)

/// Sum over dimensions of log softplus_t(upper - lower).
double log_volume_corners(std::span<const double> lower, std::span<const double> upper,
                          const BoxAlgebraConfig& cfg);
/// Log volume of the smoothed intersection of two boxes given by corners.
double log_intersection_corners(std::span<const double> lower_a, std::span<const double> upper_a,
                                std::span<const double> lower_b, std::span<const double> upper_b,
                                const BoxAlgebraConfig& cfg);

}  // namespace boxtax
