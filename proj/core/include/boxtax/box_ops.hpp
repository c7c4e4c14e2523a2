#pragma once

// Differentiable, batched counterparts of the box algebra. A set of n boxes
// is a pair of n x D matrices (lower, upper) of derived corners.

#include "boxtax/autodiff.hpp"
#include "boxtax/box.hpp"

namespace boxtax {

struct BoxVars {
  ad::Var lower;
  ad::Var upper;
};

/// Corners from unconstrained parameter matrices.
BoxVars box_corners(ad::Var params_min, ad::Var params_size);

/// n x 1: gumbel log volume of every box.
ad::Var log_volumes(const BoxVars& boxes, const BoxAlgebraConfig& cfg);

/// nA x nB: log volume of the smoothed intersection of every pair (a_i, b_j).
ad::Var pairwise_log_intersection(const BoxVars& a, const BoxVars& b, const BoxAlgebraConfig& cfg);

/// n x 1: log volume of the smoothed intersection of a_i and b_i.
ad::Var rowwise_log_intersection(const BoxVars& a, const BoxVars& b, const BoxAlgebraConfig& cfg);

BoxVars gather_boxes(const BoxVars& boxes, std::span<const int> rows);

/// Materializes row i of a corner set as a BoxEmbed.
BoxEmbed box_at(const ad::Matrix& lower, const ad::Matrix& upper, Eigen::Index row);

}  // namespace boxtax
