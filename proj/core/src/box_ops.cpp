#include "boxtax/box_ops.hpp"

#include <cmath>

#include "boxtax/errors.hpp"

namespace boxtax {

using ad::Matrix;
using ad::Var;

namespace {

// Per-element smoothed intersection with the partial derivatives needed for
// the backward pass.
struct SideTerm {
  double log_side;   // log softplus_t(hi - lo)
  double d_side;     // d log_side / d (hi - lo)
  double w_lower_a;  // d lo / d lower_a
  double w_upper_a;  // d hi / d upper_a
};

inline SideTerm side_term(double la, double ua, double lb, double ub, const BoxAlgebraConfig& cfg) {
  const double lo = smooth_max(la, lb, cfg.int_temp);
  const double hi = smooth_min(ua, ub, cfg.int_temp);
  const double side = hi - lo;
  const double sp = softplus_t(side, cfg.vol_temp);
  SideTerm t{};
  const double u = side / cfg.vol_temp;
  if (u < -30.0) {
    // softplus underflow regime: log_side ~ log(t) + u, derivative 1/t
    t.log_side = std::log(cfg.vol_temp) + u;
    t.d_side = 1.0 / cfg.vol_temp;
  } else {
    t.log_side = std::log(sp);
    t.d_side = sigmoid(u) / sp;
  }
  t.w_lower_a = sigmoid((la - lb) / cfg.int_temp);
  t.w_upper_a = sigmoid((ub - ua) / cfg.int_temp);
  return t;
}

inline void volume_term(double lo, double hi, const BoxAlgebraConfig& cfg, double& log_side, double& d_side) {
  const double side = hi - lo;
  const double u = side / cfg.vol_temp;
  if (u < -30.0) {
    log_side = std::log(cfg.vol_temp) + u;
    d_side = 1.0 / cfg.vol_temp;
    return;
  }
  const double sp = softplus_t(side, cfg.vol_temp);
  log_side = std::log(sp);
  d_side = sigmoid(u) / sp;
}

void require_shapes(const BoxVars& a, const char* what) {
  if (a.lower.rows() != a.upper.rows() || a.lower.cols() != a.upper.cols()) {
    throw DimensionError(std::string(what) + ": lower/upper shape mismatch");
  }
}

}  // namespace

BoxVars box_corners(Var params_min, Var params_size) {
  if (params_min.rows() != params_size.rows() || params_min.cols() != params_size.cols()) {
    throw DimensionError("box_corners: parameter shape mismatch");
  }
  Var lower = ad::sigmoid(params_min);
  Var room = ad::add_scalar(ad::neg(lower), 1.0);
  Var upper = ad::add(lower, ad::mul(ad::sigmoid(params_size), room));
  return {lower, upper};
}

Var log_volumes(const BoxVars& boxes, const BoxAlgebraConfig& cfg) {
  require_shapes(boxes, "log_volumes");
  const Matrix& lo = boxes.lower.value();
  const Matrix& hi = boxes.upper.value();
  Matrix out(lo.rows(), 1);
  Matrix dside(lo.rows(), lo.cols());
  for (Eigen::Index r = 0; r < lo.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < lo.cols(); ++c) {
      double ls = 0.0;
      volume_term(lo(r, c), hi(r, c), cfg, ls, dside(r, c));
      s += ls;
    }
    out(r, 0) = s;
  }
  const Var in[] = {boxes.lower, boxes.upper};
  return boxes.lower.graph()->make(std::move(out), in,
                                   [b = boxes, dside = std::move(dside)](const Matrix& g, const Matrix&) {
                                     Matrix d = dside;
                                     d.array().colwise() *= g.col(0).array();
                                     b.upper.accumulate(d);
                                     b.lower.accumulate(-d);
                                   });
}

Var pairwise_log_intersection(const BoxVars& a, const BoxVars& b, const BoxAlgebraConfig& cfg) {
  require_shapes(a, "pairwise_log_intersection");
  require_shapes(b, "pairwise_log_intersection");
  if (a.lower.cols() != b.lower.cols()) throw DimensionError("pairwise_log_intersection: dim mismatch");
  const Matrix& la = a.lower.value();
  const Matrix& ua = a.upper.value();
  const Matrix& lb = b.lower.value();
  const Matrix& ub = b.upper.value();
  const Eigen::Index na = la.rows(), nb = lb.rows(), d = la.cols();
  Matrix out(na, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      out(i, j) = log_intersection_corners({la.row(i).data(), static_cast<std::size_t>(d)},
                                           {ua.row(i).data(), static_cast<std::size_t>(d)},
                                           {lb.row(j).data(), static_cast<std::size_t>(d)},
                                           {ub.row(j).data(), static_cast<std::size_t>(d)}, cfg);
    }
  }
  const Var in[] = {a.lower, a.upper, b.lower, b.upper};
  // Intermediates are recomputed in the backward pass to keep memory at O(nA nB).
  return a.lower.graph()->make(std::move(out), in, [a, b, cfg](const Matrix& g, const Matrix&) {
    const Matrix& la = a.lower.value();
    const Matrix& ua = a.upper.value();
    const Matrix& lb = b.lower.value();
    const Matrix& ub = b.upper.value();
    const Eigen::Index na = la.rows(), nb = lb.rows(), d = la.cols();
    Matrix gla = Matrix::Zero(na, d), gua = Matrix::Zero(na, d);
    Matrix glb = Matrix::Zero(nb, d), gub = Matrix::Zero(nb, d);
    for (Eigen::Index i = 0; i < na; ++i) {
      for (Eigen::Index j = 0; j < nb; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        for (Eigen::Index c = 0; c < d; ++c) {
          const SideTerm t = side_term(la(i, c), ua(i, c), lb(j, c), ub(j, c), cfg);
          const double gs = gij * t.d_side;
          gla(i, c) -= gs * t.w_lower_a;
          glb(j, c) -= gs * (1.0 - t.w_lower_a);
          gua(i, c) += gs * t.w_upper_a;
          gub(j, c) += gs * (1.0 - t.w_upper_a);
        }
      }
    }
    a.lower.accumulate(gla);
    a.upper.accumulate(gua);
    b.lower.accumulate(glb);
    b.upper.accumulate(gub);
  });
}

Var rowwise_log_intersection(const BoxVars& a, const BoxVars& b, const BoxAlgebraConfig& cfg) {
  require_shapes(a, "rowwise_log_intersection");
  require_shapes(b, "rowwise_log_intersection");
  if (a.lower.rows() != b.lower.rows() || a.lower.cols() != b.lower.cols()) {
    throw DimensionError("rowwise_log_intersection: shape mismatch");
  }
  const Matrix& la = a.lower.value();
  const Matrix& ua = a.upper.value();
  const Matrix& lb = b.lower.value();
  const Matrix& ub = b.upper.value();
  const Eigen::Index n = la.rows(), d = la.cols();
  Matrix out(n, 1);
  Matrix dside(n, d), wl(n, d), wu(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const SideTerm t = side_term(la(i, c), ua(i, c), lb(i, c), ub(i, c), cfg);
      s += t.log_side;
      dside(i, c) = t.d_side;
      wl(i, c) = t.w_lower_a;
      wu(i, c) = t.w_upper_a;
    }
    out(i, 0) = s;
  }
  const Var in[] = {a.lower, a.upper, b.lower, b.upper};
  return a.lower.graph()->make(
      std::move(out), in,
      [a, b, dside = std::move(dside), wl = std::move(wl), wu = std::move(wu)](const Matrix& g, const Matrix&) {
        Matrix gs = dside;
        gs.array().colwise() *= g.col(0).array();
        a.lower.accumulate(-gs.cwiseProduct(wl));
        b.lower.accumulate(-(gs - gs.cwiseProduct(wl)));
        a.upper.accumulate(gs.cwiseProduct(wu));
        b.upper.accumulate(gs - gs.cwiseProduct(wu));
      });
}

BoxVars gather_boxes(const BoxVars& boxes, std::span<const int> rows) {
  return {ad::gather_rows(boxes.lower, rows), ad::gather_rows(boxes.upper, rows)};
}

BoxEmbed box_at(const Matrix& lower, const Matrix& upper, Eigen::Index row) {
  std::vector<double> lo(lower.row(row).begin(), lower.row(row).end());
  std::vector<double> hi(upper.row(row).begin(), upper.row(row).end());
  return BoxEmbed::from_corners(std::move(lo), std::move(hi));
}

}  // namespace boxtax
