#include "boxtax/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boxtax/errors.hpp"

namespace boxtax::ad {

namespace {

const Matrix kEmpty;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw DimensionError(std::string(what) + ": incompatible broadcast extents " + std::to_string(a) +
                       " and " + std::to_string(b));
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

template <typename Fwd, typename Bwd>
Var binary(Var a, Var b, const char* what, Fwd fwd, Bwd bwd) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Eigen::Index r = broadcast_dim(av.rows(), bv.rows(), what);
  const Eigen::Index c = broadcast_dim(av.cols(), bv.cols(), what);
  Matrix ae = expand(av, r, c);
  Matrix be = expand(bv, r, c);
  Matrix out = fwd(ae, be);
  const Var in[] = {a, b};
  return a.graph()->make(std::move(out), in, [a, b, ae = std::move(ae), be = std::move(be), bwd](
                                                 const Matrix& g, const Matrix& y) {
    Matrix ga, gb;
    bwd(g, y, ae, be, ga, gb);
    if (a.needs_grad()) a.accumulate(reduce_to(ga, a.rows(), a.cols()));
    if (b.needs_grad()) b.accumulate(reduce_to(gb, b.rows(), b.cols()));
  });
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Matrix out = a.value().unaryExpr(fwd);
  const Var in[] = {a};
  return a.graph()->make(std::move(out), in, [a, deriv](const Matrix& g, const Matrix& y) {
    Matrix d(y.rows(), y.cols());
    const Matrix& x = a.value();
    for (Eigen::Index i = 0; i < y.size(); ++i) d.data()[i] = deriv(x.data()[i], y.data()[i]);
    a.accumulate(g.cwiseProduct(d));
  });
}

}  // namespace

// ---------------------------------------------------------------- Var / Graph

const Matrix& Var::value() const { return graph_->nodes_[id_].value; }

const Matrix& Var::grad() const {
  const auto& n = graph_->nodes_[id_];
  return n.grad.size() ? n.grad : kEmpty;
}

bool Var::needs_grad() const { return graph_->nodes_[id_].needs_grad; }

void Var::accumulate(const Matrix& delta) const {
  auto& n = graph_->nodes_[id_];
  if (!n.needs_grad) return;
  if (delta.rows() != n.value.rows() || delta.cols() != n.value.cols()) {
    throw DimensionError("gradient shape " + shape(delta) + " does not match value " + shape(n.value));
  }
  if (n.grad.size() == 0) {
    n.grad = delta;
  } else {
    n.grad += delta;
  }
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::make(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (v.graph() != this) throw PreconditionError("operands belong to different graphs");
    needs = needs || v.needs_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw PreconditionError("loss belongs to another graph");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw PreconditionError("backward requires a scalar loss, got " + shape(loss.value()));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad, n.value);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) {
        n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
      }
      n.param->grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------- binary ops

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&, const Matrix&, Matrix& ga, Matrix& gb) {
        ga = g;
        gb = g;
      });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&, const Matrix&, Matrix& ga, Matrix& gb) {
        ga = g;
        gb = -g;
      });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& x, const Matrix& y, Matrix& ga, Matrix& gb) {
        ga = g.cwiseProduct(y);
        gb = g.cwiseProduct(x);
      });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& out, const Matrix&, const Matrix& y, Matrix& ga, Matrix& gb) {
        ga = g.cwiseQuotient(y);
        gb = -g.cwiseProduct(out).cwiseQuotient(y);
      });
}

Var scale(Var a, double s) {
  const Var in[] = {a};
  return a.graph()->make(a.value() * s, in, [a, s](const Matrix& g, const Matrix&) { a.accumulate(g * s); });
}

Var add_scalar(Var a, double s) {
  const Var in[] = {a};
  return a.graph()->make(a.value().array() + s, in, [a](const Matrix& g, const Matrix&) { a.accumulate(g); });
}

Var neg(Var a) { return scale(a, -1.0); }

// ---------------------------------------------------------------- linear algebra

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a.value()) + " times " + shape(b.value()));
  }
  const Var in[] = {a, b};
  return a.graph()->make(a.value() * b.value(), in, [a, b](const Matrix& g, const Matrix&) {
    if (a.needs_grad()) a.accumulate(g * b.value().transpose());
    if (b.needs_grad()) b.accumulate(a.value().transpose() * g);
  });
}

Var affine(Var w, Var x, Var b) {
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("affine: bias " + shape(b.value()) + " for weight " + shape(w.value()));
  }
  return add(matmul(x, w), b);
}

Var transpose(Var a) {
  const Var in[] = {a};
  return a.graph()->make(a.value().transpose(), in,
                         [a](const Matrix& g, const Matrix&) { a.accumulate(g.transpose()); });
}

// ---------------------------------------------------------------- unary ops

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
  return unary(
      a,
      [](double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a, double log_eps) {
  std::size_t clamps = 0;
  Matrix out(a.rows(), a.cols());
  const Matrix& x = a.value();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = x.data()[i];
    if (!(v >= log_eps)) {
      v = log_eps;
      ++clamps;
    }
    out.data()[i] = std::log(v);
  }
  a.graph()->note_log_clamps(clamps);
  const Var in[] = {a};
  return a.graph()->make(std::move(out), in, [a, log_eps](const Matrix& g, const Matrix&) {
    const Matrix& x = a.value();
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      d.data()[i] = v >= log_eps ? g.data()[i] / v : 0.0;
    }
    a.accumulate(d);
  });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------- reductions

Var sum(Var a) {
  const Var in[] = {a};
  return a.graph()->make(Matrix::Constant(1, 1, a.value().sum()), in, [a](const Matrix& g, const Matrix&) {
    a.accumulate(Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  const Var in[] = {a};
  return a.graph()->make(a.value().rowwise().sum(), in, [a](const Matrix& g, const Matrix&) {
    a.accumulate(g.replicate(1, a.cols()));
  });
}

Var col_sum(Var a) {
  const Var in[] = {a};
  return a.graph()->make(a.value().colwise().sum(), in, [a](const Matrix& g, const Matrix&) {
    a.accumulate(g.replicate(a.rows(), 1));
  });
}

Var row_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  const Var in[] = {a};
  return a.graph()->make(std::move(y), in, [a](const Matrix& g, const Matrix& y) {
    // dx = y * (g - <g, y>)
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix d = g;
    d.colwise() -= dot;
    a.accumulate(d.cwiseProduct(y));
  });
}

Var row_logsumexp(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  const Var in[] = {a};
  return a.graph()->make(std::move(y), in, [a](const Matrix& g, const Matrix& y) {
    Matrix d = a.value();
    d.colwise() -= y.col(0);
    d = d.array().exp();
    d.array().colwise() *= g.col(0).array();
    a.accumulate(d);
  });
}

Var logsumexp(Var a) {
  const Matrix& x = a.value();
  const double m = x.maxCoeff();
  const double y = m + std::log((x.array() - m).exp().sum());
  const Var in[] = {a};
  return a.graph()->make(Matrix::Constant(1, 1, y), in, [a](const Matrix& g, const Matrix& y) {
    a.accumulate(((a.value().array() - y(0, 0)).exp() * g(0, 0)).matrix());
  });
}

Var row_l2norm(Var a) {
  const Var in[] = {a};
  return a.graph()->make(a.value().rowwise().norm(), in, [a](const Matrix& g, const Matrix& y) {
    Matrix d = a.value();
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const double n = y(r, 0);
      if (n > 0.0) {
        d.row(r) *= g(r, 0) / n;
      } else {
        d.row(r).setZero();
      }
    }
    a.accumulate(d);
  });
}

Var column_cv(Var a) {
  const Matrix& x = a.value();
  const double n = static_cast<double>(x.rows());
  Matrix mu = x.colwise().sum() / n;
  Matrix sd(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    sd(0, c) = std::sqrt((x.col(c).array() - mu(0, c)).square().sum() / n);
  }
  Matrix cv = sd.cwiseQuotient(mu);
  const Var in[] = {a};
  return a.graph()->make(std::move(cv), in, [a, mu, sd, n](const Matrix& g, const Matrix& cv) {
    const Matrix& x = a.value();
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      // cv = sd / mu; dsd/dx_i = (x_i - mu) / (n sd); dmu/dx_i = 1 / n
      const double dmu = -cv(0, c) / mu(0, c) / n;
      const double dsd_scale = sd(0, c) > 0.0 ? 1.0 / (mu(0, c) * n * sd(0, c)) : 0.0;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        d(r, c) = g(0, c) * ((x(r, c) - mu(0, c)) * dsd_scale + dmu);
      }
    }
    a.accumulate(d);
  });
}

// ---------------------------------------------------------------- structural

Var gather_rows(Var a, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw DimensionError("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  const Var in[] = {a};
  return a.graph()->make(std::move(out), in,
                         [a, idx = std::vector<int>(rows.begin(), rows.end())](const Matrix& g, const Matrix&) {
                           Matrix d = Matrix::Zero(a.rows(), a.cols());
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                           }
                           a.accumulate(d);
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw PreconditionError("concat_rows of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts.front().graph()->make(std::move(out), parts, [keep](const Matrix& g, const Matrix&) {
    Eigen::Index at = 0;
    for (const auto& p : keep) {
      if (p.needs_grad()) p.accumulate(g.middleRows(at, p.rows()));
      at += p.rows();
    }
  });
}

Var gaussian_sample(Var mu, Var sigma, const Matrix& noise) {
  if (noise.rows() != mu.rows() || noise.cols() != mu.cols() || sigma.rows() != mu.rows() ||
      sigma.cols() != mu.cols()) {
    throw DimensionError("gaussian_sample: mu, sigma and noise must share a shape");
  }
  Var eps = mu.graph()->constant(noise);
  return add(mu, mul(eps, sigma));
}

}  // namespace boxtax::ad
