#pragma once

// Minimal tape-based reverse-mode differentiation over dense row-major
// matrices (rank <= 2). A Graph lives for one forward/backward pass.

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace boxtax::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor owned outside any graph. Gradients accumulate into grad.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  [[nodiscard]] const Matrix& value() const;
  /// Gradient after Graph::backward; zero-sized if the node received none.
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] bool needs_grad() const;
  [[nodiscard]] double scalar() const { return value()(0, 0); }
  [[nodiscard]] Graph* graph() const { return graph_; }
  [[nodiscard]] int id() const { return id_; }

  /// Adds delta into this node's gradient (no-op for constants).
  void accumulate(const Matrix& delta) const;

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  /// Called with (upstream gradient, forward output value).
  using BackwardFn = std::function<void(const Matrix& grad_out, const Matrix& value_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf bound to an external parameter. backward() adds into p.grad.
  Var parameter(Parameter& p);
  /// Leaf that records a gradient but is not tied to a Parameter.
  Var variable(Matrix value);

  /// Registers an op node. The backward closure runs only if some input needs
  /// a gradient.
  Var make(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  /// Reverse sweep from a 1x1 loss node.
  void backward(Var loss);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  /// Number of log() inputs that were clamped at log_eps.
  [[nodiscard]] std::size_t log_clamp_count() const { return log_clamps_; }
  void note_log_clamps(std::size_t n) { log_clamps_ += n; }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
  std::size_t log_clamps_ = 0;
};

inline constexpr double kLogEps = 1e-10;

// ---- elementwise binary ops with broadcasting of 1xN, Mx1 and 1x1 operands
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }
inline Var operator-(Var a) { return neg(a); }

// ---- linear algebra
Var matmul(Var a, Var b);
/// x W + b with b a 1xN row broadcast over the rows of x.
Var affine(Var w, Var x, Var b);
Var transpose(Var a);

// ---- elementwise unary ops
Var relu(Var a);
Var softplus(Var a);
Var sigmoid(Var a);
Var exp(Var a);
/// Natural log; inputs below log_eps are clamped and counted on the graph.
Var log(Var a, double log_eps = kLogEps);
Var square(Var a);

// ---- reductions and normalizations
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var col_sum(Var a);
Var row_softmax(Var a);
Var row_logsumexp(Var a);
/// Log-sum-exp over every element, 1x1.
Var logsumexp(Var a);
/// Euclidean norm of each row, Mx1.
Var row_l2norm(Var a);
/// Population standard deviation over mean of each column, 1xN.
/// Columns with zero deviation get a zero (sub)gradient.
Var column_cv(Var a);

// ---- structural
Var gather_rows(Var a, std::span<const int> rows);
Var concat_rows(std::span<const Var> parts);

/// mu + noise * sigma with externally supplied standard-normal noise.
Var gaussian_sample(Var mu, Var sigma, const Matrix& noise);

}  // namespace boxtax::ad
