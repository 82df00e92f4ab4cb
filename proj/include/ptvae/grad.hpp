#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation applied to its Vars. Calling backward() on a
// 1x1 result walks the record in reverse and accumulates gradients into every
// node. Binary elementwise ops broadcast a 1x1 operand, a 1xC row, or an Rx1
// column against an RxC operand.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptvae/data.hpp"

namespace ptvae::grad {

using Matrix = Eigen::MatrixXd;

/// Raised when an operation produces a NaN or infinity.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string op, std::size_t node)
      : Error("non-finite value produced by '" + op + "' (node " + std::to_string(node) + ")"),
        op_(std::move(op)),
        node_(node) {}
  const std::string& op() const { return op_; }
  std::size_t node() const { return node_; }

 private:
  std::string op_;
  std::size_t node_;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  double scalar() const { return value()(0, 0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is of interest.
  Var variable(Matrix value);
  Var variable(double value);
  /// Leaf excluded from gradient bookkeeping.
  Var constant(Matrix value);
  Var constant(double value);

  /// Records a derived node. Throws NonFiniteError if value is not finite.
  Var record(Matrix value, std::string_view op, std::vector<std::size_t> parents, Backward bw);

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
  void backward(const Var& loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    std::string_view op;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise arithmetic (broadcasting) ----------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);

// ---- unary -------------------------------------------------------------------
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
/// max(a, 0)
Var relu(const Var& a);
/// min(a, 0)
Var neg_part(const Var& a);
/// Gradient is zero where the value was clamped.
Var clamp(const Var& a, double lo, double hi);

/// sgn(a) |a|^rho with a scalar (1x1) exponent rho.
Var signed_pow(const Var& a, const Var& rho);

/// Box-Cox of fixed positive data with a scalar parameter lambda:
/// (shifted^lambda - 1) / lambda, or log(shifted) at lambda = 0.
Var boxcox(const Eigen::VectorXd& shifted, const Var& lambda);

// ---- linear algebra ----------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// x W^T + 1 b^T for x (batch x in), W (out x in), b (out x 1).
Var affine(const Var& x, const Var& w, const Var& b);

// ---- reductions --------------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
/// Population variance over all elements.
Var variance(const Var& a);
/// Population standard deviation over all elements.
Var stddev(const Var& a);
/// Linear-interpolation sample quantile over all elements. The gradient flows to
/// the two bracketing order statistics with the order held fixed.
Var quantile(const Var& a, double q);

}  // namespace ptvae::grad
