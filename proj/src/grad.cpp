#include "ptvae/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ptvae::grad {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, "variable", true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(double value) { return variable(Matrix::Constant(1, 1, value)); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, "constant", false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::string_view op, std::vector<std::size_t> parents, Backward bw) {
  if (!value.allFinite()) throw NonFiniteError(std::string(op), nodes_.size());
  bool needs = std::any_of(parents.begin(), parents.end(),
                           [&](std::size_t p) { return nodes_[p].needs_grad; });
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(bw) : nullptr, op, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw Error("backward: loss belongs to another tape");
  const auto& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw Error("backward: loss must be a 1x1 value");
  for (auto& n : nodes_) {
    if (n.needs_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  if (!nodes_[loss.id_].needs_grad) return;
  nodes_[loss.id_].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
}

namespace {

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1 && m.cols() == cols) return m.replicate(rows, 1);
  if (m.cols() == 1 && m.rows() == rows) return m.replicate(1, cols);
  throw Error("cannot broadcast " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
              " to " + std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

void accumulate(Tape& t, std::size_t parent, const Matrix& contribution) {
  if (!t.needs_grad(parent)) return;
  auto& g = t.grad_mut(parent);
  g += reduce_to(contribution, g.rows(), g.cols());
}

std::pair<Eigen::Index, Eigen::Index> broadcast_shape(const Matrix& a, const Matrix& b) {
  auto dim = [](Eigen::Index x, Eigen::Index y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw Error("incompatible shapes for elementwise op");
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

template <class Fwd, class Bwd>
Var unary(const Var& a, std::string_view op, Fwd fwd, Bwd bwd) {
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(fwd(a.value()), op, {ia}, [ia, bwd](Tape& tp, std::size_t self) {
    accumulate(tp, ia, bwd(tp.value(ia), tp.value(self), tp.grad(self)));
  });
}

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  auto [r, c] = broadcast_shape(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = expand(a.value(), r, c) + expand(b.value(), r, c);
  return a.tape().record(std::move(v), "add", {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    accumulate(t, ia, t.grad(self));
    accumulate(t, ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  same_tape(a, b);
  auto [r, c] = broadcast_shape(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = expand(a.value(), r, c) - expand(b.value(), r, c);
  return a.tape().record(std::move(v), "sub", {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    accumulate(t, ia, t.grad(self));
    accumulate(t, ib, -t.grad(self));
  });
}

Var mul(const Var& a, const Var& b) {
  same_tape(a, b);
  auto [r, c] = broadcast_shape(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
  return a.tape().record(std::move(v), "mul", {ia, ib}, [ia, ib, r, c](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t, ia, g.cwiseProduct(expand(t.value(ib), r, c)));
    if (t.needs_grad(ib)) accumulate(t, ib, g.cwiseProduct(expand(t.value(ia), r, c)));
  });
}

Var div(const Var& a, const Var& b) {
  same_tape(a, b);
  auto [r, c] = broadcast_shape(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = expand(a.value(), r, c).cwiseQuotient(expand(b.value(), r, c));
  return a.tape().record(std::move(v), "div", {ia, ib}, [ia, ib, r, c](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix bb = expand(t.value(ib), r, c);
    if (t.needs_grad(ia)) accumulate(t, ia, g.cwiseQuotient(bb));
    if (t.needs_grad(ib)) {
      accumulate(t, ib, -g.cwiseProduct(t.value(self)).cwiseQuotient(bb));
    }
  });
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double k) {
  return unary(
      a, "scale", [k](const Matrix& x) -> Matrix { return k * x; },
      [k](const Matrix&, const Matrix&, const Matrix& g) -> Matrix { return k * g; });
}

Var add_scalar(const Var& a, double k) {
  return unary(
      a, "add_scalar", [k](const Matrix& x) -> Matrix { return x.array() + k; },
      [](const Matrix&, const Matrix&, const Matrix& g) -> Matrix { return g; });
}

Var tanh(const Var& a) {
  return unary(
      a, "tanh", [](const Matrix& x) -> Matrix { return x.array().tanh(); },
      [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
        return g.array() * (1.0 - y.array().square());
      });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](const Matrix& x) -> Matrix { return 1.0 / (1.0 + (-x.array()).exp()); },
      [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
        return g.array() * y.array() * (1.0 - y.array());
      });
}

Var exp(const Var& a) {
  return unary(
      a, "exp", [](const Matrix& x) -> Matrix { return x.array().exp(); },
      [](const Matrix&, const Matrix& y, const Matrix& g) -> Matrix {
        return g.cwiseProduct(y);
      });
}

Var log(const Var& a) {
  return unary(
      a, "log", [](const Matrix& x) -> Matrix { return x.array().log(); },
      [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return g.cwiseQuotient(x);
      });
}

Var square(const Var& a) {
  return unary(
      a, "square", [](const Matrix& x) -> Matrix { return x.array().square(); },
      [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return 2.0 * g.cwiseProduct(x);
      });
}

Var abs(const Var& a) {
  return unary(
      a, "abs", [](const Matrix& x) -> Matrix { return x.array().abs(); },
      [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return g.array() * x.array().sign();
      });
}

Var relu(const Var& a) {
  return unary(
      a, "relu", [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return (x.array() > 0.0).select(g, 0.0);
      });
}

Var neg_part(const Var& a) {
  return unary(
      a, "neg_part", [](const Matrix& x) -> Matrix { return x.cwiseMin(0.0); },
      [](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return (x.array() < 0.0).select(g, 0.0);
      });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, "clamp", [lo, hi](const Matrix& x) -> Matrix { return x.cwiseMax(lo).cwiseMin(hi); },
      [lo, hi](const Matrix& x, const Matrix&, const Matrix& g) -> Matrix {
        return (x.array() >= lo && x.array() <= hi).select(g, 0.0);
      });
}

Var signed_pow(const Var& a, const Var& rho) {
  same_tape(a, rho);
  if (rho.rows() != 1 || rho.cols() != 1) throw Error("signed_pow: exponent must be 1x1");
  const double r = rho.scalar();
  const Matrix& x = a.value();
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double ax = std::abs(x(i));
    v(i) = ax == 0.0 ? 0.0 : std::copysign(std::pow(ax, r), x(i));
  }
  const std::size_t ia = a.id(), ir = rho.id();
  return a.tape().record(std::move(v), "signed_pow", {ia, ir}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(ia);
    const Matrix& y = t.value(self);
    const double r = t.value(ir)(0, 0);
    if (t.needs_grad(ia)) {
      Matrix d(xv.rows(), xv.cols());
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        const double ax = std::abs(xv(i));
        // |x|^(r-1) = |y| / |x| avoids a second pow call
        d(i) = ax == 0.0 ? (r == 1.0 ? g(i) : 0.0) : g(i) * r * std::abs(y(i)) / ax;
      }
      accumulate(t, ia, d);
    }
    if (t.needs_grad(ir)) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        const double ax = std::abs(xv(i));
        if (ax > 0.0) acc += g(i) * y(i) * std::log(ax);
      }
      accumulate(t, ir, Matrix::Constant(1, 1, acc));
    }
  });
}

namespace {

// (e^{lambda L} - 1) / lambda and its derivative in lambda, stable near 0.
double boxcox_value(double log_y, double lambda) {
  return lambda == 0.0 ? log_y : std::expm1(lambda * log_y) / lambda;
}

double boxcox_dlambda(double log_y, double lambda) {
  const double u = lambda * log_y;
  if (std::abs(u) < 1e-3) {
    const double l2 = log_y * log_y;
    return l2 * (0.5 + u / 3.0 + u * u / 8.0 + u * u * u / 30.0);
  }
  return (u * std::exp(u) - std::expm1(u)) / (lambda * lambda);
}

}  // namespace

Var boxcox(const Eigen::VectorXd& shifted, const Var& lambda) {
  if (lambda.rows() != 1 || lambda.cols() != 1) throw Error("boxcox: lambda must be 1x1");
  Eigen::VectorXd log_y(shifted.size());
  for (Eigen::Index i = 0; i < shifted.size(); ++i) {
    if (!(shifted(i) > 0.0)) {
      throw Error("boxcox: shifted value at index " + std::to_string(i) + " is not positive");
    }
    log_y(i) = std::log(shifted(i));
  }
  const double lam = lambda.scalar();
  Matrix v(shifted.size(), 1);
  for (Eigen::Index i = 0; i < shifted.size(); ++i) v(i) = boxcox_value(log_y(i), lam);
  const std::size_t il = lambda.id();
  return lambda.tape().record(std::move(v), "boxcox", {il},
                              [il, log_y = std::move(log_y)](Tape& t, std::size_t self) {
                                const Matrix& g = t.grad(self);
                                const double lam = t.value(il)(0, 0);
                                double acc = 0.0;
                                for (Eigen::Index i = 0; i < log_y.size(); ++i) {
                                  acc += g(i) * boxcox_dlambda(log_y(i), lam);
                                }
                                accumulate(t, il, Matrix::Constant(1, 1, acc));
                              });
}

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix v = a.value() * b.value();
  return a.tape().record(std::move(v), "matmul", {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_mut(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad_mut(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var transpose(const Var& a) {
  return unary(
      a, "transpose", [](const Matrix& x) -> Matrix { return x.transpose(); },
      [](const Matrix&, const Matrix&, const Matrix& g) -> Matrix { return g.transpose(); });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  same_tape(x, w);
  same_tape(x, b);
  if (x.cols() != w.cols()) {
    throw Error("affine: input has " + std::to_string(x.cols()) + " features, weights expect " +
                std::to_string(w.cols()));
  }
  if (b.rows() != w.rows() || b.cols() != 1) throw Error("affine: bias shape mismatch");
  Matrix v = x.value() * w.value().transpose();
  v.rowwise() += b.value().col(0).transpose();
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape().record(std::move(v), "affine", {ix, iw, ib},
                         [ix, iw, ib](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           if (t.needs_grad(ix)) t.grad_mut(ix).noalias() += g * t.value(iw);
                           if (t.needs_grad(iw)) {
                             t.grad_mut(iw).noalias() += g.transpose() * t.value(ix);
                           }
                           if (t.needs_grad(ib)) t.grad_mut(ib) += g.colwise().sum().transpose();
                         });
}

Var sum(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, a.value().sum()), "sum", {ia},
                         [ia](Tape& t, std::size_t self) {
                           t.grad_mut(ia).array() += t.grad(self)(0, 0);
                         });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw Error("mean of empty value");
  const std::size_t ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, a.value().sum() / n), "mean", {ia},
                         [ia, n](Tape& t, std::size_t self) {
                           t.grad_mut(ia).array() += t.grad(self)(0, 0) / n;
                         });
}

Var variance(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw Error("variance of empty value");
  const double m = a.value().sum() / n;
  const double var = (a.value().array() - m).square().sum() / n;
  const std::size_t ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, var), "variance", {ia},
                         [ia, n](Tape& t, std::size_t self) {
                           const Matrix& x = t.value(ia);
                           const double m = x.sum() / n;
                           t.grad_mut(ia).array() += t.grad(self)(0, 0) * 2.0 * (x.array() - m) / n;
                         });
}

Var stddev(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw Error("stddev of empty value");
  const double m = a.value().sum() / n;
  const double s = std::sqrt((a.value().array() - m).square().sum() / n);
  const std::size_t ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, s), "stddev", {ia},
                         [ia, n](Tape& t, std::size_t self) {
                           const double s = t.value(self)(0, 0);
                           if (s == 0.0) return;
                           const Matrix& x = t.value(ia);
                           const double m = x.sum() / n;
                           t.grad_mut(ia).array() += t.grad(self)(0, 0) * (x.array() - m) / (n * s);
                         });
}

Var quantile(const Var& a, double q) {
  const Matrix& x = a.value();
  const auto n = static_cast<std::size_t>(x.size());
  if (n == 0) throw Error("quantile of empty value");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile probability must be in [0, 1]");
  const double pos = static_cast<double>(n - 1) * q;
  const auto lo_rank = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi_rank = std::min(lo_rank + 1, n - 1);
  const double w = pos - static_cast<double>(lo_rank);

  std::size_t lo = lo_rank, hi = hi_rank;
  const double* p = x.data();
  if (!std::is_sorted(p, p + n)) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [p](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    lo = order[lo_rank];
    hi = order[hi_rank];
  }
  const double v = p[lo] + w * (p[hi] - p[lo]);
  const std::size_t ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, v), "quantile", {ia},
                         [ia, lo, hi, w](Tape& t, std::size_t self) {
                           const double g = t.grad(self)(0, 0);
                           auto& ga = t.grad_mut(ia);
                           ga(static_cast<Eigen::Index>(lo)) += (1.0 - w) * g;
                           ga(static_cast<Eigen::Index>(hi)) += w * g;
                         });
}

}  // namespace ptvae::grad
