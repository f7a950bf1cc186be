#include "allocbench/neuro/tape.hpp"

#include "allocbench/error.hpp"

#include <cmath>
#include <string>

namespace allocbench::neuro {

using Eigen::Index;

const Matrix& Var::value() const {
  require(tape_ != nullptr, ErrorKind::Validation, "use of an unbound tape variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  const auto& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorKind::Validation, "scalar() on a non-scalar node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward back) {
  bool needs = false;
  for (const Var& p : parents) {
    require(p.tape() == this, ErrorKind::Validation, "operands recorded on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(back) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[v.id()];
  if (node.has_grad) return node.grad;
  return Matrix::Zero(node.value.rows(), node.value.cols());
}

void Tape::accumulate(std::size_t id, const Matrix& delta) { accumulate_expr(id, delta); }

void Tape::backward(Var loss) {
  require(loss.tape() == this, ErrorKind::Validation, "loss belongs to a different tape");
  const auto& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    fail(ErrorKind::Validation, "backward() needs a scalar loss, got " + std::to_string(lv.rows()) + "x" +
                                    std::to_string(lv.cols()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  nodes_[loss.id()].has_grad = true;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    auto& node = nodes_[k];
    if (node.has_grad && node.back) node.back(*this, k);
  }
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::Validation, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
  }
}

Tape& tape_of(Var a) {
  require(a.tape() != nullptr, ErrorKind::Validation, "operation on an unbound variable");
  return *a.tape();
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  const auto ia = a.id();
  const auto ib = b.id();
  return tape_of(a).record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate(ib, t.grad_of(self));
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  const auto ia = a.id();
  const auto ib = b.id();
  return tape_of(a).record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad_of(self));
    t.accumulate_expr(ib, -t.grad_of(self));
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  const auto ia = a.id();
  const auto ib = b.id();
  Matrix v = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(v), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double k) {
  const auto ia = a.id();
  return tape_of(a).record(a.value() * k, {a},
                           [ia, k](Tape& t, std::size_t self) { t.accumulate_expr(ia, t.grad_of(self) * k); });
}

Var add_scalar(Var a, double k) {
  const auto ia = a.id();
  Matrix v = a.value().array() + k;
  return tape_of(a).record(std::move(v), {a},
                           [ia](Tape& t, std::size_t self) { t.accumulate(ia, t.grad_of(self)); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) fail(ErrorKind::Validation, "matmul: inner dimensions differ");
  const auto ia = a.id();
  const auto ib = b.id();
  Matrix v = a.value() * b.value();
  return tape_of(a).record(std::move(v), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.cols() || b.rows() != w.rows() || b.cols() != 1) {
    fail(ErrorKind::Validation, "linear: input width " + std::to_string(x.cols()) + " does not match layer " +
                                    std::to_string(w.cols()) + " -> " + std::to_string(w.rows()));
  }
  const auto ix = x.id();
  const auto iw = w.id();
  const auto ib = b.id();
  Matrix v = x.value() * w.value().transpose();
  v.rowwise() += b.value().col(0).transpose();
  return tape_of(x).record(std::move(v), {x, w, b}, [ix, iw, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ix)) t.accumulate_expr(ix, g * t.value(iw));
    if (t.requires_grad(iw)) t.accumulate_expr(iw, g.transpose() * t.value(ix));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.colwise().sum().transpose());
  });
}

Var tile_rows(Var row, Index rows) {
  require(row.rows() == 1, ErrorKind::Validation, "tile_rows expects a single row");
  const auto ir = row.id();
  Matrix v = row.value().replicate(rows, 1);
  return tape_of(row).record(std::move(v), {row}, [ir](Tape& t, std::size_t self) {
    t.accumulate_expr(ir, t.grad_of(self).colwise().sum());
  });
}

Var tile_cols(Var col, Index cols) {
  require(col.cols() == 1, ErrorKind::Validation, "tile_cols expects a single column");
  const auto ic = col.id();
  Matrix v = col.value().replicate(1, cols);
  return tape_of(col).record(std::move(v), {col}, [ic](Tape& t, std::size_t self) {
    t.accumulate_expr(ic, t.grad_of(self).rowwise().sum());
  });
}

Var tanh(Var a) {
  const auto ia = a.id();
  Matrix v = a.value().array().tanh();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    const auto& y = t.value(self);
    t.accumulate_expr(ia, (t.grad_of(self).array() * (1.0 - y.array().square())).matrix());
  });
}

Var relu(Var a) {
  const auto ia = a.id();
  Matrix v = a.value().cwiseMax(0.0);
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    const auto& x = t.value(ia);
    t.accumulate_expr(ia, (x.array() > 0.0).select(t.grad_of(self), 0.0).matrix());
  });
}

Var exp(Var a) {
  const auto ia = a.id();
  Matrix v = a.value().array().exp();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate_expr(ia, t.grad_of(self).cwiseProduct(t.value(self)));
  });
}

Var log(Var a) {
  const auto ia = a.id();
  Matrix v = a.value().array().log();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate_expr(ia, t.grad_of(self).cwiseQuotient(t.value(ia)));
  });
}

Var square(Var a) {
  const auto ia = a.id();
  Matrix v = a.value().array().square();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate_expr(ia, 2.0 * t.grad_of(self).cwiseProduct(t.value(ia)));
  });
}

Var softplus(Var a) {
  const auto ia = a.id();
  const auto& x = a.value().array();
  Matrix v = (x.max(0.0) + (-x.abs()).exp().log1p()).matrix();
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    // d/dx softplus = sigmoid(x)
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-t.value(ia).array()).exp());
    t.accumulate_expr(ia, (t.grad_of(self).array() * sig).matrix());
  });
}

Var clamp(Var a, double lo, double hi) {
  const auto ia = a.id();
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(v), {a}, [ia, lo, hi](Tape& t, std::size_t self) {
    const auto& x = t.value(ia).array();
    t.accumulate_expr(ia, ((x > lo) && (x < hi)).select(t.grad_of(self).array(), 0.0).matrix());
  });
}

Var minimum(Var a, Var b) {
  same_shape(a, b, "minimum");
  const auto ia = a.id();
  const auto ib = b.id();
  Matrix v = a.value().cwiseMin(b.value());
  return tape_of(a).record(std::move(v), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self).array();
    const auto take_a = t.value(ia).array() <= t.value(ib).array();
    if (t.requires_grad(ia)) t.accumulate_expr(ia, take_a.select(g, 0.0).matrix());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, take_a.select(0.0, g).matrix());
  });
}

Var softmax_rows(Var a) {
  const auto ia = a.id();
  Matrix v = a.value();
  for (Index r = 0; r < v.rows(); ++r) {
    const double top = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - top).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    const auto& y = t.value(self);
    const auto& g = t.grad_of(self);
    // dx = y * (g - <g, y>) row by row
    const Eigen::VectorXd inner = g.cwiseProduct(y).rowwise().sum();
    Matrix dx = y.cwiseProduct(g - inner.replicate(1, g.cols()));
    t.accumulate(ia, dx);
  });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), ErrorKind::Validation, "concat_cols: row counts differ");
  const auto ia = a.id();
  const auto ib = b.id();
  const Index ca = a.cols();
  const Index cb = b.cols();
  Matrix v(a.rows(), ca + cb);
  v << a.value(), b.value();
  return tape_of(a).record(std::move(v), {a, b}, [ia, ib, ca, cb](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.rightCols(cb));
  });
}

Var sum(Var a) {
  const auto ia = a.id();
  const Index r = a.rows();
  const Index c = a.cols();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(v), {a}, [ia, r, c](Tape& t, std::size_t self) {
    t.accumulate_expr(ia, Matrix::Constant(r, c, t.grad_of(self)(0, 0)));
  });
}

Var mean(Var a) {
  const double count = static_cast<double>(a.rows() * a.cols());
  require(count > 0, ErrorKind::Validation, "mean of an empty node");
  return scale(sum(a), 1.0 / count);
}

Var row_sum(Var a) {
  const auto ia = a.id();
  const Index c = a.cols();
  Matrix v = a.value().rowwise().sum();
  return tape_of(a).record(std::move(v), {a}, [ia, c](Tape& t, std::size_t self) {
    t.accumulate_expr(ia, t.grad_of(self).replicate(1, c));
  });
}

}  // namespace allocbench::neuro
