#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

namespace allocbench::neuro {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records matrix operations in evaluation order and replays them in reverse
/// to accumulate gradients. Nodes are append-only; a tape is used for one
/// forward/backward pass and then discarded.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  /// Leaf that does not receive gradients.
  Var constant(Matrix value);
  /// Leaf whose gradient is readable after backward().
  Var variable(Matrix value);

  /// Appends an interior node. `back` reads grad(self) and calls accumulate()
  /// on whichever parents require gradients.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward back);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }

  /// Gradient of the last backward() loss with respect to `v`; zero when `v`
  /// did not influence it.
  Matrix grad(Var v) const;
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }

  void accumulate(std::size_t id, const Matrix& delta);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& delta) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    if (node.has_grad) {
      node.grad += delta;
    } else {
      node.grad = delta;
      node.has_grad = true;
    }
  }

  /// Reverse sweep from a 1x1 loss node.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward back;
  };
  std::vector<Node> nodes_;
};

// Elementwise and broadcasting operations. Shapes must agree exactly unless
// noted.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
Var neg(Var a);
Var matmul(Var a, Var b);
/// x (B x in), w (out x in), b (out x 1) -> x w' + 1 b'
Var linear(Var x, Var w, Var b);
/// row (1 x k) repeated to (rows x k)
Var tile_rows(Var row, Eigen::Index rows);
/// col (B x 1) repeated to (B x k)
Var tile_cols(Var col, Eigen::Index cols);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// log(1 + exp(a)), computed stably
Var softplus(Var a);
/// Gradient flows only where lo < a < hi.
Var clamp(Var a, double lo, double hi);
/// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);
Var softmax_rows(Var a);
Var concat_cols(Var a, Var b);
/// Sum of all entries -> 1x1
Var sum(Var a);
/// Mean of all entries -> 1x1
Var mean(Var a);
/// Per-row sum -> B x 1
Var row_sum(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace allocbench::neuro
