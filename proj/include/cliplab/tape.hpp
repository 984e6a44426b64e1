#pragma once

#include <cstdint>
#include <vector>

#include "cliplab/matrix.hpp"

namespace cliplab {

// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
  bool operator==(const Var&) const = default;
};

// Reverse-mode automatic differentiation over a fixed set of matrix
// primitives. Forward values are computed eagerly as ops are recorded;
// backward() replays the record in exact reverse order.
//
// Conventions:
//  * relu has subgradient 0 at exactly 0.
//  * clamp passes the gradient on [lo, hi] and blocks it strictly outside.
//  * row_norm of an all-zero row has gradient 0.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_row(Var a, Var row);   // a + 𝟙·row, row is 1×cols
  Var relu(Var a);
  Var row_norm(Var a);           // rows×1 Euclidean norms
  Var div_rows(Var a, Var col);  // a_ij / col_i, col is rows×1
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var affine(Var a, double scale, double shift);  // scale·a + shift
  Var mul_scalar(Var a, Var s);  // a·s, s is 1×1
  Var div_scalar(Var a, Var s);  // a/s, s is 1×1
  Var exp(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);
  Var logsumexp_rows(Var a);     // rows×1
  Var diag(Var a);               // n×1 diagonal of a square matrix
  Var dot(Var a, Var b);         // Σ a_ij b_ij, 1×1
  Var sum(Var a);                // 1×1
  Var mean(Var a);               // 1×1

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }

  // Gradient of the last backward() root with respect to v. Nodes that do not
  // require gradients report a zero matrix.
  const Matrix& grad(Var v) const;

  // Accumulates d(root)/d(node) for every node; root must be 1×1.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf, MatMul, Transpose, AddRow, Relu, RowNorm, DivRows, Add, Sub, Affine,
    MulScalar, DivScalar, Exp, Log, Clamp, LogSumExpRows, Diag, Dot, Sum, Mean,
  };

  struct Node {
    Op op;
    Var a{};
    Var b{};
    double p0 = 0.0;
    double p1 = 0.0;
    bool requires_grad = false;
    Matrix value;
    Matrix grad;
  };

  Var push(Op op, Var a, Var b, Matrix value, double p0 = 0.0, double p1 = 0.0);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  void accumulate(Var target, const Matrix& g);
  void accumulate_scaled(Var target, const Matrix& g, double scale);

  std::vector<Node> nodes_;
};

}  // namespace cliplab
