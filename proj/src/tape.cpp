#include "cliplab/tape.hpp"

#include <cmath>
#include <string>

#include "cliplab/errors.hpp"

namespace cliplab {

namespace {

void require_scalar(const Matrix& m, const char* what) {
  if (m.rows() != 1 || m.cols() != 1) throw DimensionError(std::string(what) + ": operand must be 1x1");
}

}  // namespace

Var Tape::push(Op op, Var a, Var b, Matrix value, double p0, double p1) {
  bool rg = false;
  if (op != Op::Leaf) {
    rg = nodes_[a.id].requires_grad;
    if (op == Op::MatMul || op == Op::AddRow || op == Op::DivRows || op == Op::Add || op == Op::Sub ||
        op == Op::MulScalar || op == Op::DivScalar || op == Op::Dot) {
      rg = rg || nodes_[b.id].requires_grad;
    }
  }
  nodes_.push_back(Node{op, a, b, p0, p1, rg, std::move(value), Matrix{}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back(Node{Op::Leaf, {}, {}, 0.0, 0.0, requires_grad, std::move(value), Matrix{}});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::matmul(Var a, Var b) { return push(Op::MatMul, a, b, cliplab::matmul(value(a), value(b))); }

Var Tape::transpose(Var a) { return push(Op::Transpose, a, {}, cliplab::transpose(value(a))); }

Var Tape::add_row(Var a, Var row) {
  const Matrix& x = value(a);
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) throw DimensionError("add_row: row vector does not match columns");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += r(0, j);
  }
  return push(Op::AddRow, a, row, std::move(out));
}

Var Tape::relu(Var a) { return push(Op::Relu, a, {}, cliplab::relu(value(a))); }

Var Tape::row_norm(Var a) { return push(Op::RowNorm, a, {}, row_norms(value(a))); }

Var Tape::div_rows(Var a, Var col) {
  const Matrix& x = value(a);
  const Matrix& c = value(col);
  if (c.cols() != 1 || c.rows() != x.rows()) throw DimensionError("div_rows: column vector does not match rows");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v /= c(i, 0);
  return push(Op::DivRows, a, col, std::move(out));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += value(b).values()[i];
  return push(Op::Add, a, b, std::move(out));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= value(b).values()[i];
  return push(Op::Sub, a, b, std::move(out));
}

Var Tape::affine(Var a, double scale, double shift) {
  Matrix out = value(a);
  for (double& v : out.values()) v = scale * v + shift;
  return push(Op::Affine, a, {}, std::move(out), scale, shift);
}

Var Tape::mul_scalar(Var a, Var s) {
  require_scalar(value(s), "mul_scalar");
  const double k = value(s).item();
  Matrix out = value(a);
  for (double& v : out.values()) v *= k;
  return push(Op::MulScalar, a, s, std::move(out));
}

Var Tape::div_scalar(Var a, Var s) {
  require_scalar(value(s), "div_scalar");
  const double k = value(s).item();
  Matrix out = value(a);
  for (double& v : out.values()) v /= k;
  return push(Op::DivScalar, a, s, std::move(out));
}

Var Tape::exp(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) v = std::exp(v);
  return push(Op::Exp, a, {}, std::move(out));
}

Var Tape::log(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) v = std::log(v);
  return push(Op::Log, a, {}, std::move(out));
}

Var Tape::clamp(Var a, double lo, double hi) {
  Matrix out = value(a);
  for (double& v : out.values()) v = v < lo ? lo : (v > hi ? hi : v);
  return push(Op::Clamp, a, {}, std::move(out), lo, hi);
}

Var Tape::logsumexp_rows(Var a) { return push(Op::LogSumExpRows, a, {}, cliplab::logsumexp_rows(value(a))); }

Var Tape::diag(Var a) {
  const Matrix& x = value(a);
  if (x.rows() != x.cols()) throw DimensionError("diag: matrix is not square");
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, i);
  return push(Op::Diag, a, {}, std::move(out));
}

Var Tape::dot(Var a, Var b) {
  require_same_shape(value(a), value(b), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < value(a).size(); ++i) acc += value(a).values()[i] * value(b).values()[i];
  return push(Op::Dot, a, b, Matrix::scalar(acc));
}

Var Tape::sum(Var a) { return push(Op::Sum, a, {}, Matrix::scalar(cliplab::sum(value(a)))); }

Var Tape::mean(Var a) {
  const Matrix& x = value(a);
  if (x.size() == 0) throw ContractError("mean of an empty matrix");
  return push(Op::Mean, a, {}, Matrix::scalar(cliplab::sum(x) / static_cast<double>(x.size())));
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    throw ContractError("grad() requested before backward()");
  }
  return n.grad;
}

void Tape::accumulate(Var target, const Matrix& g) {
  Node& n = nodes_[target.id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.values()[i] += g.values()[i];
}

void Tape::accumulate_scaled(Var target, const Matrix& g, double scale) {
  Node& n = nodes_[target.id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad = Matrix(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) n.grad.values()[i] += scale * g.values()[i];
}

void Tape::backward(Var root) {
  if (root.id >= nodes_.size()) throw ContractError("backward: unknown root");
  if (value(root).rows() != 1 || value(root).cols() != 1) {
    throw ContractError("backward: root must be a scalar (1x1) node");
  }
  for (auto& n : nodes_) n.grad = Matrix{};
  nodes_[root.id].grad = Matrix::scalar(1.0);

  for (std::size_t idx = root.id + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (n.op == Op::Leaf || !n.requires_grad || n.grad.empty()) continue;
    const Matrix& g = n.grad;
    const Matrix& y = n.value;
    const Matrix& x = nodes_[n.a.id].value;

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Matrix& bv = nodes_[n.b.id].value;
        if (nodes_[n.a.id].requires_grad) accumulate(n.a, matmul_nt(g, bv));
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, matmul_tn(x, g));
        break;
      }
      case Op::Transpose:
        accumulate(n.a, cliplab::transpose(g));
        break;
      case Op::AddRow: {
        accumulate(n.a, g);
        if (nodes_[n.b.id].requires_grad) {
          Matrix gr(1, g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
          accumulate(n.b, gr);
        }
        break;
      }
      case Op::Relu: {
        Matrix gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
          if (!(x.values()[i] > 0.0)) gx.values()[i] = 0.0;
        accumulate(n.a, gx);
        break;
      }
      case Op::RowNorm: {
        Matrix gx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          const double norm = y(i, 0);
          if (norm == 0.0) continue;
          const double k = g(i, 0) / norm;
          for (std::size_t j = 0; j < x.cols(); ++j) gx(i, j) = k * x(i, j);
        }
        accumulate(n.a, gx);
        break;
      }
      case Op::DivRows: {
        const Matrix& c = nodes_[n.b.id].value;
        if (nodes_[n.a.id].requires_grad) {
          Matrix gx = g;
          for (std::size_t i = 0; i < gx.rows(); ++i)
            for (double& v : gx.row(i)) v /= c(i, 0);
          accumulate(n.a, gx);
        }
        if (nodes_[n.b.id].requires_grad) {
          Matrix gc(c.rows(), 1);
          for (std::size_t i = 0; i < x.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) acc += g(i, j) * x(i, j);
            gc(i, 0) = -acc / (c(i, 0) * c(i, 0));
          }
          accumulate(n.b, gc);
        }
        break;
      }
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate_scaled(n.b, g, -1.0);
        break;
      case Op::Affine:
        accumulate_scaled(n.a, g, n.p0);
        break;
      case Op::MulScalar: {
        const double k = nodes_[n.b.id].value.item();
        accumulate_scaled(n.a, g, k);
        if (nodes_[n.b.id].requires_grad) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g.values()[i] * x.values()[i];
          accumulate(n.b, Matrix::scalar(acc));
        }
        break;
      }
      case Op::DivScalar: {
        const double k = nodes_[n.b.id].value.item();
        accumulate_scaled(n.a, g, 1.0 / k);
        if (nodes_[n.b.id].requires_grad) {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g.values()[i] * x.values()[i];
          accumulate(n.b, Matrix::scalar(-acc / (k * k)));
        }
        break;
      }
      case Op::Exp: {
        Matrix gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx.values()[i] *= y.values()[i];
        accumulate(n.a, gx);
        break;
      }
      case Op::Log: {
        Matrix gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx.values()[i] /= x.values()[i];
        accumulate(n.a, gx);
        break;
      }
      case Op::Clamp: {
        Matrix gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double v = x.values()[i];
          if (v < n.p0 || v > n.p1) gx.values()[i] = 0.0;
        }
        accumulate(n.a, gx);
        break;
      }
      case Op::LogSumExpRows: {
        Matrix gx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) gx(i, j) = g(i, 0) * std::exp(x(i, j) - y(i, 0));
        accumulate(n.a, gx);
        break;
      }
      case Op::Diag: {
        Matrix gx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) gx(i, i) = g(i, 0);
        accumulate(n.a, gx);
        break;
      }
      case Op::Dot: {
        const Matrix& bv = nodes_[n.b.id].value;
        const double k = g.item();
        accumulate_scaled(n.a, bv, k);
        accumulate_scaled(n.b, x, k);
        break;
      }
      case Op::Sum:
        accumulate(n.a, Matrix(x.rows(), x.cols(), g.item()));
        break;
      case Op::Mean:
        accumulate(n.a, Matrix(x.rows(), x.cols(), g.item() / static_cast<double>(x.size())));
        break;
    }
  }

  for (auto& n : nodes_) {
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
      n.grad = Matrix(n.value.rows(), n.value.cols());
    }
  }
}

}  // namespace cliplab
