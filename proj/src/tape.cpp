#include "vti/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vti::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

CMapM emap(const Tensor& t) { return CMapM(t.data(), t.rows(), t.cols()); }
MapM emap(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }

double stable_softplus(double x) {
  // log(1 + e^x) without overflow in either tail
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct Builder {
  Tape* tape;
  Node n;
  Builder(Op op, Var a) : tape(a.tape) {
    n.op = op;
    n.a = a.id;
    n.requires_grad = tape->node(a.id).requires_grad;
  }
  Builder(Op op, Var a, Var b) : tape(a.tape) {
    check(a.tape == b.tape, "tape: operands on different tapes");
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = tape->node(a.id).requires_grad || tape->node(b.id).requires_grad;
  }
  Var done() {
    int id = tape->emit(std::move(n));
    return Var{tape, id};
  }
};

}  // namespace

uint64_t Tape::next_epoch() {
  static uint64_t counter = 0;
  return counter++;
}

long Var::rows() const { return tape->node(id).val.rows(); }
long Var::cols() const { return tape->node(id).val.cols(); }
const Tensor& Var::value() const { return tape->val(*this); }

Var Tape::leaf(Tensor v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  n.requires_grad = true;
  return Var{this, emit(std::move(n))};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(v);
  n.requires_grad = false;
  return Var{this, emit(std::move(n))};
}

#define ELEMWISE_LOOP(expr)                                        \
  do {                                                             \
    const long nels = b.n.val.size();                              \
    for (long i = 0; i < nels; ++i) {                              \
      b.n.val[i] = (expr);                                         \
    }                                                              \
  } while (0)

Var add(Var a, Var bb) {
  Builder b(Op::Add, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.same_shape(y), "add: shape mismatch");
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] + y[i]);
  return b.done();
}

Var sub(Var a, Var bb) {
  Builder b(Op::Sub, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.same_shape(y), "sub: shape mismatch");
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] - y[i]);
  return b.done();
}

Var mul(Var a, Var bb) {
  Builder b(Op::Mul, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.same_shape(y), "mul: shape mismatch");
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] * y[i]);
  return b.done();
}

Var div(Var a, Var bb) {
  Builder b(Op::Div, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.same_shape(y), "div: shape mismatch");
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] / y[i]);
  return b.done();
}

Var neg(Var a) {
  Builder b(Op::Neg, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(-x[i]);
  return b.done();
}

Var exp(Var a) {
  Builder b(Op::Exp, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(std::exp(x[i]));
  return b.done();
}

Var log(Var a) {
  Builder b(Op::Log, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(std::log(x[i]));
  return b.done();
}

Var tanh(Var a) {
  Builder b(Op::Tanh, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(std::tanh(x[i]));
  return b.done();
}

Var sigmoid(Var a) {
  Builder b(Op::Sigmoid, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(stable_sigmoid(x[i]));
  return b.done();
}

Var softplus(Var a) {
  Builder b(Op::Softplus, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(stable_softplus(x[i]));
  return b.done();
}

Var relu(Var a) {
  Builder b(Op::Relu, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] > 0.0 ? x[i] : 0.0);
  return b.done();
}

Var square(Var a) {
  Builder b(Op::Square, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] * x[i]);
  return b.done();
}

Var sqrt(Var a) {
  Builder b(Op::Sqrt, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(std::sqrt(x[i]));
  return b.done();
}

Var add_k(Var a, double k) {
  Builder b(Op::AddK, a);
  b.n.k = k;
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] + k);
  return b.done();
}

Var mul_k(Var a, double k) {
  Builder b(Op::MulK, a);
  b.n.k = k;
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  ELEMWISE_LOOP(x[i] * k);
  return b.done();
}

Var add_row(Var a, Var rowv) {
  Builder b(Op::AddRow, a, rowv);
  const Tensor &x = a.value(), &y = rowv.value();
  check(y.rows() == 1 && y.cols() == x.cols(), "add_row: need (1,C) operand");
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(r, c) + y(0, c);
  return b.done();
}

Var mul_row(Var a, Var rowv) {
  Builder b(Op::MulRow, a, rowv);
  const Tensor &x = a.value(), &y = rowv.value();
  check(y.rows() == 1 && y.cols() == x.cols(), "mul_row: need (1,C) operand");
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(r, c) * y(0, c);
  return b.done();
}

Var add_col(Var a, Var colv) {
  Builder b(Op::AddCol, a, colv);
  const Tensor &x = a.value(), &y = colv.value();
  check(y.cols() == 1 && y.rows() == x.rows(), "add_col: need (R,1) operand");
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(r, c) + y(r, 0);
  return b.done();
}

Var mul_col(Var a, Var colv) {
  Builder b(Op::MulCol, a, colv);
  const Tensor &x = a.value(), &y = colv.value();
  check(y.cols() == 1 && y.rows() == x.rows(), "mul_col: need (R,1) operand");
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(r, c) * y(r, 0);
  return b.done();
}

Var div_col(Var a, Var colv) {
  Builder b(Op::DivCol, a, colv);
  const Tensor &x = a.value(), &y = colv.value();
  check(y.cols() == 1 && y.rows() == x.rows(), "div_col: need (R,1) operand");
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(r, c) / y(r, 0);
  return b.done();
}

Var matmul(Var a, Var bb) {
  Builder b(Op::Matmul, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.cols() == y.rows(), "matmul: inner extent mismatch");
  b.n.val = Tensor(x.rows(), y.cols());
  emap(b.n.val).noalias() = emap(x) * emap(y);
  return b.done();
}

Var row_sum(Var a) {
  Builder b(Op::RowSum, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), 1);
  for (long r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (long c = 0; c < x.cols(); ++c) s += x(r, c);
    b.n.val(r, 0) = s;
  }
  return b.done();
}

Var sum_all(Var a) {
  Builder b(Op::SumAll, a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (long i = 0; i < x.size(); ++i) s += x[i];
  b.n.val = Tensor::scalar(s);
  return b.done();
}

Var logsumexp_rows(Var a) {
  Builder b(Op::LogsumexpRows, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), 1);
  for (long r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < x.cols(); ++c) m = std::max(m, x(r, c));
    if (!std::isfinite(m)) {
      b.n.val(r, 0) = m;  // all -inf rows stay -inf
      continue;
    }
    double s = 0.0;
    for (long c = 0; c < x.cols(); ++c) s += std::exp(x(r, c) - m);
    b.n.val(r, 0) = m + std::log(s);
  }
  return b.done();
}

Var cumsum_rows(Var a) {
  Builder b(Op::CumsumRows, a);
  const Tensor& x = a.value();
  b.n.val = Tensor(x.rows(), x.cols());
  for (long r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (long c = 0; c < x.cols(); ++c) {
      s += x(r, c);
      b.n.val(r, c) = s;
    }
  }
  return b.done();
}

Var reshape(Var a, long rows, long cols) {
  Builder b(Op::Reshape, a);
  b.n.val = a.value().reshaped(rows, cols);
  return b.done();
}

Var slice_cols(Var a, long start, long len) {
  Builder b(Op::SliceCols, a);
  const Tensor& x = a.value();
  check(start >= 0 && len >= 0 && start + len <= x.cols(), "slice_cols: out of range");
  b.n.i0 = start;
  b.n.i1 = len;
  b.n.val = Tensor(x.rows(), len);
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < len; ++c) b.n.val(r, c) = x(r, start + c);
  return b.done();
}

Var slice_rows(Var a, long start, long len) {
  Builder b(Op::SliceRows, a);
  const Tensor& x = a.value();
  check(start >= 0 && len >= 0 && start + len <= x.rows(), "slice_rows: out of range");
  b.n.i0 = start;
  b.n.i1 = len;
  b.n.val = Tensor(len, x.cols());
  for (long r = 0; r < len; ++r)
    for (long c = 0; c < x.cols(); ++c) b.n.val(r, c) = x(start + r, c);
  return b.done();
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: empty");
  Tape* tape = parts[0].tape;
  long rows = parts[0].rows(), cols = 0;
  Node n;
  n.op = Op::ConcatCols;
  for (const Var& p : parts) {
    check(p.tape == tape, "concat_cols: mixed tapes");
    check(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || tape->node(p.id).requires_grad;
  }
  n.val = Tensor(rows, cols);
  long off = 0;
  for (const Var& p : parts) {
    const Tensor& x = p.value();
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < x.cols(); ++c) n.val(r, off + c) = x(r, c);
    off += x.cols();
  }
  return Var{tape, tape->emit(std::move(n))};
}

Var gather_cols(Var a, const std::vector<int>& idx) {
  Builder b(Op::GatherCols, a);
  const Tensor& x = a.value();
  for (int j : idx) check(j >= 0 && j < x.cols(), "gather_cols: index out of range");
  b.n.idx = idx;
  b.n.val = Tensor(x.rows(), static_cast<long>(idx.size()));
  for (long r = 0; r < x.rows(); ++r)
    for (size_t c = 0; c < idx.size(); ++c) b.n.val(r, static_cast<long>(c)) = x(r, idx[c]);
  return b.done();
}

Var gather_cols_per_row(Var a, const std::vector<int>& idx) {
  Builder b(Op::GatherColsPerRow, a);
  const Tensor& x = a.value();
  check(static_cast<long>(idx.size()) % x.rows() == 0, "gather_cols_per_row: ragged index");
  const long out_cols = static_cast<long>(idx.size()) / x.rows();
  b.n.idx = idx;
  b.n.val = Tensor(x.rows(), out_cols);
  for (long r = 0; r < x.rows(); ++r)
    for (long c = 0; c < out_cols; ++c) {
      int j = idx[static_cast<size_t>(r * out_cols + c)];
      check(j >= 0 && j < x.cols(), "gather_cols_per_row: index out of range");
      b.n.val(r, c) = x(r, j);
    }
  return b.done();
}

Var take_per_row(Var a, const std::vector<int>& idx) {
  Builder b(Op::TakePerRow, a);
  const Tensor& x = a.value();
  check(static_cast<long>(idx.size()) == x.rows(), "take_per_row: need one index per row");
  b.n.idx = idx;
  b.n.val = Tensor(x.rows(), 1);
  for (long r = 0; r < x.rows(); ++r) {
    int j = idx[static_cast<size_t>(r)];
    check(j >= 0 && j < x.cols(), "take_per_row: index out of range");
    b.n.val(r, 0) = x(r, j);
  }
  return b.done();
}

Var select(const Tensor& mask, Var a, Var bb) {
  Builder b(Op::Select, a, bb);
  const Tensor &x = a.value(), &y = bb.value();
  check(x.same_shape(y) && mask.same_shape(x), "select: shape mismatch");
  b.n.aux = mask;
  b.n.val = Tensor(x.rows(), x.cols());
  for (long i = 0; i < x.size(); ++i) b.n.val[i] = mask[i] != 0.0 ? x[i] : y[i];
  return b.done();
}

std::vector<int> searchsorted(const Tensor& knots, const Tensor& x) {
  if (x.cols() != 1 || x.rows() != knots.rows())
    throw std::invalid_argument("searchsorted: need (R,K) knots and (R,1) values");
  const long K = knots.cols();
  std::vector<int> out(static_cast<size_t>(x.rows()));
  for (long r = 0; r < x.rows(); ++r) {
    const double v = x(r, 0);
    long lo = 0, hi = K - 1;  // find last k with knots[r,k] <= v, clamped
    int k = 0;
    while (lo <= hi) {
      long mid = (lo + hi) / 2;
      if (knots(r, mid) <= v) {
        k = static_cast<int>(mid);
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    out[static_cast<size_t>(r)] = std::min<int>(k, static_cast<int>(K - 2));
  }
  return out;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
  Node& ln = nodes_[loss.id];
  if (ln.val.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!std::isfinite(ln.val[0])) throw std::runtime_error("backward: non-finite loss");

  for (int i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) {
      n.grad = Tensor(n.val.rows(), n.val.cols());
    } else {
      n.grad = Tensor();
    }
  }
  ln.grad[0] = 1.0;

  auto g_of = [&](int id) -> Tensor& { return nodes_[id].grad; };
  auto v_of = [&](int id) -> const Tensor& { return nodes_[id].val; };
  auto wants = [&](int id) { return id >= 0 && nodes_[id].requires_grad; };

  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add: {
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long j = 0; j < g.size(); ++j) gb[j] += g[j];
        }
        break;
      }
      case Op::Sub: {
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long j = 0; j < g.size(); ++j) gb[j] -= g[j];
        }
        break;
      }
      case Op::Mul: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * y[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long j = 0; j < g.size(); ++j) gb[j] += g[j] * x[j];
        }
        break;
      }
      case Op::Div: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j] / y[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long j = 0; j < g.size(); ++j) gb[j] -= g[j] * x[j] / (y[j] * y[j]);
        }
        break;
      }
      case Op::Neg: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] -= g[j];
        break;
      }
      case Op::Exp: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * n.val[j];
        break;
      }
      case Op::Log: {
        const Tensor& x = v_of(n.a);
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] / x[j];
        break;
      }
      case Op::Tanh: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * (1.0 - n.val[j] * n.val[j]);
        break;
      }
      case Op::Sigmoid: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * n.val[j] * (1.0 - n.val[j]);
        break;
      }
      case Op::Softplus: {
        const Tensor& x = v_of(n.a);
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * stable_sigmoid(x[j]);
        break;
      }
      case Op::Relu: {
        const Tensor& x = v_of(n.a);
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += x[j] > 0.0 ? g[j] : 0.0;
        break;
      }
      case Op::Square: {
        const Tensor& x = v_of(n.a);
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += 2.0 * g[j] * x[j];
        break;
      }
      case Op::Sqrt: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += 0.5 * g[j] / n.val[j];
        break;
      }
      case Op::AddK: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        break;
      }
      case Op::MulK: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j] * n.k;
        break;
      }
      case Op::AddRow: {
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        }
        break;
      }
      case Op::MulRow: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * y(0, c);
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c) * x(r, c);
        }
        break;
      }
      case Op::AddCol: {
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) gb(r, 0) += g(r, c);
        }
        break;
      }
      case Op::MulCol: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * y(r, 0);
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) gb(r, 0) += g(r, c) * x(r, c);
        }
        break;
      }
      case Op::DivCol: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) / y(r, 0);
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long r = 0; r < g.rows(); ++r)
            for (long c = 0; c < g.cols(); ++c) gb(r, 0) -= g(r, c) * x(r, c) / (y(r, 0) * y(r, 0));
        }
        break;
      }
      case Op::Matmul: {
        const Tensor &x = v_of(n.a), &y = v_of(n.b);
        if (wants(n.a)) emap(g_of(n.a)).noalias() += emap(g) * emap(y).transpose();
        if (wants(n.b)) emap(g_of(n.b)).noalias() += emap(x).transpose() * emap(g);
        break;
      }
      case Op::RowSum: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < ga.rows(); ++r)
          for (long c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, 0);
        break;
      }
      case Op::SumAll: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < ga.size(); ++j) ga[j] += g[0];
        break;
      }
      case Op::LogsumexpRows: {
        const Tensor& x = v_of(n.a);
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < x.rows(); ++r) {
          if (!std::isfinite(n.val(r, 0))) continue;
          for (long c = 0; c < x.cols(); ++c)
            ga(r, c) += g(r, 0) * std::exp(x(r, c) - n.val(r, 0));
        }
        break;
      }
      case Op::CumsumRows: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < ga.rows(); ++r) {
          double s = 0.0;
          for (long c = ga.cols() - 1; c >= 0; --c) {
            s += g(r, c);
            ga(r, c) += s;
          }
        }
        break;
      }
      case Op::Reshape: {
        Tensor& ga = g_of(n.a);
        for (long j = 0; j < g.size(); ++j) ga[j] += g[j];
        break;
      }
      case Op::SliceCols: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < g.rows(); ++r)
          for (long c = 0; c < g.cols(); ++c) ga(r, n.i0 + c) += g(r, c);
        break;
      }
      case Op::SliceRows: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < g.rows(); ++r)
          for (long c = 0; c < g.cols(); ++c) ga(n.i0 + r, c) += g(r, c);
        break;
      }
      case Op::ConcatCols: {
        long off = 0;
        for (int pid : n.parents) {
          const long pc = nodes_[pid].val.cols();
          if (wants(pid)) {
            Tensor& gp = g_of(pid);
            for (long r = 0; r < g.rows(); ++r)
              for (long c = 0; c < pc; ++c) gp(r, c) += g(r, off + c);
          }
          off += pc;
        }
        break;
      }
      case Op::GatherCols: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < g.rows(); ++r)
          for (long c = 0; c < g.cols(); ++c) ga(r, n.idx[static_cast<size_t>(c)]) += g(r, c);
        break;
      }
      case Op::GatherColsPerRow: {
        Tensor& ga = g_of(n.a);
        const long oc = g.cols();
        for (long r = 0; r < g.rows(); ++r)
          for (long c = 0; c < oc; ++c) ga(r, n.idx[static_cast<size_t>(r * oc + c)]) += g(r, c);
        break;
      }
      case Op::TakePerRow: {
        Tensor& ga = g_of(n.a);
        for (long r = 0; r < g.rows(); ++r) ga(r, n.idx[static_cast<size_t>(r)]) += g(r, 0);
        break;
      }
      case Op::Select: {
        if (wants(n.a)) {
          Tensor& ga = g_of(n.a);
          for (long j = 0; j < g.size(); ++j) ga[j] += n.aux[j] != 0.0 ? g[j] : 0.0;
        }
        if (wants(n.b)) {
          Tensor& gb = g_of(n.b);
          for (long j = 0; j < g.size(); ++j) gb[j] += n.aux[j] != 0.0 ? 0.0 : g[j];
        }
        break;
      }
    }
  }
}

}  // namespace vti::ad
