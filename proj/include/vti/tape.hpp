#pragma once

#include <cstdint>
#include <vector>

#include "vti/tensor.hpp"

namespace vti::ad {

enum class Op : uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Softplus,
  Relu,
  Square,
  Sqrt,
  AddK,     // a + k
  MulK,     // a * k
  AddRow,   // (R,C) + (1,C)
  MulRow,   // (R,C) * (1,C)
  AddCol,   // (R,C) + (R,1)
  MulCol,   // (R,C) * (R,1)
  DivCol,   // (R,C) / (R,1)
  Matmul,   // (R,K) x (K,C)
  RowSum,         // (R,C) -> (R,1)
  SumAll,         // (R,C) -> (1,1)
  LogsumexpRows,  // (R,C) -> (R,1), max-subtracted
  CumsumRows,     // (R,C) -> (R,C) prefix sums along each row
  Reshape,
  SliceCols,         // columns [i0, i0+i1)
  SliceRows,         // rows [i0, i0+i1)
  ConcatCols,        // horizontal concat of parents
  GatherCols,        // out[r,c] = a[r, idx[c]]
  GatherColsPerRow,  // out[r,c] = a[r, idx[r*C+c]]
  TakePerRow,        // out[r,0] = a[r, idx[r]]
  Select,            // mask const: mask*a + (1-mask)*b
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  long rows() const;
  long cols() const;
  const Tensor& value() const;
};

struct Node {
  Op op = Op::Leaf;
  Tensor val;
  Tensor grad;  // allocated lazily during backward
  int a = -1, b = -1;
  double k = 0.0;
  long i0 = 0, i1 = 0;
  std::vector<int> idx;      // gather/select payload
  std::vector<int> parents;  // ConcatCols only
  Tensor aux;                // Select mask
  bool requires_grad = false;
};

/// Record of a forward computation; replaying it in reverse accumulates
/// exact gradients for every leaf. Single-owner, rebuilt each step.
class Tape {
 public:
  Var leaf(Tensor v);
  Var constant(Tensor v);

  /// Reverse sweep from a scalar loss node. Gradients of all contributing
  /// leaves are then available via grad(). Throws on a non-scalar or
  /// non-finite loss.
  void backward(Var loss);

  Tape() : epoch_(next_epoch()) {}

  void clear() {
    nodes_.clear();
    epoch_ = next_epoch();
  }
  uint64_t epoch() const { return epoch_; }
  size_t size() const { return nodes_.size(); }

  const Tensor& val(Var v) const { return nodes_[v.id].val; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }

  int emit(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

 private:
  // epochs are globally unique so a parameter leaf cached for one tape can
  // never be mistaken for a leaf on another tape reusing the same address
  static uint64_t next_epoch();

  std::vector<Node> nodes_;
  uint64_t epoch_ = 0;
};

// Elementwise and structural primitives. All shape errors throw.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var relu(Var a);
Var square(Var a);
Var sqrt(Var a);
Var add_k(Var a, double k);
Var mul_k(Var a, double k);
Var add_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var add_col(Var a, Var colv);
Var mul_col(Var a, Var colv);
Var div_col(Var a, Var colv);
Var matmul(Var a, Var b);
Var row_sum(Var a);
Var sum_all(Var a);
Var logsumexp_rows(Var a);
Var cumsum_rows(Var a);
Var reshape(Var a, long rows, long cols);
Var slice_cols(Var a, long start, long len);
Var slice_rows(Var a, long start, long len);
Var concat_cols(const std::vector<Var>& parts);
Var gather_cols(Var a, const std::vector<int>& idx);
Var gather_cols_per_row(Var a, const std::vector<int>& idx);
Var take_per_row(Var a, const std::vector<int>& idx);
Var select(const Tensor& mask, Var a, Var b);

/// out[r] = index k such that knots[r,k] <= x[r] < knots[r,k+1], clamped to
/// [0, K-2] for K knot columns. Eager; indices are constants on the tape.
std::vector<int> searchsorted(const Tensor& knots, const Tensor& x);

}  // namespace vti::ad
