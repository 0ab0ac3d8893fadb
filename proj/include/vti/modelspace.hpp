#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vti/rng.hpp"
#include "vti/tensor.hpp"

namespace vti {

/// Discrete model identifier: either inclusion bits (variable selection) or a
/// Lehmer-coded node order plus upper-triangular edge bits (DAGs).
struct ModelIndex {
  enum class Kind { Bits, Dag };
  Kind kind = Kind::Bits;
  std::vector<uint8_t> bits;       // variable selection inclusion bits
  std::vector<int> lehmer;         // N-1 codes, code i in [0, N-1-i]
  std::vector<uint8_t> edge_bits;  // N(N-1)/2 bits, pairs (i,j) i<j row-major

  static ModelIndex from_bits(std::vector<uint8_t> b);
  static ModelIndex from_int(uint64_t v, int n_bits);
  static ModelIndex dag(std::vector<int> lehmer, std::vector<uint8_t> edges);

  uint64_t canonical_int() const;  // Bits kind only: sum gamma_j 2^j
  std::string str() const;         // hex bit-string or "c:..|u:.." form
  static ModelIndex parse(const std::string& s);

  int dag_nodes() const { return static_cast<int>(lehmer.size()) + 1; }
  bool operator==(const ModelIndex& o) const;
  bool operator!=(const ModelIndex& o) const { return !(*this == o); }

  /// Number of differing slots (bits, Lehmer codes, edge bits).
  static int hamming(const ModelIndex& a, const ModelIndex& b);
};

/// Decodes a Lehmer code to the visit order: order[i] is the (codes[i]+1)-th
/// smallest unused index. codes has N-1 entries; the last index is forced.
std::vector<int> lehmer_decode_order(const std::vector<int>& codes, int n);

/// One-hot permutation matrix P with P(r, i) = 1 iff row r is selected at
/// column i. Throws on out-of-range codes.
Tensor lehmer_decode_matrix(const std::vector<int>& codes, int n);

/// Batched decode, one matrix per code row.
std::vector<Tensor> lehmer_decode_batch(const std::vector<std::vector<int>>& codes, int n);

/// A = P^T U P for a permutation matrix P and strictly upper-triangular U.
Tensor assemble_dag(const Tensor& P, const Tensor& U);

/// Strictly upper-triangular 0/1 matrix from flattened edge bits.
Tensor edge_bits_to_upper(const std::vector<uint8_t>& bits, int n);
long upper_index(int i, int j, int n);  // flattened index of pair (i<j)

/// Coordinate layout for variable selection: an optional always-active
/// intercept slot followed by one coordinate per selectable predictor.
class VsLayout {
 public:
  VsLayout(int n_select_bits, bool intercept)
      : n_bits_(n_select_bits), intercept_(intercept) {}
  int n_bits() const { return n_bits_; }
  bool intercept() const { return intercept_; }
  int d_max() const { return n_bits_ + (intercept_ ? 1 : 0); }
  std::vector<uint8_t> chi(const ModelIndex& m) const;
  int d_m(const ModelIndex& m) const;
  std::vector<ModelIndex> enumerate() const;  // all 2^n_bits models
 private:
  int n_bits_;
  bool intercept_;
};

/// Coordinate layout for the node-wise MLP parameters of a DAG model. Blocks
/// are concatenated in sorted-node order j = 2..N: first-layer weights (one
/// column per candidate parent), then optional first bias, output weights,
/// optional output bias.
class DagLayout {
 public:
  DagLayout(int nodes, int hidden, bool bias);
  int nodes() const { return n_; }
  int hidden() const { return h_; }
  bool bias() const { return bias_; }
  int d_max() const { return d_max_; }
  /// Offset of node j's block (j in 1..N-1, sorted position, 0-based).
  int block_offset(int j) const { return offsets_[j]; }
  int block_size(int j) const;
  int w1_offset(int j) const { return offsets_[j]; }
  int b1_offset(int j) const;
  int w2_offset(int j) const;
  int b2_offset(int j) const;

  /// Active-coordinate mask: column i of W1_j active iff U(i,j)=1; a node
  /// with no parents has its whole block masked.
  std::vector<uint8_t> chi(const ModelIndex& m) const;
  std::vector<ModelIndex> enumerate() const;  // feasible only for tiny N
  ModelIndex random_model(Rng& rng, double rho_edge) const;

 private:
  int n_, h_;
  bool bias_;
  int d_max_;
  std::vector<int> offsets_;
};

}  // namespace vti
