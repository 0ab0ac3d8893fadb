#include "vti/modelspace.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace vti {

ModelIndex ModelIndex::from_bits(std::vector<uint8_t> b) {
  ModelIndex m;
  m.kind = Kind::Bits;
  m.bits = std::move(b);
  return m;
}

ModelIndex ModelIndex::from_int(uint64_t v, int n_bits) {
  std::vector<uint8_t> b(static_cast<size_t>(n_bits));
  for (int j = 0; j < n_bits; ++j) b[static_cast<size_t>(j)] = (v >> j) & 1u;
  return from_bits(std::move(b));
}

ModelIndex ModelIndex::dag(std::vector<int> lehmer, std::vector<uint8_t> edges) {
  ModelIndex m;
  m.kind = Kind::Dag;
  m.lehmer = std::move(lehmer);
  m.edge_bits = std::move(edges);
  const int n = m.dag_nodes();
  if (static_cast<int>(m.edge_bits.size()) != n * (n - 1) / 2)
    throw std::invalid_argument("ModelIndex: edge bit count does not match node count");
  return m;
}

uint64_t ModelIndex::canonical_int() const {
  if (kind != Kind::Bits) throw std::invalid_argument("canonical_int: bit models only");
  uint64_t v = 0;
  for (size_t j = 0; j < bits.size(); ++j)
    if (bits[j]) v |= (uint64_t{1} << j);
  return v;
}

std::string ModelIndex::str() const {
  std::ostringstream os;
  if (kind == Kind::Bits) {
    os << "0x" << std::hex << canonical_int() << std::dec << ":" << bits.size();
    return os.str();
  }
  os << "c:";
  for (size_t i = 0; i < lehmer.size(); ++i) os << (i ? "," : "") << lehmer[i];
  os << "|u:";
  for (uint8_t b : edge_bits) os << (b ? '1' : '0');
  return os.str();
}

ModelIndex ModelIndex::parse(const std::string& s) {
  if (s.rfind("0x", 0) == 0) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("ModelIndex: missing bit width in " + s);
    uint64_t v = std::stoull(s.substr(2, colon - 2), nullptr, 16);
    int nb = std::stoi(s.substr(colon + 1));
    return from_int(v, nb);
  }
  if (s.rfind("c:", 0) == 0) {
    const auto bar = s.find("|u:");
    if (bar == std::string::npos) throw std::invalid_argument("ModelIndex: malformed DAG string " + s);
    std::vector<int> codes;
    std::stringstream cs(s.substr(2, bar - 2));
    std::string tok;
    while (std::getline(cs, tok, ',')) codes.push_back(std::stoi(tok));
    std::vector<uint8_t> edges;
    for (char c : s.substr(bar + 3)) edges.push_back(c == '1' ? 1 : 0);
    return dag(std::move(codes), std::move(edges));
  }
  throw std::invalid_argument("ModelIndex: cannot parse " + s);
}

bool ModelIndex::operator==(const ModelIndex& o) const {
  return kind == o.kind && bits == o.bits && lehmer == o.lehmer && edge_bits == o.edge_bits;
}

int ModelIndex::hamming(const ModelIndex& a, const ModelIndex& b) {
  if (a.kind != b.kind) throw std::invalid_argument("hamming: mixed model kinds");
  int d = 0;
  if (a.kind == Kind::Bits) {
    if (a.bits.size() != b.bits.size()) throw std::invalid_argument("hamming: width mismatch");
    for (size_t i = 0; i < a.bits.size(); ++i) d += a.bits[i] != b.bits[i];
    return d;
  }
  for (size_t i = 0; i < a.lehmer.size(); ++i) d += a.lehmer[i] != b.lehmer[i];
  for (size_t i = 0; i < a.edge_bits.size(); ++i) d += a.edge_bits[i] != b.edge_bits[i];
  return d;
}

std::vector<int> lehmer_decode_order(const std::vector<int>& codes, int n) {
  if (static_cast<int>(codes.size()) != n - 1)
    throw std::invalid_argument("lehmer_decode: need n-1 codes");
  std::vector<int> unused(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) unused[static_cast<size_t>(i)] = i;
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n - 1; ++i) {
    const int c = codes[static_cast<size_t>(i)];
    if (c < 0 || c > n - 1 - i)
      throw std::invalid_argument("lehmer_decode: code out of range");
    order.push_back(unused[static_cast<size_t>(c)]);
    unused.erase(unused.begin() + c);
  }
  order.push_back(unused[0]);  // last column forced
  return order;
}

Tensor lehmer_decode_matrix(const std::vector<int>& codes, int n) {
  const std::vector<int> order = lehmer_decode_order(codes, n);
  Tensor P(n, n);
  for (int i = 0; i < n; ++i) P(order[static_cast<size_t>(i)], i) = 1.0;
  return P;
}

std::vector<Tensor> lehmer_decode_batch(const std::vector<std::vector<int>>& codes, int n) {
  std::vector<Tensor> out;
  out.reserve(codes.size());
  for (const auto& c : codes) out.push_back(lehmer_decode_matrix(c, n));
  return out;
}

Tensor assemble_dag(const Tensor& P, const Tensor& U) {
  const long n = P.rows();
  if (P.cols() != n || U.rows() != n || U.cols() != n)
    throw std::invalid_argument("assemble_dag: shape mismatch");
  // A = P^T U P; with one-hot P this is A[order[i], order[j]] = U[i, j].
  Tensor A(n, n);
  std::vector<long> order(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i)
    for (long r = 0; r < n; ++r)
      if (P(r, i) == 1.0) order[static_cast<size_t>(i)] = r;
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (U(i, j) != 0.0) A(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]) = 1.0;
  return A;
}

long upper_index(int i, int j, int n) {
  if (!(i < j && i >= 0 && j < n)) throw std::invalid_argument("upper_index: need 0 <= i < j < n");
  return static_cast<long>(i) * n - static_cast<long>(i) * (i + 1) / 2 + (j - i - 1);
}

Tensor edge_bits_to_upper(const std::vector<uint8_t>& bits, int n) {
  if (static_cast<int>(bits.size()) != n * (n - 1) / 2)
    throw std::invalid_argument("edge_bits_to_upper: bit count mismatch");
  Tensor U(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) U(i, j) = bits[static_cast<size_t>(upper_index(i, j, n))];
  return U;
}

std::vector<uint8_t> VsLayout::chi(const ModelIndex& m) const {
  if (m.kind != ModelIndex::Kind::Bits || static_cast<int>(m.bits.size()) != n_bits_)
    throw std::invalid_argument("VsLayout: invalid model");
  std::vector<uint8_t> c;
  c.reserve(static_cast<size_t>(d_max()));
  if (intercept_) c.push_back(1);
  c.insert(c.end(), m.bits.begin(), m.bits.end());
  return c;
}

int VsLayout::d_m(const ModelIndex& m) const {
  int d = intercept_ ? 1 : 0;
  for (uint8_t b : m.bits) d += b;
  return d;
}

std::vector<ModelIndex> VsLayout::enumerate() const {
  if (n_bits_ > 24) throw std::invalid_argument("VsLayout: space too large to enumerate");
  std::vector<ModelIndex> out;
  out.reserve(size_t{1} << n_bits_);
  for (uint64_t v = 0; v < (uint64_t{1} << n_bits_); ++v)
    out.push_back(ModelIndex::from_int(v, n_bits_));
  return out;
}

DagLayout::DagLayout(int nodes, int hidden, bool bias) : n_(nodes), h_(hidden), bias_(bias) {
  offsets_.assign(static_cast<size_t>(n_), 0);
  int off = 0;
  for (int j = 1; j < n_; ++j) {  // sorted position j has j candidate parents
    offsets_[static_cast<size_t>(j)] = off;
    off += block_size(j);
  }
  d_max_ = off;
}

int DagLayout::block_size(int j) const {
  return j * h_ + (bias_ ? h_ : 0) + h_ + (bias_ ? 1 : 0);
}

int DagLayout::b1_offset(int j) const { return offsets_[static_cast<size_t>(j)] + j * h_; }
int DagLayout::w2_offset(int j) const { return b1_offset(j) + (bias_ ? h_ : 0); }
int DagLayout::b2_offset(int j) const { return w2_offset(j) + h_; }

std::vector<uint8_t> DagLayout::chi(const ModelIndex& m) const {
  if (m.kind != ModelIndex::Kind::Dag || m.dag_nodes() != n_)
    throw std::invalid_argument("DagLayout: invalid model");
  std::vector<uint8_t> c(static_cast<size_t>(d_max_), 0);
  for (int j = 1; j < n_; ++j) {
    int n_par = 0;
    for (int i = 0; i < j; ++i) n_par += m.edge_bits[static_cast<size_t>(upper_index(i, j, n_))];
    if (n_par == 0) continue;  // no parents: whole block masked
    const int base = offsets_[static_cast<size_t>(j)];
    for (int i = 0; i < j; ++i) {
      if (!m.edge_bits[static_cast<size_t>(upper_index(i, j, n_))]) continue;
      for (int k = 0; k < h_; ++k) c[static_cast<size_t>(base + i * h_ + k)] = 1;
    }
    for (int k = j * h_; k < block_size(j); ++k) c[static_cast<size_t>(base + k)] = 1;
  }
  return c;
}

std::vector<ModelIndex> DagLayout::enumerate() const {
  if (n_ > 4) throw std::invalid_argument("DagLayout: space too large to enumerate");
  std::vector<ModelIndex> out;
  std::vector<int> codes(static_cast<size_t>(n_ - 1), 0);
  const long n_edges = static_cast<long>(n_) * (n_ - 1) / 2;
  // odometer over Lehmer codes crossed with edge bit patterns
  while (true) {
    for (uint64_t e = 0; e < (uint64_t{1} << n_edges); ++e) {
      std::vector<uint8_t> eb(static_cast<size_t>(n_edges));
      for (long k = 0; k < n_edges; ++k) eb[static_cast<size_t>(k)] = (e >> k) & 1u;
      out.push_back(ModelIndex::dag(codes, std::move(eb)));
    }
    int i = n_ - 2;
    while (i >= 0) {
      if (++codes[static_cast<size_t>(i)] <= n_ - 1 - i) break;
      codes[static_cast<size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

ModelIndex DagLayout::random_model(Rng& rng, double rho_edge) const {
  std::vector<int> codes(static_cast<size_t>(n_ - 1));
  for (int i = 0; i < n_ - 1; ++i) codes[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(n_ - i));
  std::vector<uint8_t> eb(static_cast<size_t>(n_ * (n_ - 1) / 2));
  for (auto& b : eb) b = rng.bernoulli(rho_edge) ? 1 : 0;
  return ModelIndex::dag(std::move(codes), std::move(eb));
}

}  // namespace vti
