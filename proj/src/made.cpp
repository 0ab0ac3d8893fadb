#include "vti/made.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace vti {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapM = Eigen::Map<const EMat>;
using MapM = Eigen::Map<EMat>;

CMapM emap(const Tensor& t) { return CMapM(t.data(), t.rows(), t.cols()); }

std::vector<int> hidden_degrees(int features, int hidden) {
  std::vector<int> deg(static_cast<size_t>(hidden));
  const int mod = std::max(1, features - 1);
  for (int j = 0; j < hidden; ++j) deg[static_cast<size_t>(j)] = j % mod + 1;
  return deg;
}

}  // namespace

MadeNetwork::MadeNetwork(const MadeConfig& cfg, const std::string& prefix, ParamStore& store,
                         Rng& init)
    : cfg_(cfg) {
  if (cfg.features <= 0) throw std::invalid_argument("MadeNetwork: features must be positive");
  if (static_cast<int>(cfg.out_multipliers.size()) != cfg.features)
    throw std::invalid_argument("MadeNetwork: one output multiplier per feature required");

  out_offsets_.resize(static_cast<size_t>(cfg.features));
  for (int i = 0; i < cfg.features; ++i) {
    out_offsets_[static_cast<size_t>(i)] = out_features_;
    out_features_ += cfg.out_multipliers[static_cast<size_t>(i)];
  }

  const std::vector<int> hdeg = hidden_degrees(cfg.features, cfg.hidden);

  mask0_ = Tensor(cfg.features, cfg.hidden);
  for (int i = 0; i < cfg.features; ++i)
    for (int j = 0; j < cfg.hidden; ++j) mask0_(i, j) = hdeg[static_cast<size_t>(j)] >= i + 1 ? 1.0 : 0.0;

  mask_hidden_ = Tensor(cfg.hidden, cfg.hidden);
  for (int i = 0; i < cfg.hidden; ++i)
    for (int j = 0; j < cfg.hidden; ++j)
      mask_hidden_(i, j) = hdeg[static_cast<size_t>(j)] >= hdeg[static_cast<size_t>(i)] ? 1.0 : 0.0;

  mask_final_ = Tensor(cfg.hidden, out_features_);
  for (int i = 0; i < cfg.hidden; ++i)
    for (int d = 0; d < cfg.features; ++d)
      for (int r = 0; r < cfg.out_multipliers[static_cast<size_t>(d)]; ++r)
        mask_final_(i, out_offsets_[static_cast<size_t>(d)] + r) =
            d + 1 > hdeg[static_cast<size_t>(i)] ? 1.0 : 0.0;

  const double bound_in = 1.0 / std::sqrt(static_cast<double>(cfg.features));
  const double bound_h = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  const double bound_c = cfg.ctx_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(cfg.ctx_dim)) : 0.0;

  w0_ = store.create_uniform(prefix + ".w0", cfg.features, cfg.hidden, bound_in, init);
  b0_ = store.create(prefix + ".b0", Tensor(1, cfg.hidden));
  for (int k = 0; k < cfg.blocks; ++k) {
    Block blk;
    const std::string bp = prefix + ".blk" + std::to_string(k);
    blk.w1 = store.create_uniform(bp + ".w1", cfg.hidden, cfg.hidden, bound_h, init);
    blk.b1 = store.create(bp + ".b1", Tensor(1, cfg.hidden));
    blk.w2 = store.create_uniform(bp + ".w2", cfg.hidden, cfg.hidden, bound_h, init);
    blk.b2 = store.create(bp + ".b2", Tensor(1, cfg.hidden));
    if (cfg.ctx_dim > 0)
      blk.wc = store.create_uniform(bp + ".wc", cfg.ctx_dim, cfg.hidden, bound_c, init);
    blocks_.push_back(blk);
  }
  wf_ = store.create(prefix + ".wf", Tensor(cfg.hidden, out_features_));  // zero: identity start
  bf_ = store.create(prefix + ".bf", Tensor(1, out_features_));
}

ad::Var MadeNetwork::forward(ad::Tape& tape, ParamStore& store, ad::Var x, ad::Var ctx) const {
  using namespace ad;
  if (x.cols() != cfg_.features) throw std::invalid_argument("MadeNetwork: input width mismatch");
  Var m0 = tape.constant(mask0_);
  Var mh = tape.constant(mask_hidden_);
  Var mf = tape.constant(mask_final_);
  Var h = add_row(matmul(x, mul(store.use(tape, w0_), m0)), store.use(tape, b0_));
  for (const Block& blk : blocks_) {
    Var t = relu(h);
    t = add_row(matmul(t, mul(store.use(tape, blk.w1), mh)), store.use(tape, blk.b1));
    if (cfg_.ctx_dim > 0) t = add(t, matmul(ctx, store.use(tape, blk.wc)));
    t = relu(t);
    t = add_row(matmul(t, mul(store.use(tape, blk.w2), mh)), store.use(tape, blk.b2));
    h = add(h, t);
  }
  return add_row(matmul(h, mul(store.use(tape, wf_), mf)), store.use(tape, bf_));
}

Tensor MadeNetwork::forward_value(const ParamStore& store, const Tensor& x,
                                  const Tensor& ctx) const {
  if (x.cols() != cfg_.features) throw std::invalid_argument("MadeNetwork: input width mismatch");
  const long R = x.rows();
  auto masked = [](const Tensor& w, const Tensor& m) {
    Tensor out(w.rows(), w.cols());
    for (long i = 0; i < w.size(); ++i) out[i] = w[i] * m[i];
    return out;
  };
  auto linear = [&](const Tensor& in, const Tensor& w, const Tensor* b) {
    Tensor out(in.rows(), w.cols());
    MapM(out.data(), out.rows(), out.cols()).noalias() = emap(in) * emap(w);
    if (b)
      for (long r = 0; r < out.rows(); ++r)
        for (long c = 0; c < out.cols(); ++c) out(r, c) += (*b)(0, c);
    return out;
  };
  auto relu_ = [](Tensor t) {
    for (long i = 0; i < t.size(); ++i) t[i] = t[i] > 0.0 ? t[i] : 0.0;
    return t;
  };

  Tensor h = linear(x, masked(store.value(w0_), mask0_), &store.value(b0_));
  for (const Block& blk : blocks_) {
    Tensor t = relu_(h);
    t = linear(t, masked(store.value(blk.w1), mask_hidden_), &store.value(blk.b1));
    if (cfg_.ctx_dim > 0) {
      Tensor cp = linear(ctx, store.value(blk.wc), nullptr);
      for (long i = 0; i < t.size(); ++i) t[i] += cp[i];
    }
    t = relu_(t);
    t = linear(t, masked(store.value(blk.w2), mask_hidden_), &store.value(blk.b2));
    for (long i = 0; i < t.size(); ++i) h[i] += t[i];
  }
  (void)R;
  return linear(h, masked(store.value(wf_), mask_final_), &store.value(bf_));
}

void MadeNetwork::set_final_bias(ParamStore& store, const std::vector<double>& bias) const {
  if (static_cast<int>(bias.size()) != out_features_)
    throw std::invalid_argument("MadeNetwork: final bias size mismatch");
  Tensor& b = store.value(bf_);
  for (int i = 0; i < out_features_; ++i) b[i] = bias[static_cast<size_t>(i)];
}

}  // namespace vti
