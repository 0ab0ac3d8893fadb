#include "vti/flows.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vti {

namespace {

constexpr double kScaleFloor = 1e-3;
constexpr double kMinBinFrac = 1e-3;
constexpr double kMinDeriv = 1e-3;
constexpr double kLogSqrt2Pi = 0.9189385332046727;

long next_pow2_impl(long x) {
  long p = 1;
  while (p < x) p <<= 1;
  return p;
}

}  // namespace

double softplus_inv(double y) { return std::log(std::expm1(y)); }

int FlowConfig::transforms_or_default() const {
  if (n_transforms > 0) return n_transforms;
  switch (kind) {
    case FlowKind::Affine: return 5;
    case FlowKind::Spline: return 4;
    case FlowKind::DiagGaussian: return 1;
  }
  return 1;
}

int FlowConfig::blocks_or_default() const {
  if (blocks > 0) return blocks;
  switch (kind) {
    case FlowKind::Affine: return 5;
    case FlowKind::Spline: return 6;
    case FlowKind::DiagGaussian: return 2;
  }
  return 2;
}

ModelContext make_model_context(const ModelIndex& m, std::vector<uint8_t> chi,
                                std::vector<double> features) {
  ModelContext ctx;
  ctx.index = m;
  ctx.chi = std::move(chi);
  ctx.features = std::move(features);
  const int d = static_cast<int>(ctx.chi.size());
  ctx.perm.reserve(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    if (ctx.chi[static_cast<size_t>(i)]) ctx.perm.push_back(i);
  ctx.d_m = static_cast<int>(ctx.perm.size());
  for (int i = 0; i < d; ++i)
    if (!ctx.chi[static_cast<size_t>(i)]) ctx.perm.push_back(i);
  ctx.inv_perm.assign(static_cast<size_t>(d), 0);
  for (int i = 0; i < d; ++i) ctx.inv_perm[static_cast<size_t>(ctx.perm[static_cast<size_t>(i)])] = i;
  return ctx;
}

ad::Var gauss_logpdf(ad::Var x) {
  using namespace ad;
  return add_k(mul_k(square(x), -0.5), -kLogSqrt2Pi);
}

CosmicFlow::CosmicFlow(const FlowConfig& cfg, ParamStore& store, Rng& init)
    : cfg_(cfg), store_(&store) {
  if (cfg.d_max <= 0) throw std::invalid_argument("CosmicFlow: d_max must be positive");
  if (cfg.feature_dim <= 0) throw std::invalid_argument("CosmicFlow: feature_dim must be positive");

  const int K = cfg.spline_bins;
  if (cfg_.kind == FlowKind::Spline) {
    param_block_ = 3 * K - 1;
    const double B = cfg.spline_bound;
    static_raw_.assign(static_cast<size_t>(param_block_), 0.0);
    for (int i = 2 * K; i < param_block_; ++i) static_raw_[static_cast<size_t>(i)] = softplus_inv(1.0 - kMinDeriv);
    static_constrained_.assign(static_cast<size_t>(param_block_), 0.0);
    for (int i = 0; i < K; ++i) static_constrained_[static_cast<size_t>(i)] = 2.0 * B / K;
    for (int i = K; i < 2 * K; ++i) static_constrained_[static_cast<size_t>(i)] = 2.0 * B / K;
    for (int i = 2 * K; i < param_block_; ++i) static_constrained_[static_cast<size_t>(i)] = 1.0;
  } else {
    param_block_ = 2;
    static_raw_ = {0.0, softplus_inv(1.0 - kScaleFloor)};
    static_constrained_ = {0.0, 1.0};
  }

  // Context encoder
  if (cfg_.ctx.kind == CtxEncoderConfig::Kind::Identity) {
    ctx_width_ = cfg_.feature_dim;
  } else {
    if (cfg_.ctx.target_width <= 0)
      throw std::invalid_argument("CosmicFlow: encoder target width must be positive");
    long cur = cfg_.feature_dim;
    int layer = 0;
    while (cur != cfg_.ctx.target_width) {
      long next = cfg_.ctx.target_width < cur
                      ? cfg_.ctx.target_width
                      : std::min<long>(next_pow2_impl(2 * cur), cfg_.ctx.target_width);
      const double bound = 1.0 / std::sqrt(static_cast<double>(cur));
      enc_w_.push_back(store.create_uniform("flow.enc" + std::to_string(layer) + ".w", cur, next,
                                            bound, init));
      enc_b_.push_back(store.create("flow.enc" + std::to_string(layer) + ".b", Tensor(1, next)));
      cur = next;
      ++layer;
    }
    ctx_width_ = static_cast<int>(cur);
  }

  const int L = cfg_.transforms_or_default();
  const int R = cfg_.d_max * param_block_;
  std::vector<double> bias_tiled(static_cast<size_t>(R));
  for (int i = 0; i < cfg_.d_max; ++i)
    for (int p = 0; p < param_block_; ++p)
      bias_tiled[static_cast<size_t>(i * param_block_ + p)] = static_raw_[static_cast<size_t>(p)];

  for (int k = 0; k < L; ++k) {
    Step s;
    const std::string prefix = "flow.t" + std::to_string(k);
    if (cfg_.kind == FlowKind::DiagGaussian) {
      const double b1 = 1.0 / std::sqrt(static_cast<double>(ctx_width_));
      s.cw1 = store.create_uniform(prefix + ".cw1", ctx_width_, cfg_.ctx_hidden, b1, init);
      s.cb1 = store.create(prefix + ".cb1", Tensor(1, cfg_.ctx_hidden));
      s.cw2 = store.create(prefix + ".cw2", Tensor(cfg_.ctx_hidden, R));
      s.cb2 = store.create(prefix + ".cb2", Tensor::row(bias_tiled));
    } else {
      MadeConfig mc;
      mc.features = cfg_.d_max;
      mc.hidden = cfg_.hidden;
      mc.blocks = cfg_.blocks_or_default();
      mc.out_multipliers.assign(static_cast<size_t>(cfg_.d_max), param_block_);
      mc.ctx_dim = ctx_width_;
      s.made = std::make_unique<MadeNetwork>(mc, prefix, store, init);
      s.made->set_final_bias(store, bias_tiled);
    }
    steps_.push_back(std::move(s));
  }

  if (cfg_.kind == FlowKind::Spline && cfg_.global_affine) {
    ga_loc_ = store.create("flow.ga.loc", Tensor::scalar(0.0), cfg_.global_affine_trainable);
    ga_scale_raw_ = store.create("flow.ga.scale", Tensor::scalar(softplus_inv(1.0 - kScaleFloor)),
                                 cfg_.global_affine_trainable);
  }
}

ad::Var CosmicFlow::encode_ctx(ad::Tape& tape, const Tensor& features) const {
  using namespace ad;
  Var h = tape.constant(features);
  if (cfg_.ctx.kind == CtxEncoderConfig::Kind::Identity) return h;
  for (size_t l = 0; l < enc_w_.size(); ++l) {
    h = relu(add_row(matmul(h, store_->use(tape, enc_w_[l])), store_->use(tape, enc_b_[l])));
  }
  return h;
}

ad::Var CosmicFlow::conditioner(ad::Tape& tape, const Step& s, ad::Var x, ad::Var ctx) const {
  using namespace ad;
  if (s.made) return s.made->forward(tape, *store_, x, ctx);
  Var h = relu(add_row(matmul(ctx, store_->use(tape, s.cw1)), store_->use(tape, s.cb1)));
  return add_row(matmul(h, store_->use(tape, s.cw2)), store_->use(tape, s.cb2));
}

CosmicFlow::Applied CosmicFlow::apply_affine(ad::Tape& tape, ad::Var x, ad::Var rho,
                                             const Tensor& c_aligned) const {
  using namespace ad;
  const int d = cfg_.d_max;
  std::vector<int> loc_idx, scale_idx;
  for (int i = 0; i < d; ++i) {
    loc_idx.push_back(2 * i);
    scale_idx.push_back(2 * i + 1);
  }
  Var loc = gather_cols(rho, loc_idx);
  Var scale = add_k(softplus(gather_cols(rho, scale_idx)), kScaleFloor);

  Tensor one_minus(c_aligned.rows(), c_aligned.cols());
  for (long i = 0; i < c_aligned.size(); ++i) one_minus[i] = 1.0 - c_aligned[i];
  Var c = tape.constant(c_aligned);
  Var scale_b = add(mul(scale, c), tape.constant(one_minus));  // static scale is 1
  Var loc_b = mul(loc, c);                                     // static location is 0

  Applied out;
  out.out = add(loc_b, mul(scale_b, x));
  Var ld = log(scale_b);
  out.ld_active = row_sum(mul(ld, c));
  out.ld_full = row_sum(ld);
  return out;
}

CosmicFlow::AppliedCol CosmicFlow::spline_col(ad::Tape& tape, ad::Var v, ad::Var raw,
                                              const Tensor& c_col, bool inverse) const {
  using namespace ad;
  const int K = cfg_.spline_bins;
  const double B = cfg_.spline_bound;
  const long R = v.rows();

  Var wraw = slice_cols(raw, 0, K);
  Var hraw = slice_cols(raw, K, K);
  Var draw = slice_cols(raw, 2 * K, K - 1);

  Tensor blend_wh(R, K), blend_d(R, K - 1), ones_col(R, 1), zeros_col(R, 1);
  for (long r = 0; r < R; ++r) {
    const double off = 1.0 - c_col(r, 0);
    for (int k = 0; k < K; ++k) blend_wh(r, k) = off * 2.0 * B / K;
    for (int k = 0; k + 1 < K; ++k) blend_d(r, k) = off;
    ones_col(r, 0) = 1.0;
  }

  auto softmax_bins = [&](Var rawv) {
    Var sm = exp(add_col(rawv, neg(logsumexp_rows(rawv))));
    return mul_k(add_k(mul_k(sm, 1.0 - K * kMinBinFrac), kMinBinFrac), 2.0 * B);
  };
  auto blend_wh_fn = [&](Var t) {
    Var cc = tape.constant(c_col);
    return add(mul_col(t, cc), tape.constant(blend_wh));
  };

  Var w = blend_wh_fn(softmax_bins(wraw));
  Var h = blend_wh_fn(softmax_bins(hraw));
  Var d_core = add_k(softplus(draw), kMinDeriv);
  Var d_in = add(mul_col(d_core, tape.constant(c_col)), tape.constant(blend_d));
  Var d_full = concat_cols({tape.constant(ones_col), d_in, tape.constant(ones_col)});  // (R,K+1)

  Var negB = tape.constant(Tensor::full(R, 1, -B));
  Var xk = concat_cols({negB, add_k(cumsum_rows(w), -B)});  // (R,K+1)
  Var yk = concat_cols({negB, add_k(cumsum_rows(h), -B)});

  // Outside the interval the transform is the identity with zero log-det;
  // inside rows are computed on a zero-substituted copy so the unselected
  // branch stays finite.
  Tensor inside(R, 1);
  for (long r = 0; r < R; ++r)
    inside(r, 0) = std::abs(v.value()(r, 0)) < B ? 1.0 : 0.0;
  Var vc = select(inside, v, tape.constant(zeros_col));

  const std::vector<int> idx = searchsorted(inverse ? yk.value() : xk.value(), vc.value());
  std::vector<int> idx1(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) idx1[i] = idx[i] + 1;

  Var wk = take_per_row(w, idx);
  Var hk = take_per_row(h, idx);
  Var xk_i = take_per_row(xk, idx);
  Var yk_i = take_per_row(yk, idx);
  Var dk = take_per_row(d_full, idx);
  Var dk1 = take_per_row(d_full, idx1);
  Var s = div(hk, wk);
  Var t2 = sub(add(dk1, dk), mul_k(s, 2.0));  // d_{k+1} + d_k - 2s

  Var xi;
  if (!inverse) {
    xi = div(sub(vc, xk_i), wk);
  } else {
    Var ydiff = sub(vc, yk_i);
    Var a = add(mul(hk, sub(s, dk)), mul(ydiff, t2));
    Var b = sub(mul(hk, dk), mul(ydiff, t2));
    Var cq = neg(mul(s, ydiff));
    Var disc = sub(square(b), mul_k(mul(a, cq), 4.0));
    Var root = sqrt(relu(disc));
    xi = div(mul_k(cq, 2.0), neg(add(b, root)));
  }
  Var xi1 = add_k(neg(xi), 1.0);
  Var xixi1 = mul(xi, xi1);
  Var denom = add(s, mul(t2, xixi1));

  Var out_in;
  if (!inverse) {
    Var num = mul(hk, add(mul(s, square(xi)), mul(dk, xixi1)));
    out_in = add(yk_i, div(num, denom));
  } else {
    out_in = add(xk_i, mul(xi, wk));
  }
  Var ld_num = add(add(mul(dk1, square(xi)), mul_k(mul(s, xixi1), 2.0)), mul(dk, square(xi1)));
  Var ld_in = add(sub(mul_k(log(s), 2.0), mul_k(log(denom), 2.0)), log(ld_num));

  AppliedCol res;
  res.out = select(inside, out_in, v);
  res.ld = select(inside, ld_in, tape.constant(zeros_col));
  return res;
}

ad::Var CosmicFlow::affine_col_inverse(ad::Tape& tape, ad::Var theta_col, ad::Var rho_block,
                                       const Tensor& c_col, ad::Var* ld_out) const {
  using namespace ad;
  const long R = theta_col.rows();
  Var loc = slice_cols(rho_block, 0, 1);
  Var scale = add_k(softplus(slice_cols(rho_block, 1, 1)), kScaleFloor);
  Tensor one_minus(R, 1);
  for (long r = 0; r < R; ++r) one_minus(r, 0) = 1.0 - c_col(r, 0);
  Var c = tape.constant(c_col);
  Var scale_b = add(mul(scale, c), tape.constant(one_minus));
  Var loc_b = mul(loc, c);
  *ld_out = log(scale_b);
  return div(sub(theta_col, loc_b), scale_b);
}

FlowForward CosmicFlow::forward(ad::Tape& tape, ad::Var z,
                                const std::vector<const ModelContext*>& ms) const {
  using namespace ad;
  const long batch = z.rows();
  const int d = cfg_.d_max;
  if (static_cast<long>(ms.size()) != batch)
    throw std::invalid_argument("CosmicFlow::forward: one model per batch row required");
  if (z.cols() != d) throw std::invalid_argument("CosmicFlow::forward: z width mismatch");
  for (const ModelContext* m : ms)
    if (static_cast<int>(m->chi.size()) != d)
      throw std::invalid_argument("CosmicFlow::forward: mask length mismatch");

  std::vector<int> perm_idx(static_cast<size_t>(batch * d));
  std::vector<int> inv_idx(static_cast<size_t>(batch * d));
  std::vector<int> rev_idx(static_cast<size_t>(batch * d));
  Tensor c_aligned(batch, d);
  Tensor features(batch, cfg_.feature_dim);
  Tensor dm_col(batch, 1);
  for (long r = 0; r < batch; ++r) {
    const ModelContext& m = *ms[static_cast<size_t>(r)];
    for (int i = 0; i < d; ++i) {
      perm_idx[static_cast<size_t>(r * d + i)] = m.perm[static_cast<size_t>(i)];
      inv_idx[static_cast<size_t>(r * d + i)] = m.inv_perm[static_cast<size_t>(i)];
      rev_idx[static_cast<size_t>(r * d + i)] = i < m.d_m ? m.d_m - 1 - i : i;
      c_aligned(r, i) = i < m.d_m ? 1.0 : 0.0;
    }
    for (int f = 0; f < cfg_.feature_dim; ++f) features(r, f) = m.features[static_cast<size_t>(f)];
    dm_col(r, 0) = static_cast<double>(m.d_m);
  }

  Var ctx = encode_ctx(tape, features);
  Var ca = tape.constant(c_aligned);
  Var za = gather_cols_per_row(z, perm_idx);
  Var log_nu_active = row_sum(mul(ca, gauss_logpdf(za)));

  Var x = za;
  Var ld_active = tape.constant(Tensor(batch, 1));
  Var ld_full = tape.constant(Tensor(batch, 1));
  const int L = static_cast<int>(steps_.size());
  for (int k = 0; k < L; ++k) {
    if (!x.value().all_finite())
      throw std::runtime_error("flow divergence at step " + std::to_string(k));
    if (k > 0 && cfg_.kind != FlowKind::DiagGaussian) x = gather_cols_per_row(x, rev_idx);
    Var rho = conditioner(tape, steps_[static_cast<size_t>(k)], x, ctx);
    if (cfg_.kind == FlowKind::Spline) {
      std::vector<Var> outs, lds;
      for (int i = 0; i < d; ++i) {
        Tensor c_col(batch, 1);
        for (long r = 0; r < batch; ++r) c_col(r, 0) = c_aligned(r, i);
        AppliedCol ac = spline_col(tape, slice_cols(x, i, 1),
                                   slice_cols(rho, i * param_block_, param_block_), c_col, false);
        outs.push_back(ac.out);
        lds.push_back(ac.ld);
      }
      x = concat_cols(outs);
      Var ld_mat = concat_cols(lds);
      ld_active = add(ld_active, row_sum(mul(ld_mat, ca)));
      ld_full = add(ld_full, row_sum(ld_mat));
    } else {
      Applied ap = apply_affine(tape, x, rho, c_aligned);
      x = ap.out;
      ld_active = add(ld_active, ap.ld_active);
      ld_full = add(ld_full, ap.ld_full);
    }
  }

  if (cfg_.kind == FlowKind::Spline && cfg_.global_affine) {
    Var ones = tape.constant(Tensor::full(batch, 1, 1.0));
    Var scale = add_k(softplus(store_->use(tape, ga_scale_raw_)), kScaleFloor);  // (1,1)
    Var loc = store_->use(tape, ga_loc_);
    Var scale_col = matmul(ones, scale);
    Var loc_col = matmul(ones, loc);
    x = add_col(mul_col(x, scale_col), loc_col);
    Var log_s = log(scale);  // (1,1)
    ld_active = add(ld_active, matmul(tape.constant(dm_col), log_s));
    ld_full = add(ld_full, matmul(tape.constant(Tensor::full(batch, 1, static_cast<double>(d))), log_s));
  }

  if (!x.value().all_finite())
    throw std::runtime_error("flow divergence at step " + std::to_string(L));

  FlowForward out;
  out.theta = gather_cols_per_row(x, inv_idx);
  out.logdet_active = ld_active;
  out.logdet_full = ld_full;
  out.log_nu_active = log_nu_active;
  return out;
}

CosmicFlow::AlignedInverse CosmicFlow::inverse_aligned(ad::Tape& tape, ad::Var x_aligned,
                                                       const ModelContext& m) const {
  using namespace ad;
  const long batch = x_aligned.rows();
  const int d = cfg_.d_max;

  Tensor c_aligned(batch, d);
  for (long r = 0; r < batch; ++r)
    for (int i = 0; i < d; ++i) c_aligned(r, i) = i < m.d_m ? 1.0 : 0.0;
  Tensor features(batch, cfg_.feature_dim);
  for (long r = 0; r < batch; ++r)
    for (int f = 0; f < cfg_.feature_dim; ++f) features(r, f) = m.features[static_cast<size_t>(f)];
  std::vector<int> rev_idx(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) rev_idx[static_cast<size_t>(i)] = i < m.d_m ? m.d_m - 1 - i : i;

  Var ctx = encode_ctx(tape, features);
  Var ca = tape.constant(c_aligned);
  Var x = x_aligned;
  Var ld_active = tape.constant(Tensor(batch, 1));
  Var ld_full = tape.constant(Tensor(batch, 1));

  if (cfg_.kind == FlowKind::Spline && cfg_.global_affine) {
    Var ones = tape.constant(Tensor::full(batch, 1, 1.0));
    Var scale = add_k(softplus(store_->use(tape, ga_scale_raw_)), kScaleFloor);
    Var loc = store_->use(tape, ga_loc_);
    x = div_col(add_col(x, neg(matmul(ones, loc))), matmul(ones, scale));
    Var log_s = log(scale);
    Tensor dm_col(batch, 1);
    dm_col.fill(static_cast<double>(m.d_m));
    ld_active = add(ld_active, matmul(tape.constant(dm_col), log_s));
    ld_full = add(ld_full, matmul(tape.constant(Tensor::full(batch, 1, static_cast<double>(d))), log_s));
  }

  const int L = static_cast<int>(steps_.size());
  for (int k = L - 1; k >= 0; --k) {
    const Step& step = steps_[static_cast<size_t>(k)];
    if (!step.made) {
      // context-only conditioner: all coordinates invert in parallel
      Var rho = conditioner(tape, step, x, ctx);
      std::vector<int> loc_idx, scale_idx;
      for (int i = 0; i < d; ++i) {
        loc_idx.push_back(2 * i);
        scale_idx.push_back(2 * i + 1);
      }
      Var loc = gather_cols(rho, loc_idx);
      Var scale = add_k(softplus(gather_cols(rho, scale_idx)), kScaleFloor);
      Tensor one_minus(batch, d);
      for (long i = 0; i < one_minus.size(); ++i) one_minus[i] = 1.0 - c_aligned[i];
      Var scale_b = add(mul(scale, ca), tape.constant(one_minus));
      Var loc_b = mul(loc, ca);
      x = div(sub(x, loc_b), scale_b);
      Var ld = log(scale_b);
      ld_active = add(ld_active, row_sum(mul(ld, ca)));
      ld_full = add(ld_full, row_sum(ld));
    } else {
      Var z_par = tape.constant(Tensor(batch, d));
      std::vector<Var> lds;
      for (int i = 0; i < d; ++i) {
        Var rho = step.made->forward(tape, *store_, z_par, ctx);
        Var block = slice_cols(rho, i * param_block_, param_block_);
        Tensor c_col(batch, 1);
        for (long r = 0; r < batch; ++r) c_col(r, 0) = c_aligned(r, i);
        Var x_i = slice_cols(x, i, 1);
        Var z_i, ld_i;
        if (cfg_.kind == FlowKind::Spline) {
          AppliedCol ac = spline_col(tape, x_i, block, c_col, true);
          z_i = ac.out;
          ld_i = ac.ld;
        } else {
          z_i = affine_col_inverse(tape, x_i, block, c_col, &ld_i);
        }
        Tensor e_i(1, d);
        e_i(0, i) = 1.0;
        z_par = add(z_par, matmul(z_i, tape.constant(e_i)));
        lds.push_back(ld_i);
      }
      x = z_par;
      Var ld_mat = concat_cols(lds);
      ld_active = add(ld_active, row_sum(mul(ld_mat, ca)));
      ld_full = add(ld_full, row_sum(ld_mat));
    }
    if (k > 0 && cfg_.kind != FlowKind::DiagGaussian) x = gather_cols(x, rev_idx);
  }

  AlignedInverse out;
  out.z_aligned = x;
  out.ld_active = ld_active;
  out.ld_full = ld_full;
  return out;
}

FlowInverse CosmicFlow::inverse(ad::Tape& tape, ad::Var theta_sat, const ModelContext& m) const {
  using namespace ad;
  if (theta_sat.cols() != cfg_.d_max)
    throw std::invalid_argument("CosmicFlow::inverse: width mismatch");
  std::vector<int> perm(m.perm.begin(), m.perm.end());
  std::vector<int> inv(m.inv_perm.begin(), m.inv_perm.end());
  Var xa = gather_cols(theta_sat, perm);
  AlignedInverse ai = inverse_aligned(tape, xa, m);
  FlowInverse out;
  out.z = gather_cols(ai.z_aligned, inv);
  out.logdet_active = ai.ld_active;
  out.logdet_full = ai.ld_full;
  return out;
}

ad::Var CosmicFlow::saturated_logq(ad::Tape& tape, ad::Var theta_sat, const ModelContext& m) const {
  using namespace ad;
  std::vector<int> perm(m.perm.begin(), m.perm.end());
  Var xa = gather_cols(theta_sat, perm);
  AlignedInverse ai = inverse_aligned(tape, xa, m);
  Var log_nu = row_sum(gauss_logpdf(ai.z_aligned));
  return sub(log_nu, ai.ld_full);
}

ad::Var CosmicFlow::conditional_logq(ad::Tape& tape, ad::Var theta_active,
                                     const ModelContext& m) const {
  using namespace ad;
  const long batch = theta_active.rows();
  if (theta_active.cols() != m.d_m)
    throw std::invalid_argument("CosmicFlow::conditional_logq: dimension mismatch");
  Var xa = theta_active;
  if (m.d_m < cfg_.d_max) {
    Var pad = tape.constant(Tensor(batch, cfg_.d_max - m.d_m));
    xa = concat_cols({theta_active, pad});
  }
  AlignedInverse ai = inverse_aligned(tape, xa, m);
  Tensor c_aligned(batch, cfg_.d_max);
  for (long r = 0; r < batch; ++r)
    for (int i = 0; i < m.d_m; ++i) c_aligned(r, i) = 1.0;
  Var log_nu = row_sum(mul(tape.constant(c_aligned), gauss_logpdf(ai.z_aligned)));
  return sub(log_nu, ai.ld_active);
}

}  // namespace vti
