#include "vti/samplers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vti {

namespace {

int cdf_draw(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return static_cast<int>(cdf.size()) - 1;
  return static_cast<int>(it - cdf.begin());
}

std::vector<double> cdf_from_logw(const std::vector<double>& log_w) {
  std::vector<double> cdf(log_w.size());
  double acc = 0.0;
  for (size_t i = 0; i < log_w.size(); ++i) {
    acc += std::exp(log_w[i]);
    cdf[i] = acc;
  }
  for (double& c : cdf) c /= acc;
  return cdf;
}

}  // namespace

double ControlVariate::baseline() const {
  if (t == 0) return 0.0;
  return mu_tilde / (1.0 - std::pow(beta, static_cast<double>(t)));
}

void ControlVariate::update(double batch_mean) {
  ++t;
  mu_tilde = beta * mu_tilde + (1.0 - beta) * batch_mean;
}

IgResult ig_limited_step(double lr, double entropy_before,
                         const std::function<double(double)>& entropy_at,
                         const IgLimiterConfig& cfg) {
  IgResult res;
  res.entropy_before = entropy_before;
  double alpha = lr;
  for (int k = 0; k <= cfg.max_halvings; ++k) {
    if (alpha <= cfg.alpha_floor) break;
    const double h_after = entropy_at(alpha);
    if (std::abs(entropy_before - h_after) <= cfg.eps) {
      res.alpha = alpha;
      res.halvings = k;
      res.accepted = true;
      res.entropy_after = h_after;
      return res;
    }
    alpha *= 0.5;
    res.halvings = k + 1;
  }
  res.alpha = 0.0;
  res.accepted = false;
  res.entropy_after = entropy_before;
  return res;
}

// ---------------------------------------------------------------------------
// Categorical

CategoricalSampler::CategoricalSampler(std::vector<ModelIndex> models, IgLimiterConfig ig,
                                       double cv_beta)
    : models_(std::move(models)), ig_(ig) {
  if (models_.empty()) throw std::invalid_argument("CategoricalSampler: empty model list");
  cv_.beta = cv_beta;
  psi_ = Tensor(1, static_cast<long>(models_.size()));
  for (size_t i = 0; i < models_.size(); ++i) index_[models_[i].str()] = static_cast<int>(i);
}

void CategoricalSampler::refresh() const {
  if (!dirty_) return;
  double m = psi_[0];
  for (long i = 1; i < psi_.size(); ++i) m = std::max(m, psi_[i]);
  double s = 0.0;
  for (long i = 0; i < psi_.size(); ++i) s += std::exp(psi_[i] - m);
  log_z_ = m + std::log(s);
  std::vector<double> log_w(static_cast<size_t>(psi_.size()));
  for (long i = 0; i < psi_.size(); ++i) log_w[static_cast<size_t>(i)] = psi_[i] - log_z_;
  cdf_ = cdf_from_logw(log_w);
  dirty_ = false;
}

int CategoricalSampler::index_of(const ModelIndex& m) const {
  auto it = index_.find(m.str());
  if (it == index_.end()) return -1;
  return it->second;
}

std::vector<ModelIndex> CategoricalSampler::sample(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  refresh();
  std::vector<ModelIndex> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(models_[static_cast<size_t>(cdf_draw(cdf_, rng))]);
  return out;
}

double CategoricalSampler::log_mass(const ModelIndex& m) const {
  const int i = index_of(m);
  if (i < 0) return -std::numeric_limits<double>::infinity();
  refresh();
  return psi_[i] - log_z_;
}

double CategoricalSampler::entropy_of_logits(const Tensor& psi) {
  double m = psi[0];
  for (long i = 1; i < psi.size(); ++i) m = std::max(m, psi[i]);
  double s = 0.0;
  for (long i = 0; i < psi.size(); ++i) s += std::exp(psi[i] - m);
  const double log_z = m + std::log(s);
  double h = 0.0;
  for (long i = 0; i < psi.size(); ++i) {
    const double lp = psi[i] - log_z;
    h -= std::exp(lp) * lp;
  }
  return h;
}

double CategoricalSampler::entropy(Rng*, int) const { return entropy_of_logits(psi_); }

Tensor CategoricalSampler::sfe_gradient(const std::vector<int>& idx,
                                        const std::vector<double>& g) const {
  if (idx.empty() || idx.size() != g.size())
    throw std::invalid_argument("sfe_gradient: batch empty or ragged");
  ad::Tape tape;
  ad::Var psi = tape.leaf(psi_);
  ad::Var lsm = ad::add_col(psi, ad::neg(ad::logsumexp_rows(psi)));  // (1, M) log-softmax
  ad::Var picked = ad::gather_cols(lsm, idx);                        // (1, n)
  Tensor coef(1, static_cast<long>(g.size()));
  for (size_t i = 0; i < g.size(); ++i) coef[static_cast<long>(i)] = g[i] / static_cast<double>(g.size());
  ad::Var loss = ad::sum_all(ad::mul(picked, tape.constant(coef)));
  tape.backward(loss);
  return tape.grad(psi);
}

void CategoricalSampler::update(const SamplerUpdate& batch, Rng&) {
  if (batch.models.empty()) throw std::invalid_argument("sampler update: empty batch");
  const size_t n = batch.models.size();
  std::vector<int> idx(n);
  std::vector<double> g(n);
  const double baseline = cv_.baseline();
  double mean_raw = 0.0;
  for (size_t i = 0; i < n; ++i) {
    idx[i] = index_of(*batch.models[i]);
    if (idx[i] < 0) throw std::invalid_argument("sampler update: model outside support");
    const double raw = batch.log_h[i] + log_mass(*batch.models[i]) - batch.log_prior[i];
    g[i] = raw - baseline;
    mean_raw += raw;
  }
  mean_raw /= static_cast<double>(n);

  const Tensor grad = sfe_gradient(idx, g);
  cv_.update(mean_raw);

  const double h0 = entropy_of_logits(psi_);
  auto entropy_at = [&](double alpha) {
    Tensor cand = psi_;
    for (long i = 0; i < cand.size(); ++i) cand[i] -= alpha * grad[i];
    return entropy_of_logits(cand);
  };
  last_ig_ = ig_limited_step(batch.lr, h0, entropy_at, ig_);
  if (last_ig_.accepted && last_ig_.alpha > 0.0) {
    for (long i = 0; i < psi_.size(); ++i) psi_[i] -= last_ig_.alpha * grad[i];
    dirty_ = true;
  }
}

void CategoricalSampler::set_logits(Tensor psi) {
  if (psi.size() != static_cast<long>(models_.size()))
    throw std::invalid_argument("set_logits: size mismatch");
  psi_ = std::move(psi);
  dirty_ = true;
}

std::vector<double> CategoricalSampler::probs() const {
  refresh();
  std::vector<double> p(models_.size());
  for (size_t i = 0; i < models_.size(); ++i) p[i] = std::exp(psi_[static_cast<long>(i)] - log_z_);
  return p;
}

nlohmann::json CategoricalSampler::checkpoint() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["psi"] = psi_.vec();
  j["cv"] = {{"mu_tilde", cv_.mu_tilde}, {"t", cv_.t}, {"beta", cv_.beta}};
  return j;
}

void CategoricalSampler::restore(const nlohmann::json& j) {
  std::vector<double> psi = j.at("psi").get<std::vector<double>>();
  if (psi.size() != models_.size()) throw std::invalid_argument("checkpoint: psi size mismatch");
  psi_ = Tensor::row(psi);
  cv_.mu_tilde = j.at("cv").at("mu_tilde").get<double>();
  cv_.t = j.at("cv").at("t").get<long>();
  cv_.beta = j.at("cv").at("beta").get<double>();
  dirty_ = true;
}

// ---------------------------------------------------------------------------
// MADE+ neural sampler

SlotCodec vs_slot_codec(int n_bits) {
  SlotCodec c;
  c.outcomes.assign(static_cast<size_t>(n_bits), 2);
  c.to_slots = [n_bits](const ModelIndex& m) {
    if (static_cast<int>(m.bits.size()) != n_bits)
      throw std::invalid_argument("vs codec: bit width mismatch");
    std::vector<int> s(m.bits.size());
    for (size_t i = 0; i < m.bits.size(); ++i) s[i] = m.bits[i];
    return s;
  };
  c.from_slots = [](const std::vector<int>& s) {
    std::vector<uint8_t> bits(s.size());
    for (size_t i = 0; i < s.size(); ++i) bits[i] = static_cast<uint8_t>(s[i]);
    return ModelIndex::from_bits(std::move(bits));
  };
  return c;
}

SlotCodec dag_slot_codec(int nodes) {
  SlotCodec c;
  const int n_lehmer = nodes - 1;
  const int n_edges = nodes * (nodes - 1) / 2;
  for (int i = 0; i < n_lehmer; ++i) c.outcomes.push_back(nodes - i);
  for (int i = 0; i < n_edges; ++i) c.outcomes.push_back(2);
  c.to_slots = [n_lehmer, n_edges](const ModelIndex& m) {
    std::vector<int> s;
    s.reserve(static_cast<size_t>(n_lehmer + n_edges));
    s.insert(s.end(), m.lehmer.begin(), m.lehmer.end());
    for (uint8_t b : m.edge_bits) s.push_back(b);
    return s;
  };
  c.from_slots = [n_lehmer, n_edges](const std::vector<int>& s) {
    std::vector<int> codes(s.begin(), s.begin() + n_lehmer);
    std::vector<uint8_t> eb;
    eb.reserve(static_cast<size_t>(n_edges));
    for (int i = 0; i < n_edges; ++i) eb.push_back(static_cast<uint8_t>(s[static_cast<size_t>(n_lehmer + i)]));
    return ModelIndex::dag(std::move(codes), std::move(eb));
  };
  return c;
}

MadePlusSampler::MadePlusSampler(SlotCodec codec, MadePlusConfig cfg, uint64_t init_seed,
                                 IgLimiterConfig ig, double cv_beta)
    : codec_(std::move(codec)), cfg_(cfg), ig_(ig) {
  cv_.beta = cv_beta;
  MadeConfig mc;
  mc.features = static_cast<int>(codec_.outcomes.size());
  mc.hidden = cfg.hidden;
  mc.blocks = cfg.blocks;
  for (int o : codec_.outcomes) mc.out_multipliers.push_back(o - 1);
  mc.ctx_dim = 0;
  Rng init(init_seed);
  net_ = std::make_unique<MadeNetwork>(mc, "sampler", params_, init);
}

Tensor MadePlusSampler::slots_matrix(const std::vector<const ModelIndex*>& ms) const {
  const int d = static_cast<int>(codec_.outcomes.size());
  Tensor s(static_cast<long>(ms.size()), d);
  for (size_t r = 0; r < ms.size(); ++r) {
    const std::vector<int> vals = codec_.to_slots(*ms[r]);
    for (int i = 0; i < d; ++i) s(static_cast<long>(r), i) = vals[static_cast<size_t>(i)];
  }
  return s;
}

std::vector<double> MadePlusSampler::logq_rows(const Tensor& slot_vals) const {
  const long n = slot_vals.rows();
  const int d = static_cast<int>(codec_.outcomes.size());
  const Tensor out = net_->forward_value(params_, slot_vals, Tensor());
  std::vector<double> lq(static_cast<size_t>(n), 0.0);
  for (long r = 0; r < n; ++r) {
    for (int i = 0; i < d; ++i) {
      const int O = codec_.outcomes[static_cast<size_t>(i)];
      const int off = net_->out_offset(i);
      double mx = 0.0;
      for (int k = 0; k < O - 1; ++k) mx = std::max(mx, out(r, off + k));
      double s = std::exp(-mx);
      for (int k = 0; k < O - 1; ++k) s += std::exp(out(r, off + k) - mx);
      const double lse = mx + std::log(s);
      const int v = static_cast<int>(slot_vals(r, i));
      const double lv = v == 0 ? 0.0 : out(r, off + v - 1);
      lq[static_cast<size_t>(r)] += lv - lse;
    }
  }
  return lq;
}

std::vector<ModelIndex> MadePlusSampler::sample_with_logq(int n, Rng& rng,
                                                          std::vector<double>* logq) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const int d = static_cast<int>(codec_.outcomes.size());
  Tensor s(n, d);
  std::vector<double> lq(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < d; ++i) {
    const Tensor out = net_->forward_value(params_, s, Tensor());
    const int O = codec_.outcomes[static_cast<size_t>(i)];
    const int off = net_->out_offset(i);
    for (long r = 0; r < n; ++r) {
      double mx = 0.0;
      for (int k = 0; k < O - 1; ++k) mx = std::max(mx, out(r, off + k));
      double z = std::exp(-mx);
      for (int k = 0; k < O - 1; ++k) z += std::exp(out(r, off + k) - mx);
      const double lse = mx + std::log(z);
      // inverse-cdf draw over outcomes 0..O-1 with pinned zero logit
      const double u = rng.uniform();
      double acc = 0.0;
      int pick = O - 1;
      for (int k = 0; k < O; ++k) {
        const double lp = (k == 0 ? 0.0 : out(r, off + k - 1)) - lse;
        acc += std::exp(lp);
        if (u <= acc) {
          pick = k;
          break;
        }
      }
      s(r, i) = pick;
      lq[static_cast<size_t>(r)] += (pick == 0 ? 0.0 : out(r, off + pick - 1)) - lse;
    }
  }
  std::vector<ModelIndex> out_models;
  out_models.reserve(static_cast<size_t>(n));
  for (long r = 0; r < n; ++r) {
    std::vector<int> vals(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) vals[static_cast<size_t>(i)] = static_cast<int>(s(r, i));
    out_models.push_back(codec_.from_slots(vals));
  }
  if (logq) *logq = std::move(lq);
  return out_models;
}

std::vector<ModelIndex> MadePlusSampler::sample(int n, Rng& rng) {
  return sample_with_logq(n, rng, nullptr);
}

double MadePlusSampler::log_mass(const ModelIndex& m) const {
  std::vector<const ModelIndex*> ms{&m};
  return logq_rows(slots_matrix(ms))[0];
}

std::vector<double> MadePlusSampler::log_mass_batch(
    const std::vector<const ModelIndex*>& ms) const {
  return logq_rows(slots_matrix(ms));
}

double MadePlusSampler::importance_entropy(const std::vector<std::vector<int>>& heldout_slots,
                                           const std::vector<double>& heldout_logq) const {
  const int d = static_cast<int>(codec_.outcomes.size());
  Tensor s(static_cast<long>(heldout_slots.size()), d);
  for (size_t r = 0; r < heldout_slots.size(); ++r)
    for (int i = 0; i < d; ++i) s(static_cast<long>(r), i) = heldout_slots[r][static_cast<size_t>(i)];
  const std::vector<double> lq_new = logq_rows(s);
  double h = 0.0;
  for (size_t r = 0; r < heldout_slots.size(); ++r) {
    const double w = std::exp(lq_new[r] - heldout_logq[r]);
    h -= w * lq_new[r];
  }
  return h / static_cast<double>(heldout_slots.size());
}

void MadePlusSampler::update(const SamplerUpdate& batch, Rng& aux_rng) {
  if (batch.models.empty()) throw std::invalid_argument("sampler update: empty batch");
  const size_t n = batch.models.size();
  const Tensor slot_vals = slots_matrix(batch.models);
  const std::vector<double> lq = logq_rows(slot_vals);

  const double baseline = cv_.baseline();
  std::vector<double> g(n);
  double mean_raw = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double raw = batch.log_h[i] + lq[i] - batch.log_prior[i];
    g[i] = raw - baseline;
    mean_raw += raw;
  }
  mean_raw /= static_cast<double>(n);

  // score-function gradient through the autoregressive log-mass
  ad::Tape tape;
  ad::Var x = tape.constant(slot_vals);
  ad::Var out = net_->forward(tape, params_, x, ad::Var{});
  const int d = static_cast<int>(codec_.outcomes.size());
  ad::Var logq_col = tape.constant(Tensor(static_cast<long>(n), 1));
  for (int i = 0; i < d; ++i) {
    const int O = codec_.outcomes[static_cast<size_t>(i)];
    ad::Var block = ad::slice_cols(out, net_->out_offset(i), O - 1);
    ad::Var full = ad::concat_cols({tape.constant(Tensor(static_cast<long>(n), 1)), block});
    std::vector<int> pick(n);
    for (size_t r = 0; r < n; ++r) pick[r] = static_cast<int>(slot_vals(static_cast<long>(r), i));
    logq_col = ad::add(logq_col, ad::sub(ad::take_per_row(full, pick), ad::logsumexp_rows(full)));
  }
  Tensor coef(static_cast<long>(n), 1);
  for (size_t i = 0; i < n; ++i) coef[static_cast<long>(i)] = g[i] / static_cast<double>(n);
  ad::Var loss = ad::sum_all(ad::mul(logq_col, tape.constant(coef)));
  params_.zero_grads();
  tape.backward(loss);
  params_.collect_grads(tape);
  cv_.update(mean_raw);

  // information-gain limited step with importance-weighted entropy reuse
  const int n_held = static_cast<int>(n);
  std::vector<double> held_lq;
  std::vector<ModelIndex> held = sample_with_logq(n_held, aux_rng, &held_lq);
  std::vector<std::vector<int>> held_slots;
  held_slots.reserve(held.size());
  for (const ModelIndex& m : held) held_slots.push_back(codec_.to_slots(m));
  double h0 = 0.0;
  for (double v : held_lq) h0 -= v;
  h0 /= static_cast<double>(n_held);

  const std::vector<double> base_flat = params_.flatten_values();
  std::vector<double> grad_flat;
  grad_flat.reserve(base_flat.size());
  for (ParamId id : params_.all()) {
    const Tensor& gt = params_.grad(id);
    grad_flat.insert(grad_flat.end(), gt.vec().begin(), gt.vec().end());
  }
  auto apply_alpha = [&](double alpha) {
    std::vector<double> cand(base_flat.size());
    for (size_t i = 0; i < cand.size(); ++i) cand[i] = base_flat[i] - alpha * grad_flat[i];
    params_.unflatten_values(cand);
  };
  auto entropy_at = [&](double alpha) {
    apply_alpha(alpha);
    const double h = importance_entropy(held_slots, held_lq);
    params_.unflatten_values(base_flat);
    return h;
  };
  last_ig_ = ig_limited_step(batch.lr, h0, entropy_at, ig_);
  if (last_ig_.accepted && last_ig_.alpha > 0.0) apply_alpha(last_ig_.alpha);
}

double MadePlusSampler::entropy(Rng* rng, int n_mc) const {
  if (!rng || n_mc < 1) throw std::invalid_argument("neural sampler entropy needs a Monte Carlo rng");
  auto* self = const_cast<MadePlusSampler*>(this);
  std::vector<double> lq;
  self->sample_with_logq(n_mc, *rng, &lq);
  double h = 0.0;
  for (double v : lq) h -= v;
  return h / static_cast<double>(n_mc);
}

nlohmann::json MadePlusSampler::checkpoint() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["params"] = params_.flatten_values();
  j["cv"] = {{"mu_tilde", cv_.mu_tilde}, {"t", cv_.t}, {"beta", cv_.beta}};
  return j;
}

void MadePlusSampler::restore(const nlohmann::json& j) {
  params_.unflatten_values(j.at("params").get<std::vector<double>>());
  cv_.mu_tilde = j.at("cv").at("mu_tilde").get<double>();
  cv_.t = j.at("cv").at("t").get<long>();
  cv_.beta = j.at("cv").at("beta").get<double>();
}

// ---------------------------------------------------------------------------
// GP surrogate

GpSurrogateSampler::GpSurrogateSampler(std::vector<ModelIndex> models,
                                       std::vector<double> log_prior, GpSurrogateConfig cfg)
    : models_(std::move(models)), log_prior_(std::move(log_prior)), cfg_(cfg) {
  if (models_.empty()) throw std::invalid_argument("GpSurrogateSampler: empty model list");
  if (log_prior_.size() != models_.size())
    throw std::invalid_argument("GpSurrogateSampler: prior size mismatch");
  if (cfg_.noise_var <= 0.0) throw std::invalid_argument("GpSurrogateSampler: noise_var must be > 0");
  const size_t M = models_.size();
  for (size_t i = 0; i < M; ++i) index_[models_[i].str()] = static_cast<int>(i);
  mu_.assign(M, 0.0);
  if (cfg_.diagonal) {
    prec_.assign(M, 1.0 / cfg_.signal_var);
  } else {
    double lambda = cfg_.lambda_m;
    if (lambda <= 0.0) {
      // default length scale: a quarter of the slot count
      const ModelIndex& m0 = models_[0];
      const double slots = m0.kind == ModelIndex::Kind::Bits
                               ? static_cast<double>(m0.bits.size())
                               : static_cast<double>(m0.lehmer.size() + m0.edge_bits.size());
      lambda = std::max(1.0, slots / 4.0);
    }
    sigma_ = Tensor(static_cast<long>(M), static_cast<long>(M));
    for (size_t i = 0; i < M; ++i)
      for (size_t j = 0; j < M; ++j)
        sigma_(static_cast<long>(i), static_cast<long>(j)) =
            cfg_.signal_var *
            std::exp(-static_cast<double>(ModelIndex::hamming(models_[i], models_[j])) / lambda);
  }
}

int GpSurrogateSampler::index_of(const ModelIndex& m) const {
  auto it = index_.find(m.str());
  if (it == index_.end()) return -1;
  return it->second;
}

std::vector<double> GpSurrogateSampler::variance() const {
  const size_t M = models_.size();
  std::vector<double> v(M);
  for (size_t i = 0; i < M; ++i)
    v[i] = cfg_.diagonal ? 1.0 / prec_[i] : sigma_(static_cast<long>(i), static_cast<long>(i));
  return v;
}

void GpSurrogateSampler::gp_update(const std::vector<int>& idx, const std::vector<double>& y) {
  if (idx.empty() || idx.size() != y.size())
    throw std::invalid_argument("gp_update: batch empty or ragged");
  for (double v : y)
    if (!std::isfinite(v)) throw std::runtime_error("gp_update: non-finite observation");
  const size_t M = models_.size();
  if (cfg_.diagonal) {
    // mean-field conjugate update: precision accumulates additively
    std::vector<double> sum_y(M, 0.0);
    std::vector<int> count(M, 0);
    for (size_t i = 0; i < idx.size(); ++i) {
      sum_y[static_cast<size_t>(idx[i])] += y[i];
      ++count[static_cast<size_t>(idx[i])];
    }
    for (size_t m = 0; m < M; ++m) {
      if (count[m] == 0) continue;
      const double tau_new = prec_[m] + count[m] / cfg_.noise_var;
      mu_[m] = (prec_[m] * mu_[m] + sum_y[m] / cfg_.noise_var) / tau_new;
      prec_[m] = tau_new;
    }
  } else {
    const long nb = static_cast<long>(idx.size());
    Eigen::MatrixXd G(nb, nb);
    Eigen::VectorXd r(nb);
    for (long i = 0; i < nb; ++i) {
      r(i) = y[static_cast<size_t>(i)] - mu_[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      for (long j = 0; j < nb; ++j)
        G(i, j) = sigma_(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
      G(i, i) += cfg_.noise_var;
    }
    Eigen::LDLT<Eigen::MatrixXd> solver(G);
    Eigen::MatrixXd Kb(static_cast<long>(M), nb);  // Sigma[:, batch]
    for (long m = 0; m < static_cast<long>(M); ++m)
      for (long j = 0; j < nb; ++j) Kb(m, j) = sigma_(m, idx[static_cast<size_t>(j)]);
    Eigen::VectorXd alpha = solver.solve(r);
    Eigen::MatrixXd W = solver.solve(Kb.transpose());  // (nb, M)
    for (long m = 0; m < static_cast<long>(M); ++m)
      mu_[static_cast<size_t>(m)] += Kb.row(m).dot(alpha);
    for (long a = 0; a < static_cast<long>(M); ++a)
      for (long b = 0; b < static_cast<long>(M); ++b)
        sigma_(a, b) -= Kb.row(a).dot(W.col(b));
  }
  dirty_ = true;
}

void GpSurrogateSampler::update(const SamplerUpdate& batch, Rng&) {
  std::vector<int> idx;
  std::vector<double> y;
  idx.reserve(batch.models.size());
  y.reserve(batch.models.size());
  for (size_t i = 0; i < batch.models.size(); ++i) {
    const int k = index_of(*batch.models[i]);
    if (k < 0) throw std::invalid_argument("surrogate update: model outside support");
    idx.push_back(k);
    y.push_back(-batch.log_h[i]);  // surrogate models the negative per-sample loss
  }
  gp_update(idx, y);
}

void GpSurrogateSampler::refresh() const {
  if (!dirty_) return;
  const size_t M = models_.size();
  const std::vector<double> var = variance();
  std::vector<double> u(M);
  for (size_t m = 0; m < M; ++m) u[m] = mu_[m] + cfg_.beta * std::sqrt(std::max(0.0, var[m]));
  log_w_.assign(M, 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t m = 0; m < M; ++m) {
    log_w_[m] = log_prior_[m] + u[m];
    mx = std::max(mx, log_w_[m]);
  }
  double s = 0.0;
  for (size_t m = 0; m < M; ++m) s += std::exp(log_w_[m] - mx);
  const double lse = mx + std::log(s);
  for (size_t m = 0; m < M; ++m) log_w_[m] -= lse;
  cdf_ = cdf_from_logw(log_w_);
  dirty_ = false;
}

std::vector<double> GpSurrogateSampler::ucb_weights() const {
  refresh();
  std::vector<double> w(log_w_.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w_[i]);
  return w;
}

std::vector<ModelIndex> GpSurrogateSampler::sample(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  refresh();
  std::vector<ModelIndex> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(models_[static_cast<size_t>(cdf_draw(cdf_, rng))]);
  return out;
}

double GpSurrogateSampler::log_mass(const ModelIndex& m) const {
  const int i = index_of(m);
  if (i < 0) return -std::numeric_limits<double>::infinity();
  refresh();
  return log_w_[static_cast<size_t>(i)];
}

double GpSurrogateSampler::entropy(Rng*, int) const {
  refresh();
  double h = 0.0;
  for (double lw : log_w_) h -= std::exp(lw) * lw;
  return h;
}

nlohmann::json GpSurrogateSampler::checkpoint() const {
  nlohmann::json j;
  j["kind"] = kind();
  j["mu"] = mu_;
  j["diagonal"] = cfg_.diagonal;
  if (cfg_.diagonal)
    j["prec"] = prec_;
  else
    j["sigma"] = sigma_.vec();
  return j;
}

void GpSurrogateSampler::restore(const nlohmann::json& j) {
  mu_ = j.at("mu").get<std::vector<double>>();
  if (cfg_.diagonal)
    prec_ = j.at("prec").get<std::vector<double>>();
  else {
    std::vector<double> s = j.at("sigma").get<std::vector<double>>();
    const long M = static_cast<long>(models_.size());
    if (static_cast<long>(s.size()) != M * M)
      throw std::invalid_argument("checkpoint: sigma size mismatch");
    sigma_ = Tensor(M, M);
    sigma_.vec() = s;
  }
  dirty_ = true;
}

}  // namespace vti
