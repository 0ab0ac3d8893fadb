#include "vti/trainer.hpp"

#include <chrono>
#include <cmath>

namespace vti {

Trainer::Trainer(CosmicFlow& flow, ParamStore& store, Adam& adam, ModelSampler& sampler,
                 Target& target, TrainerConfig cfg, uint64_t seed_models, uint64_t seed_z)
    : flow_(&flow),
      store_(&store),
      adam_(&adam),
      sampler_(&sampler),
      target_(&target),
      cfg_(cfg),
      rng_models_(seed_models),
      rng_z_(seed_z) {
  if (cfg_.iters < 1 || cfg_.batch < 1)
    throw std::invalid_argument("Trainer: iters and batch must be >= 1");
}

const ModelContext& Trainer::context_for(const ModelIndex& m) {
  const std::string key = m.str();
  auto it = ctx_cache_.find(key);
  if (it != ctx_cache_.end()) return it->second;
  ModelContext ctx = make_model_context(m, target_->chi(m), target_->features(m));
  return ctx_cache_.emplace(key, std::move(ctx)).first->second;
}

Trainer::StepInfo Trainer::step() {
  const int nb = cfg_.batch;
  const int d = flow_->config().d_max;

  const std::vector<ModelIndex> models = sampler_->sample(nb, rng_models_);
  Tensor z(nb, d);
  for (long i = 0; i < z.size(); ++i) z[i] = rng_z_.normal();

  std::vector<const ModelContext*> ctxs(static_cast<size_t>(nb));
  std::vector<const ModelIndex*> mptr(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    ctxs[static_cast<size_t>(i)] = &context_for(models[static_cast<size_t>(i)]);
    mptr[static_cast<size_t>(i)] = &ctxs[static_cast<size_t>(i)]->index;
  }

  ad::Tape tape;
  ad::Var zv = tape.constant(z);
  FlowForward fwd = flow_->forward(tape, zv, ctxs);
  ad::Var log_eta = target_->log_eta(tape, fwd.theta, mptr);
  ad::Var log_h = ad::sub(ad::sub(fwd.log_nu_active, fwd.logdet_active), log_eta);

  StepInfo info;
  const Tensor& lh = log_h.value();
  for (int i = 0; i < nb; ++i) {
    if (!std::isfinite(lh(i, 0))) {
      ++t_;
      if (++divergent_streak_ >= 3)
        throw TrainDivergence("non-finite log h at step " + std::to_string(t_) + " for model " +
                              models[static_cast<size_t>(i)].str());
      info.finite = false;
      return info;
    }
  }
  divergent_streak_ = 0;

  ad::Var loss_phi = ad::mul_k(ad::sum_all(log_h), 1.0 / nb);
  store_->zero_grads();
  tape.backward(loss_phi);
  store_->collect_grads(tape);
  clip_by_global_norm(*store_, cfg_.clip_norm);
  adam_->set_lr(cfg_.lr_phi);
  adam_->step(*store_);

  SamplerUpdate su;
  su.models = mptr;
  su.log_h.resize(static_cast<size_t>(nb));
  su.log_prior.resize(static_cast<size_t>(nb));
  su.lr = cfg_.lr_psi;
  double mean_lh = 0.0, loss_total = 0.0;
  for (int i = 0; i < nb; ++i) {
    su.log_h[static_cast<size_t>(i)] = lh(i, 0);
    su.log_prior[static_cast<size_t>(i)] = target_->log_prior_m(*mptr[static_cast<size_t>(i)]);
    mean_lh += lh(i, 0);
    loss_total += lh(i, 0) + sampler_->log_mass(*mptr[static_cast<size_t>(i)]) -
                  su.log_prior[static_cast<size_t>(i)];
  }
  sampler_->update(su, rng_models_);

  ++t_;
  info.loss = loss_total / nb;
  info.mean_log_h = mean_lh / nb;
  return info;
}

std::vector<LossRecord> Trainer::run(const std::function<void(const LossRecord&)>& on_log) {
  std::vector<LossRecord> history;
  const auto t0 = std::chrono::steady_clock::now();
  for (long it = 0; it < cfg_.iters; ++it) {
    const StepInfo info = step();
    if (!info.finite) continue;
    if (cfg_.log_every > 0 && (t_ % cfg_.log_every == 0 || it + 1 == cfg_.iters)) {
      LossRecord rec;
      rec.t = t_;
      rec.loss = info.loss;
      Rng ent_rng(0xE0117u + static_cast<uint64_t>(t_));
      rec.entropy = sampler_->entropy(&ent_rng, 256);
      rec.wall_s =
          std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t0)
              .count();
      history.push_back(rec);
      if (on_log) on_log(rec);
    }
  }
  return history;
}

std::vector<Trainer::JointSample> Trainer::sample_joint(int n, Rng& rng_m, Rng& rng_zs) {
  const int d = flow_->config().d_max;
  std::vector<JointSample> out;
  out.reserve(static_cast<size_t>(n));
  const std::vector<ModelIndex> models = sampler_->sample(n, rng_m);
  Tensor z(n, d);
  for (long i = 0; i < z.size(); ++i) z[i] = rng_zs.normal();
  std::vector<const ModelContext*> ctxs(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ctxs[static_cast<size_t>(i)] = &context_for(models[static_cast<size_t>(i)]);

  ad::Tape tape;
  FlowForward fwd = flow_->forward(tape, tape.constant(z), ctxs);
  const Tensor& theta = fwd.theta.value();
  const Tensor& lnu = fwd.log_nu_active.value();
  const Tensor& ld = fwd.logdet_active.value();
  for (int i = 0; i < n; ++i) {
    JointSample js;
    js.m = models[static_cast<size_t>(i)];
    const ModelContext& ctx = *ctxs[static_cast<size_t>(i)];
    js.theta_active.reserve(static_cast<size_t>(ctx.d_m));
    for (int j = 0; j < d; ++j)
      if (ctx.chi[static_cast<size_t>(j)]) js.theta_active.push_back(theta(i, j));
    js.log_q_m = sampler_->log_mass(js.m);
    js.log_q_theta = lnu(i, 0) - ld(i, 0);
    out.push_back(std::move(js));
  }
  return out;
}

}  // namespace vti
