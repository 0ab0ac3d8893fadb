#include "vti/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace vti {

RjSampler::RjSampler(const RobustVsTarget& target, RjConfig cfg, const ModelIndex& init_m,
                     std::vector<double> init_beta)
    : target_(&target), cfg_(cfg), m_(init_m), beta_(std::move(init_beta)) {
  if (static_cast<int>(beta_.size()) != target.layout().d_max())
    throw std::invalid_argument("RjSampler: beta must be saturated (d_max coordinates)");
  chi_ = target.layout().chi(m_);
  scale_ = cfg_.scale_mult * target.config().sigma_beta;
  log_target_ = eval_log_target(m_, beta_);
}

RjSampler::RjSampler(const RobustVsTarget& target, RjConfig cfg, Rng& rng)
    : RjSampler(target, cfg,
                ModelIndex::from_bits(
                    std::vector<uint8_t>(static_cast<size_t>(target.layout().n_bits()), 1)),
                [&] {
                  std::vector<double> b(static_cast<size_t>(target.layout().d_max()));
                  for (double& v : b) v = rng.normal(0.0, target.config().sigma_beta);
                  return b;
                }()) {}

double RjSampler::eval_log_target(const ModelIndex& m, const std::vector<double>& beta) const {
  const std::vector<uint8_t> c = target_->layout().chi(m);
  double lp = target_->loglik_masked(beta, c) + target_->log_prior_m(m);
  // saturated prior: inactive coordinates carry the same Gaussian pseudo-prior
  for (double b : beta) lp += target_->log_prior_beta_coord(b);
  return lp;
}

double RjSampler::fresh_log_target() const { return eval_log_target(m_, beta_); }

void RjSampler::adapt() {
  if (since_adapt_proposed_ == 0) return;
  const double acc =
      static_cast<double>(since_adapt_accepted_) / static_cast<double>(since_adapt_proposed_);
  if (acc > cfg_.acc_hi)
    scale_ *= 1.2;
  else if (acc < cfg_.acc_lo)
    scale_ *= 0.8;
  const double sb = target_->config().sigma_beta;
  scale_ = std::min(std::max(scale_, 1e-4 * sb), 10.0 * sb);
  since_adapt_proposed_ = 0;
  since_adapt_accepted_ = 0;
}

void RjSampler::step(Rng& rng, bool adapting, bool allow_jumps) {
  const int nb = target_->layout().n_bits();
  const bool intercept = target_->layout().intercept();
  if (allow_jumps && rng.bernoulli(cfg_.p_jump)) {
    // birth/death: flip one selectable bit. The flipped coordinate is
    // redrawn from the Gaussian pseudo-prior; its proposal density cancels
    // the prior factor, leaving the likelihood-times-model-prior ratio.
    ++n_jump_proposed;
    const int j = static_cast<int>(rng.uniform_int(nb));
    const int coord = j + (intercept ? 1 : 0);
    ModelIndex prop = m_;
    prop.bits[static_cast<size_t>(j)] ^= 1;
    std::vector<double> beta_prop = beta_;
    beta_prop[static_cast<size_t>(coord)] = rng.normal(0.0, target_->config().sigma_beta);
    const double lp = eval_log_target(prop, beta_prop);
    const double q_corr = target_->log_prior_beta_coord(beta_[static_cast<size_t>(coord)]) -
                          target_->log_prior_beta_coord(beta_prop[static_cast<size_t>(coord)]);
    if (std::log(rng.uniform()) < lp - log_target_ + q_corr) {
      m_ = std::move(prop);
      beta_ = std::move(beta_prop);
      chi_ = target_->layout().chi(m_);
      log_target_ = lp;
      ++n_jump_accepted;
    }
  } else {
    ++n_within_proposed;
    std::vector<double> prop = beta_;
    bool moved = false;
    for (size_t j = 0; j < prop.size(); ++j) {
      if (!chi_[j]) continue;
      prop[j] += scale_ * rng.normal();
      moved = true;
    }
    if (!moved) {
      // empty active set: the zero-step proposal is always accepted, and
      // says nothing about the step scale
      ++n_within_accepted;
    } else {
      ++since_adapt_proposed_;
      const double lp = eval_log_target(m_, prop);
      if (std::log(rng.uniform()) < lp - log_target_) {
        beta_ = std::move(prop);
        log_target_ = lp;
        ++n_within_accepted;
        ++since_adapt_accepted_;
      }
    }
    if (adapting && since_adapt_proposed_ >= cfg_.adapt_interval) adapt();
  }
  (void)intercept;
}

std::vector<long> RjSamples::model_counts(const std::vector<ModelIndex>& support) const {
  std::vector<long> counts(support.size(), 0);
  for (const ModelIndex& m : models)
    for (size_t k = 0; k < support.size(); ++k)
      if (support[k] == m) {
        ++counts[k];
        break;
      }
  return counts;
}

RjSamples rj_run(const RobustVsTarget& target, long n_steps, long burn_in, long thin, Rng& rng,
                 const RjConfig& cfg) {
  if (n_steps <= burn_in) throw std::invalid_argument("rj_run: need n_steps > burn_in");
  if (thin < 1) throw std::invalid_argument("rj_run: thin must be >= 1");
  RjSampler chain(target, cfg, rng);
  const long n_keep = (n_steps - burn_in + thin - 1) / thin;
  RjSamples out;
  out.thetas = Tensor(n_keep, target.layout().d_max());
  out.models.reserve(static_cast<size_t>(n_keep));
  long kept = 0;
  for (long s = 0; s < n_steps; ++s) {
    // jumps are held off until the adapted within-model kernel has settled,
    // so coordinates never freeze at unequilibrated values
    chain.step(rng, s < burn_in, s >= burn_in / 2);
    if (s < burn_in || (s - burn_in) % thin != 0) continue;
    out.models.push_back(chain.model());
    for (int j = 0; j < target.layout().d_max(); ++j) out.thetas(kept, j) = chain.beta()[static_cast<size_t>(j)];
    ++kept;
  }
  return out;
}

}  // namespace vti
