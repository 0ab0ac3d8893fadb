#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vti/made.hpp"
#include "vti/modelspace.hpp"
#include "vti/optim.hpp"
#include "vti/rng.hpp"

namespace vti {

/// Bias-corrected running mean of the per-batch loss, used as the score
/// function baseline. The baseline returned for step t is computed from
/// batches 1..t-1 only.
struct ControlVariate {
  double beta = 0.9;
  double mu_tilde = 0.0;
  long t = 0;

  double baseline() const;
  void update(double batch_mean);
};

struct IgLimiterConfig {
  double eps = 0.05;
  double alpha_floor = 1e-20;
  int max_halvings = 100;
};

struct IgResult {
  double alpha = 0.0;  // accepted scale; 0 = rejected, gradient zeroed
  int halvings = 0;
  bool accepted = false;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
};

/// Halve alpha from lr until |H(psi) - H(psi')| <= eps; below the floor the
/// step is rejected. entropy_at must be deterministic in alpha.
IgResult ig_limited_step(double lr, double entropy_before,
                         const std::function<double(double)>& entropy_at,
                         const IgLimiterConfig& cfg);

struct SamplerUpdate {
  std::vector<const ModelIndex*> models;
  std::vector<double> log_h;      // per-sample log h_phi(z_i | m_i)
  std::vector<double> log_prior;  // log p(m_i)
  double lr = 1e-2;
};

class ModelSampler {
 public:
  virtual ~ModelSampler() = default;
  virtual std::vector<ModelIndex> sample(int n, Rng& rng) = 0;
  virtual double log_mass(const ModelIndex& m) const = 0;
  virtual void update(const SamplerUpdate& batch, Rng& aux_rng) = 0;
  /// Entropy of q_psi; closed form where available, Monte Carlo otherwise.
  virtual double entropy(Rng* rng, int n_mc) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json checkpoint() const = 0;
  virtual void restore(const nlohmann::json& j) = 0;
  virtual const IgResult& last_ig() const { return last_ig_; }

 protected:
  IgResult last_ig_;
};

// ---------------------------------------------------------------------------

class CategoricalSampler : public ModelSampler {
 public:
  CategoricalSampler(std::vector<ModelIndex> models, IgLimiterConfig ig = {},
                     double cv_beta = 0.9);

  std::vector<ModelIndex> sample(int n, Rng& rng) override;
  double log_mass(const ModelIndex& m) const override;
  void update(const SamplerUpdate& batch, Rng& aux_rng) override;
  double entropy(Rng* rng, int n_mc) const override;
  std::string kind() const override { return "categorical"; }
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& j) override;

  const Tensor& logits() const { return psi_; }
  void set_logits(Tensor psi);
  const std::vector<ModelIndex>& models() const { return models_; }
  int index_of(const ModelIndex& m) const;
  std::vector<double> probs() const;
  const ControlVariate& cv() const { return cv_; }

  /// Score-function gradient for a batch with per-sample factors g_i
  /// (already baseline-subtracted), (1/n) sum g_i * d log q / d psi.
  Tensor sfe_gradient(const std::vector<int>& idx, const std::vector<double>& g) const;

  static double entropy_of_logits(const Tensor& psi);

 private:
  void refresh() const;

  std::vector<ModelIndex> models_;
  std::unordered_map<std::string, int> index_;
  Tensor psi_;
  IgLimiterConfig ig_;
  ControlVariate cv_;
  mutable bool dirty_ = true;
  mutable double log_z_ = 0.0;
  mutable std::vector<double> cdf_;
};

// ---------------------------------------------------------------------------

/// Per-slot discrete variable description for the autoregressive sampler.
/// Slot i is categorical over `outcomes[i]` values and is parameterized by
/// outcomes[i]-1 free logits (the zero outcome is the pinned baseline), so a
/// two-outcome slot is an ordinary Bernoulli logit.
struct SlotCodec {
  std::vector<int> outcomes;
  std::function<std::vector<int>(const ModelIndex&)> to_slots;
  std::function<ModelIndex(const std::vector<int>&)> from_slots;
};

SlotCodec vs_slot_codec(int n_bits);
SlotCodec dag_slot_codec(int nodes);

struct MadePlusConfig {
  int hidden = 64;
  int blocks = 2;
};

class MadePlusSampler : public ModelSampler {
 public:
  MadePlusSampler(SlotCodec codec, MadePlusConfig cfg, uint64_t init_seed,
                  IgLimiterConfig ig = {}, double cv_beta = 0.9);

  std::vector<ModelIndex> sample(int n, Rng& rng) override;
  double log_mass(const ModelIndex& m) const override;
  void update(const SamplerUpdate& batch, Rng& aux_rng) override;
  double entropy(Rng* rng, int n_mc) const override;
  std::string kind() const override { return "neural"; }
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& j) override;

  /// Sample n models and also return their exact log-masses.
  std::vector<ModelIndex> sample_with_logq(int n, Rng& rng, std::vector<double>* logq);
  std::vector<double> log_mass_batch(const std::vector<const ModelIndex*>& ms) const;

  /// Importance-weighted entropy estimate -mean[w log q'] with w = q'/q over
  /// a held-out batch drawn once from the current parameters.
  double importance_entropy(const std::vector<std::vector<int>>& heldout_slots,
                            const std::vector<double>& heldout_logq) const;

  ParamStore& params() { return params_; }

 private:
  Tensor slots_matrix(const std::vector<const ModelIndex*>& ms) const;
  std::vector<double> logq_rows(const Tensor& slot_vals) const;

  SlotCodec codec_;
  MadePlusConfig cfg_;
  ParamStore params_;
  std::unique_ptr<MadeNetwork> net_;
  IgLimiterConfig ig_;
  ControlVariate cv_;
};

// ---------------------------------------------------------------------------

struct GpSurrogateConfig {
  bool diagonal = false;  // mean-field per-model posterior
  double beta = 1.0;      // UCB exploration weight
  double noise_var = 1.0;
  double signal_var = 1.0;
  double lambda_m = 0.0;  // Hamming kernel length scale; 0 = |slots|/4
};

class GpSurrogateSampler : public ModelSampler {
 public:
  GpSurrogateSampler(std::vector<ModelIndex> models, std::vector<double> log_prior,
                     GpSurrogateConfig cfg);

  std::vector<ModelIndex> sample(int n, Rng& rng) override;
  double log_mass(const ModelIndex& m) const override;
  /// Fits the surrogate to y = -log h (the negative per-sample loss).
  void update(const SamplerUpdate& batch, Rng& aux_rng) override;
  double entropy(Rng* rng, int n_mc) const override;
  std::string kind() const override { return "surrogate"; }
  nlohmann::json checkpoint() const override;
  void restore(const nlohmann::json& j) override;

  /// Raw recursive conditioning on observations (model index, y).
  void gp_update(const std::vector<int>& idx, const std::vector<double>& y);
  std::vector<double> ucb_weights() const;  // prior-weighted UCB softmax
  const std::vector<double>& mean() const { return mu_; }
  std::vector<double> variance() const;
  const std::vector<ModelIndex>& models() const { return models_; }
  int index_of(const ModelIndex& m) const;

 private:
  void refresh() const;

  std::vector<ModelIndex> models_;
  std::unordered_map<std::string, int> index_;
  std::vector<double> log_prior_;
  GpSurrogateConfig cfg_;
  std::vector<double> mu_;
  Tensor sigma_;               // exact mode posterior covariance
  std::vector<double> prec_;   // diagonal mode precision
  mutable bool dirty_ = true;
  mutable std::vector<double> log_w_;
  mutable std::vector<double> cdf_;
};

}  // namespace vti
