#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vti/flows.hpp"
#include "vti/optim.hpp"
#include "vti/samplers.hpp"
#include "vti/targets.hpp"

namespace vti {

struct TrainerConfig {
  long iters = 30000;
  int batch = 128;
  double lr_phi = 1e-3;
  double lr_psi = 1e-2;
  double clip_norm = 10.0;
  long log_every = 100;
};

struct LossRecord {
  long t = 0;
  double loss = 0.0;
  double entropy = 0.0;
  double wall_s = 0.0;
};

struct TrainDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Joint stochastic optimization of the flow parameters (reparameterized
/// gradient, Adam, clipped) and the model-weight distribution (sampler's own
/// rule) from the same sampled batch per step.
class Trainer {
 public:
  Trainer(CosmicFlow& flow, ParamStore& store, Adam& adam, ModelSampler& sampler, Target& target,
          TrainerConfig cfg, uint64_t seed_models, uint64_t seed_z);

  struct StepInfo {
    double loss = 0.0;     // batch estimate of L(psi, phi)
    double mean_log_h = 0.0;
    bool finite = true;
  };
  StepInfo step();

  std::vector<LossRecord> run(const std::function<void(const LossRecord&)>& on_log = nullptr);

  const ModelContext& context_for(const ModelIndex& m);
  long t() const { return t_; }
  void set_t(long t) { t_ = t; }
  Rng& rng_models() { return rng_models_; }
  Rng& rng_z() { return rng_z_; }
  ModelSampler& sampler() { return *sampler_; }
  CosmicFlow& flow() { return *flow_; }
  Target& target() { return *target_; }
  Adam& adam() { return *adam_; }
  const TrainerConfig& config() const { return cfg_; }

  /// Draw (m, theta, log q) joint samples from the current variational fit.
  struct JointSample {
    ModelIndex m;
    std::vector<double> theta_active;
    double log_q_m = 0.0;
    double log_q_theta = 0.0;
  };
  std::vector<JointSample> sample_joint(int n, Rng& rng_m, Rng& rng_zs);

 private:
  CosmicFlow* flow_;
  ParamStore* store_;
  Adam* adam_;
  ModelSampler* sampler_;
  Target* target_;
  TrainerConfig cfg_;
  Rng rng_models_, rng_z_;
  long t_ = 0;
  int divergent_streak_ = 0;
  std::unordered_map<std::string, ModelContext> ctx_cache_;
};

}  // namespace vti
