#pragma once

#include <memory>
#include <string>

#include "vti/baselines.hpp"
#include "vti/config.hpp"
#include "vti/io.hpp"
#include "vti/metrics.hpp"
#include "vti/trainer.hpp"

namespace vti {

struct StreamSeeds {
  uint64_t models = 0, z = 0, data = 0, init = 0;
};
StreamSeeds derive_seeds(uint64_t master);

/// Everything a training or evaluation run needs, assembled from one config.
struct Experiment {
  ExperimentConfig cfg;
  StreamSeeds seeds;
  std::unique_ptr<Target> target;
  nlohmann::json data_meta;
  std::unique_ptr<ParamStore> store;
  std::unique_ptr<CosmicFlow> flow;
  std::unique_ptr<Adam> adam;
  std::unique_ptr<ModelSampler> sampler;
  std::unique_ptr<Trainer> trainer;
};

FlowConfig flow_config_from(const ExperimentConfig& cfg, int d_max, int feature_dim);
std::unique_ptr<Target> build_target(const ExperimentConfig& cfg, const std::string& data_dir,
                                     nlohmann::json* meta_out);
std::unique_ptr<ModelSampler> build_sampler(const ExperimentConfig& cfg, const Target& target,
                                            const StreamSeeds& seeds);

/// Builds target, flow, sampler and trainer; requires cfg["data"] to point at
/// a simulated dataset directory.
Experiment build_experiment(const ExperimentConfig& cfg);

/// Writes the training checkpoint next to loss/q dumps in cfg["out"].
void run_training(Experiment& ex, const std::string& out_dir, bool resume = false);

}  // namespace vti
