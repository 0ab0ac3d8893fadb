#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vti/config.hpp"
#include "vti/flows.hpp"
#include "vti/optim.hpp"
#include "vti/samplers.hpp"
#include "vti/targets.hpp"
#include "vti/trainer.hpp"

namespace vti {

/// Leading metadata comment written into every CSV output.
std::string csv_meta_line(const ExperimentConfig& cfg);

/// CSV writer with a '#' metadata first line; numeric cells at full
/// round-trip precision.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const ExperimentConfig& cfg);
  void row(const std::vector<std::string>& cells);
  void row_numeric(const std::vector<double>& cells);
  static std::string fmt(double v);

 private:
  std::ofstream out_;
  size_t width_;
};

/// JSONL writer; the first record is a metadata object.
class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const ExperimentConfig& cfg);
  void record(const nlohmann::json& j);

 private:
  std::ofstream out_;
};

// Dataset persistence -------------------------------------------------------

void save_robustvs_dataset(const std::string& dir, const RobustVsSim& sim,
                           const ExperimentConfig& cfg);
struct LoadedRobustVs {
  Tensor X;
  std::vector<double> y;
  nlohmann::json meta;
};
LoadedRobustVs load_robustvs_dataset(const std::string& dir);

void save_dag_dataset(const std::string& dir, const DagSim& sim, const ExperimentConfig& cfg);
struct LoadedDag {
  Tensor X;
  nlohmann::json meta;
};
LoadedDag load_dag_dataset(const std::string& dir);

// Checkpoints ----------------------------------------------------------------

struct CheckpointExtras {
  long t = 0;
  std::string rng_models, rng_z;
};

void save_checkpoint(const std::string& path, const ParamStore& store, const Adam& adam,
                     const ModelSampler& sampler, const CheckpointExtras& extras,
                     const ExperimentConfig& cfg);

struct LoadedCheckpoint {
  std::vector<double> flow_params;
  std::vector<double> adam_moments;
  long adam_t = 0;
  nlohmann::json sampler;
  CheckpointExtras extras;
  nlohmann::json raw;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& dir);
std::string output_root();  // $VTI_OUTPUT_ROOT or "."
std::string join_path(const std::string& a, const std::string& b);

}  // namespace vti
