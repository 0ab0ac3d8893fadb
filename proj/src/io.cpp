#include "vti/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace vti {

namespace fs = std::filesystem;

std::string csv_meta_line(const ExperimentConfig& cfg) {
  return "# config_hash=" + cfg.hash() + " seed=" + cfg.get("seed") + " version=" +
         code_version();
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     const ExperimentConfig& cfg)
    : out_(path), width_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  out_ << csv_meta_line(cfg) << "\n";
  for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << "\n";
}

std::string CsvWriter::fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::invalid_argument("csv row width mismatch");
  for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << "\n";
}

void CsvWriter::row_numeric(const std::vector<double>& cells) {
  std::vector<std::string> s;
  s.reserve(cells.size());
  for (double v : cells) s.push_back(fmt(v));
  row(s);
}

JsonlWriter::JsonlWriter(const std::string& path, const ExperimentConfig& cfg) : out_(path) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json meta;
  meta["meta"] = {{"config_hash", cfg.hash()},
                  {"seed", cfg.get("seed")},
                  {"version", code_version()}};
  out_ << meta.dump() << "\n";
}

void JsonlWriter::record(const nlohmann::json& j) { out_ << j.dump() << "\n"; }

// ---------------------------------------------------------------------------

void save_robustvs_dataset(const std::string& dir, const RobustVsSim& sim,
                           const ExperimentConfig& cfg) {
  ensure_dir(dir);
  std::vector<std::string> header;
  for (long j = 0; j < sim.X.cols(); ++j) header.push_back("x" + std::to_string(j));
  header.push_back("y");
  CsvWriter w(join_path(dir, "dataset.csv"), header, cfg);
  for (long i = 0; i < sim.X.rows(); ++i) {
    std::vector<double> cells;
    for (long j = 0; j < sim.X.cols(); ++j) cells.push_back(sim.X(i, j));
    cells.push_back(sim.y[static_cast<size_t>(i)]);
    w.row_numeric(cells);
  }
  nlohmann::json meta;
  meta["target"] = "robustvs";
  meta["config_hash"] = cfg.hash();
  meta["version"] = code_version();
  meta["seed"] = cfg.get_long("seed");
  meta["true_model"] = sim.true_model.str();
  meta["true_beta"] = sim.true_beta;
  meta["beta_value"] = sim.beta_value;
  meta["misspec"] = cfg.get("robustvs.misspec");
  std::ofstream mj(join_path(dir, "dataset_meta.json"));
  mj << meta.dump(2) << "\n";
}

LoadedRobustVs load_robustvs_dataset(const std::string& dir) {
  const std::string csv = join_path(dir, "dataset.csv");
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("missing dataset: " + csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> r;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) r.push_back(std::stod(tok));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset: " + csv);
  LoadedRobustVs out;
  const long n = static_cast<long>(rows.size());
  const long p = static_cast<long>(rows[0].size()) - 1;
  out.X = Tensor(n, p);
  out.y.resize(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < p; ++j) out.X(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    out.y[static_cast<size_t>(i)] = rows[static_cast<size_t>(i)][static_cast<size_t>(p)];
  }
  std::ifstream mj(join_path(dir, "dataset_meta.json"));
  if (mj) mj >> out.meta;
  return out;
}

void save_dag_dataset(const std::string& dir, const DagSim& sim, const ExperimentConfig& cfg) {
  ensure_dir(dir);
  std::vector<std::string> header;
  for (long j = 0; j < sim.X.cols(); ++j) header.push_back("x" + std::to_string(j));
  CsvWriter w(join_path(dir, "dataset.csv"), header, cfg);
  for (long i = 0; i < sim.X.rows(); ++i) {
    std::vector<double> cells;
    for (long j = 0; j < sim.X.cols(); ++j) cells.push_back(sim.X(i, j));
    w.row_numeric(cells);
  }
  nlohmann::json meta;
  meta["target"] = "dag";
  meta["config_hash"] = cfg.hash();
  meta["version"] = code_version();
  meta["seed"] = cfg.get_long("seed");
  meta["true_model"] = sim.true_model.str();
  meta["adjacency"] = sim.A_true.vec();
  meta["nodes"] = sim.A_true.rows();
  std::ofstream mj(join_path(dir, "dataset_meta.json"));
  mj << meta.dump(2) << "\n";
}

LoadedDag load_dag_dataset(const std::string& dir) {
  const std::string csv = join_path(dir, "dataset.csv");
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("missing dataset: " + csv);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> r;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) r.push_back(std::stod(tok));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("empty dataset: " + csv);
  LoadedDag out;
  out.X = Tensor(static_cast<long>(rows.size()), static_cast<long>(rows[0].size()));
  for (long i = 0; i < out.X.rows(); ++i)
    for (long j = 0; j < out.X.cols(); ++j)
      out.X(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  std::ifstream mj(join_path(dir, "dataset_meta.json"));
  if (mj) mj >> out.meta;
  return out;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const ParamStore& store, const Adam& adam,
                     const ModelSampler& sampler, const CheckpointExtras& extras,
                     const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["version"] = code_version();
  j["config_hash"] = cfg.hash();
  j["t"] = extras.t;
  j["flow_params"] = store.flatten_values();
  std::vector<nlohmann::json> names;
  for (ParamId id : store.all()) {
    names.push_back({{"name", store.name(id)},
                     {"rows", store.value(id).rows()},
                     {"cols", store.value(id).cols()}});
  }
  j["flow_shapes"] = names;
  j["adam"] = {{"t", adam.t()}, {"moments", adam.flatten_moments()}};
  j["sampler"] = sampler.checkpoint();
  j["rng"] = {{"models", extras.rng_models}, {"z", extras.rng_z}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  LoadedCheckpoint out;
  out.flow_params = j.at("flow_params").get<std::vector<double>>();
  out.adam_moments = j.at("adam").at("moments").get<std::vector<double>>();
  out.adam_t = j.at("adam").at("t").get<long>();
  out.sampler = j.at("sampler");
  out.extras.t = j.at("t").get<long>();
  out.extras.rng_models = j.at("rng").at("models").get<std::string>();
  out.extras.rng_z = j.at("rng").at("z").get<std::string>();
  out.raw = std::move(j);
  return out;
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string output_root() {
  const char* env = std::getenv("VTI_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string(".");
}

std::string join_path(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  return (fs::path(a) / b).string();
}

}  // namespace vti
