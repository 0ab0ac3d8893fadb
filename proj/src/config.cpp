#include "vti/config.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace vti {

namespace {

const std::map<std::string, std::string>& registry() {
  static const std::map<std::string, std::string> kDefaults = {
      {"target", "robustvs"},
      // robust variable selection likelihood + DGP
      {"robustvs.predictors", "7"},
      {"robustvs.intercept", "true"},
      {"robustvs.alpha", "0.1"},
      {"robustvs.sigma1", "1"},
      {"robustvs.sigma2", "10"},
      {"robustvs.sigma_beta", "1.5"},
      {"robustvs.misspec", "mid"},
      {"robustvs.n", "50"},
      {"robustvs.incl_prob", "0.4"},
      // DAG target + DGP
      {"dag.nodes", "10"},
      {"dag.hidden", "10"},
      {"dag.sigma", "1"},
      {"dag.rho_edge", "0.5"},
      {"dag.bias", "false"},
      {"dag.lambda_s", "0"},
      {"dag.sigma_w", "1"},
      {"dag.n", "1024"},
      // flow
      {"flow", "spline"},
      {"flow.transforms", "0"},
      {"flow.blocks", "0"},
      {"flow.hidden", "32"},
      {"flow.spline_bins", "8"},
      {"flow.spline_bound", "5"},
      {"flow.global_affine", "true"},
      {"flow.global_affine_trainable", "false"},
      {"flow.ctx", "identity"},
      {"flow.ctx_width", "4096"},
      {"flow.ctx_hidden", "64"},
      // sampler
      {"sampler", "categorical"},
      {"sampler.hidden", "64"},
      {"sampler.blocks", "2"},
      {"sampler.beta", "1.0"},
      {"sampler.noise", "1.0"},
      {"sampler.signal", "1.0"},
      {"sampler.lambda_m", "0"},
      {"sampler.diagonal", "auto"},
      {"sampler.ig_eps", "0.05"},
      {"sampler.cv_beta", "0.9"},
      // trainer
      {"train.iters", "30000"},
      {"train.batch", "128"},
      {"train.lr_phi", "1e-3"},
      {"train.lr_psi", "1e-2"},
      {"train.clip", "10"},
      {"train.log_every", "100"},
      // RJMCMC
      {"rj.steps", "1000000"},
      {"rj.burnin", "100000"},
      {"rj.thin", "10"},
      {"rj.p_jump", "0.5"},
      {"rj.scale", "0.25"},
      // oracle + evaluation
      {"oracle.method", "auto"},
      {"oracle.nodes", "64"},
      {"oracle.dim_limit", "3"},
      {"oracle.is_samples", "20000"},
      {"oracle.min_ess", "1000"},
      {"eval.min_per_model", "50"},
      {"eval.samples", "20000"},
      // sweep
      {"sweep.cards", "9,10,11,12"},
      // misc
      {"seed", "1"},
      {"data", ""},
      {"out", "out"},
      {"threads", "1"},
  };
  return kDefaults;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.values_ = registry();
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!registry().count(key)) throw ConfigError("unknown configuration key: " + key);
  values_[key] = value;
}

void ExperimentConfig::apply_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value, got: " + kv);
  set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path,
                                             const std::vector<std::string>& overrides) {
  ExperimentConfig c = defaults();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  for (const std::string& kv : overrides) c.apply_override(kv);
  return c;
}

ExperimentConfig ExperimentConfig::from_overrides(const std::vector<std::string>& overrides) {
  ExperimentConfig c = defaults();
  for (const std::string& kv : overrides) c.apply_override(kv);
  return c;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key: " + key);
  return it->second;
}

long ExperimentConfig::get_long(const std::string& key) const {
  try {
    return std::stol(get(key));
  } catch (const std::exception&) {
    throw ConfigError("key " + key + " is not an integer: " + get(key));
  }
}

double ExperimentConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::exception&) {
    throw ConfigError("key " + key + " is not a number: " + get(key));
  }
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key " + key + " is not a boolean: " + v);
}

std::string ExperimentConfig::hash() const {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [k, v] : values_) {
    // filesystem locations and execution knobs do not change the experiment
    if (k == "out" || k == "data" || k == "threads") continue;
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string ExperimentConfig::describe() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::string code_version() { return "vti 0.1.0"; }

}  // namespace vti
