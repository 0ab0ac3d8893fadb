#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vti {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value experiment configuration. Every known key has a default;
/// unknown keys are rejected. Values from a file are overridden by --set
/// pairs, and the hash of the effective configuration is embedded in every
/// output file.
class ExperimentConfig {
 public:
  static ExperimentConfig defaults();
  static ExperimentConfig from_file(const std::string& path,
                                    const std::vector<std::string>& overrides = {});
  static ExperimentConfig from_overrides(const std::vector<std::string>& overrides);

  const std::string& get(const std::string& key) const;
  long get_long(const std::string& key) const;
  int get_int(const std::string& key) const { return static_cast<int>(get_long(key)); }
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& kv);  // "key=value"

  std::string hash() const;  // FNV-1a over the canonical key=value listing
  const std::map<std::string, std::string>& values() const { return values_; }
  std::string describe() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string code_version();

}  // namespace vti
