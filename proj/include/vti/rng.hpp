#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace vti {

/// Seeded random stream. Training uses one stream per purpose (model draws,
/// z draws, data generation, parameter init) so swapping one component does
/// not perturb the others.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return unif_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mu, double sd) { return mu + sd * normal_(engine_); }
  /// Uniform integer in [0, n).
  long uniform_int(long n) { return std::uniform_int_distribution<long>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return unif_(engine_) < p; }

  std::mt19937_64& engine() { return engine_; }

  std::string serialize_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void restore_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    normal_.reset();
  }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vti
