#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vti/flows.hpp"
#include "vti/optim.hpp"
#include "vti/rng.hpp"
#include "vti/tape.hpp"
#include "vti/targets.hpp"

namespace vti::testutil {

/// Central finite difference of a scalar function of one packed coordinate.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

/// Gradient audit: build() constructs the graph and returns the scalar loss
/// Var; gradients at each leaf are compared against central differences.
inline double grad_audit(std::vector<Tensor>& leaves,
                         const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
                         double h = 1e-5, int max_coords_per_leaf = -1) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (Tensor& t : leaves) vars.push_back(tape.leaf(t));
  ad::Var loss = build(tape, vars);
  tape.backward(loss);
  std::vector<Tensor> grads;
  for (ad::Var v : vars) grads.push_back(tape.grad(v));

  auto eval = [&]() {
    ad::Tape t2;
    std::vector<ad::Var> vs;
    for (Tensor& t : leaves) vs.push_back(t2.leaf(t));
    return build(t2, vs).value()[0];
  };

  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    const long n = leaves[li].size();
    const long limit = max_coords_per_leaf > 0 ? std::min<long>(n, max_coords_per_leaf) : n;
    for (long c = 0; c < limit; ++c) {
      const double orig = leaves[li][c];
      leaves[li][c] = orig + h;
      const double fp = eval();
      leaves[li][c] = orig - h;
      const double fm = eval();
      leaves[li][c] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, rel_err(grads[li][c], fd));
    }
  }
  return worst;
}

/// Toy target: theta | m ~ N(mu_m, sigma_m^2) per active coordinate, bits
/// layout, configurable per-model means/scales. log p(m) uniform.
class GaussianToyTarget : public Target {
 public:
  GaussianToyTarget(int n_bits, std::vector<double> mu, std::vector<double> sd)
      : layout_(n_bits, false), mu_(std::move(mu)), sd_(std::move(sd)) {}

  int d_max() const override { return layout_.d_max(); }
  int feature_dim() const override { return layout_.n_bits(); }
  std::vector<uint8_t> chi(const ModelIndex& m) const override { return layout_.chi(m); }
  std::vector<double> features(const ModelIndex& m) const override {
    std::vector<double> f(m.bits.size());
    for (size_t i = 0; i < m.bits.size(); ++i) f[i] = m.bits[i];
    return f;
  }
  double log_prior_m(const ModelIndex&) const override {
    return -layout_.n_bits() * std::log(2.0);
  }
  ad::Var log_eta(ad::Tape& tape, ad::Var theta_sat,
                  const std::vector<const ModelIndex*>& ms) const override {
    using namespace ad;
    const long batch = theta_sat.rows();
    const int p = layout_.d_max();
    Tensor chim(batch, p), mu(batch, p), inv_var(batch, p), logc(batch, 1);
    for (long r = 0; r < batch; ++r) {
      const std::vector<uint8_t> c = layout_.chi(*ms[static_cast<size_t>(r)]);
      for (int j = 0; j < p; ++j) {
        chim(r, j) = c[static_cast<size_t>(j)];
        mu(r, j) = mu_[static_cast<size_t>(j)];
        inv_var(r, j) = 1.0 / (sd_[static_cast<size_t>(j)] * sd_[static_cast<size_t>(j)]);
        if (c[static_cast<size_t>(j)])
          logc(r, 0) += -std::log(sd_[static_cast<size_t>(j)]) - 0.9189385332046727;
      }
    }
    Var diff = sub(theta_sat, tape.constant(mu));
    Var q = mul_k(mul(mul(square(diff), tape.constant(inv_var)), tape.constant(chim)), -0.5);
    return add(row_sum(q), tape.constant(logc));
  }
  double log_eta_value(const std::vector<double>& theta_active,
                       const ModelIndex& m) const override {
    const std::vector<uint8_t> c = layout_.chi(m);
    double lp = 0.0;
    size_t k = 0;
    for (size_t j = 0; j < c.size(); ++j) {
      if (!c[j]) continue;
      const double z = (theta_active[k++] - mu_[j]) / sd_[j];
      lp += -0.5 * z * z - std::log(sd_[j]) - 0.9189385332046727;
    }
    return lp;
  }
  bool enumerable() const override { return true; }
  std::vector<ModelIndex> enumerate_models() const override { return layout_.enumerate(); }
  ModelIndex sample_prior_model(Rng& rng) const override {
    std::vector<uint8_t> bits(static_cast<size_t>(layout_.n_bits()));
    for (auto& b : bits) b = rng.bernoulli(0.5);
    return ModelIndex::from_bits(std::move(bits));
  }

 private:
  VsLayout layout_;
  std::vector<double> mu_, sd_;
};

}  // namespace vti::testutil
