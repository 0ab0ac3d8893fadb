#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vti/modelspace.hpp"
#include "vti/rng.hpp"
#include "vti/tape.hpp"
#include "vti/tensor.hpp"

namespace vti {

/// Unnormalized conditional target: log eta(theta | m) plus the model prior
/// log p(m), the coordinate mask chi(m), and the raw context features.
class Target {
 public:
  virtual ~Target() = default;
  virtual int d_max() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::vector<uint8_t> chi(const ModelIndex& m) const = 0;
  virtual int d_m(const ModelIndex& m) const;
  virtual std::vector<double> features(const ModelIndex& m) const = 0;
  virtual double log_prior_m(const ModelIndex& m) const = 0;

  /// Batched log eta over saturated rows (original coordinate layout).
  /// Inactive coordinates must not affect the value or receive gradient.
  virtual ad::Var log_eta(ad::Tape& tape, ad::Var theta_sat,
                          const std::vector<const ModelIndex*>& ms) const = 0;

  /// Plain evaluation at the active coordinates of one model.
  virtual double log_eta_value(const std::vector<double>& theta_active,
                               const ModelIndex& m) const = 0;

  virtual bool enumerable() const { return false; }
  virtual std::vector<ModelIndex> enumerate_models() const { return {}; }
  virtual ModelIndex sample_prior_model(Rng& rng) const = 0;
};

// ---------------------------------------------------------------------------
// Robust variable selection: mixture-of-Gaussians noise linear regression.

struct RobustVsConfig {
  int n_predictors = 7;
  bool intercept = true;
  double alpha = 0.1;
  double sigma1 = 1.0;
  double sigma2 = 10.0;
  double sigma_beta = 1.5;
};

class RobustVsTarget : public Target {
 public:
  RobustVsTarget(RobustVsConfig cfg, Tensor X, std::vector<double> y);

  int d_max() const override { return layout_.d_max(); }
  int feature_dim() const override { return layout_.n_bits(); }
  std::vector<uint8_t> chi(const ModelIndex& m) const override { return layout_.chi(m); }
  std::vector<double> features(const ModelIndex& m) const override;
  double log_prior_m(const ModelIndex& m) const override;
  ad::Var log_eta(ad::Tape& tape, ad::Var theta_sat,
                  const std::vector<const ModelIndex*>& ms) const override;
  double log_eta_value(const std::vector<double>& theta_active, const ModelIndex& m) const override;
  bool enumerable() const override { return layout_.n_bits() <= 20; }
  std::vector<ModelIndex> enumerate_models() const override { return layout_.enumerate(); }
  ModelIndex sample_prior_model(Rng& rng) const override;

  // Plain paths for the RJMCMC baseline and oracles.
  double loglik_masked(const std::vector<double>& beta_full,
                       const std::vector<uint8_t>& chi_mask) const;
  double log_prior_beta_coord(double b) const;

  const RobustVsConfig& config() const { return cfg_; }
  const VsLayout& layout() const { return layout_; }
  const Tensor& X() const { return X_; }
  const std::vector<double>& y() const { return y_; }

 private:
  RobustVsConfig cfg_;
  VsLayout layout_;
  Tensor X_;  // (n, d_max), first column is the intercept when configured
  std::vector<double> y_;
};

struct RobustVsDgpConfig {
  int n = 50;
  int n_predictors = 7;
  bool intercept = true;
  std::string misspec = "mid";  // none | mid | high
  double incl_prob = 0.4;
  double alpha = 0.1;
  double beta1 = 0.5;

  double dgp_sigma1() const;
  double dgp_sigma2() const;
  double beta2() const;
  bool correlated() const { return misspec == "high"; }
};

struct RobustVsSim {
  Tensor X;
  std::vector<double> y;
  ModelIndex true_model;
  std::vector<double> true_beta;  // full coordinate vector (masked entries zero)
  double beta_value = 0.0;
};

RobustVsSim robustvs_simulate(const RobustVsDgpConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Non-linear DAG discovery: per-node single-hidden-layer MLP structural
// equation model with homoscedastic Gaussian noise.

struct DagTargetConfig {
  int nodes = 10;
  int hidden = 10;
  double sigma = 1.0;
  double lambda_s = 0.0;
  bool bias = false;
  double sigma_w = 1.0;
};

class DagTarget : public Target {
 public:
  DagTarget(DagTargetConfig cfg, Tensor X);

  int d_max() const override { return layout_.d_max(); }
  int feature_dim() const override { return cfg_.nodes * cfg_.nodes; }
  std::vector<uint8_t> chi(const ModelIndex& m) const override { return layout_.chi(m); }
  std::vector<double> features(const ModelIndex& m) const override;  // flattened P^T U P
  double log_prior_m(const ModelIndex& m) const override;
  ad::Var log_eta(ad::Tape& tape, ad::Var theta_sat,
                  const std::vector<const ModelIndex*>& ms) const override;
  double log_eta_value(const std::vector<double>& theta_active, const ModelIndex& m) const override;
  bool enumerable() const override { return cfg_.nodes <= 4; }
  std::vector<ModelIndex> enumerate_models() const override { return layout_.enumerate(); }
  ModelIndex sample_prior_model(Rng& rng) const override;

  const DagTargetConfig& config() const { return cfg_; }
  const DagLayout& layout() const { return layout_; }
  const Tensor& X() const { return X_; }

 private:
  DagTargetConfig cfg_;
  DagLayout layout_;
  Tensor X_;  // (n, N) columns in canonical node order
};

struct DagDgpConfig {
  int nodes = 10;
  int hidden = 10;
  double sigma = 1.0;
  double rho_edge = 0.5;
  bool bias = false;
  int n = 1024;
};

struct DagSim {
  Tensor X;
  Tensor A_true;
  ModelIndex true_model;
};

DagSim dag_simulate(const DagDgpConfig& cfg, Rng& rng);

/// Loads a nodes-column CSV (no model metadata) and standardizes each column.
Tensor load_standardized_csv(const std::string& path, int expect_cols);

}  // namespace vti
