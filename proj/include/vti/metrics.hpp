#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vti/flows.hpp"
#include "vti/samplers.hpp"
#include "vti/targets.hpp"

namespace vti {

struct OracleConfig {
  std::string method = "auto";  // auto | quadrature | analytic | importance
  int quad_nodes = 64;
  int quad_dim_limit = 3;
  long is_samples = 20000;
  double is_min_ess = 1000.0;
  double defensive_prior_mass = 0.1;
  int threads = 1;
};

struct OracleResult {
  std::vector<ModelIndex> models;
  std::vector<double> log_z;     // per-model log evidence
  std::vector<double> posterior; // pi(m) normalized over the listed models
  std::vector<double> entropy;   // per-model H(pi(theta | m))
  std::string method;
  double quad_err = 0.0;  // |logZ change| under node doubling, max over models
};

/// Gauss-Hermite nodes/weights for weight exp(-x^2) via the Golub-Welsch
/// eigen decomposition of the Jacobi matrix.
void gauss_hermite(int n, std::vector<double>* nodes, std::vector<double>* weights);

/// Mode-centered tensorized Gauss-Hermite quadrature of exp(log_eta) over the
/// active coordinates of one model. Also returns E_pi[log eta] for entropy.
struct QuadResult {
  double log_z;
  double e_log_eta;
  double e_f = 0.0;  // posterior expectation of the supplied functional
};
QuadResult quadrature_log_evidence(const Target& target, const ModelIndex& m, int nodes);

/// Same grid, additionally integrating a batched functional of theta under
/// the normalized posterior: f receives the (R, d_m) grid and returns R
/// values. Used for per-model cross-entropies H(pi(.|m), q(.|m)).
QuadResult quadrature_posterior_expectation(
    const Target& target, const ModelIndex& m, int nodes,
    const std::function<std::vector<double>(const Tensor&)>& f);

/// Closed-form Gaussian evidence for the alpha = 0 robust-VS sub-case.
double analytic_log_evidence(const RobustVsTarget& target, const ModelIndex& m);

/// Self-normalized importance sampling with the trained flow conditional as
/// proposal, defensively mixed with the prior. Throws if ESS < is_min_ess.
struct IsResult {
  double log_z;
  double ess;
};
IsResult importance_log_evidence(const Target& target, const CosmicFlow& flow,
                                 const ModelContext& ctx, const OracleConfig& cfg, Rng& rng);

OracleResult oracle_model_posterior(const Target& target, const std::vector<ModelIndex>& models,
                                    const OracleConfig& cfg, const CosmicFlow* flow = nullptr,
                                    Rng* rng = nullptr);

// ---------------------------------------------------------------------------

struct NllResult {
  double nll = 0.0;  // mean of -log q(m_i, theta_i)
  double se = 0.0;   // Monte Carlo standard error of the mean
  long n = 0;
  long n_unsupported = 0;  // samples whose model has zero q-mass
  std::vector<double> per_sample;
  /// model string -> (mean conditional cross-entropy, count); models with
  /// fewer than min_per_model samples are omitted.
  std::map<std::string, std::pair<double, long>> per_model_ce;
};

/// Cross-entropy H(pi, q) over baseline samples (rows of theta are saturated
/// coordinate vectors; flow densities are evaluated on active coordinates).
NllResult cross_entropy_nll(const std::vector<ModelIndex>& models, const Tensor& thetas,
                            const CosmicFlow& flow, const ModelSampler& sampler,
                            const Target& target, long min_per_model = 50);

// ---------------------------------------------------------------------------

struct DagMetrics {
  double f1 = 0.0;
  double shd = 0.0;
  double brier = 0.0;
  double auroc = 0.5;
  bool auroc_defined = true;
};

/// Structure scores for a predicted edge-probability matrix against the true
/// adjacency. F1/SHD threshold at `threshold`; Brier and AUROC use the raw
/// probabilities over the off-diagonal directed slots.
DagMetrics dag_metrics(const Tensor& A_true, const Tensor& edge_probs, double threshold = 0.5);

/// Structural Hamming distance between two 0/1 adjacency matrices
/// (insertions, deletions, reversals).
double shd(const Tensor& A, const Tensor& B);

// ---------------------------------------------------------------------------

struct ScatterRow {
  std::string model;
  double oracle_p = 0.0;
  double q_p = 0.0;
  bool is_null = false;
  bool is_dgp = false;
};

std::vector<ScatterRow> model_prob_scatter(const std::vector<ModelIndex>& models,
                                           const std::vector<double>& oracle_p,
                                           const std::vector<double>& q_p,
                                           const ModelIndex* dgp_model);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);
double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace vti
