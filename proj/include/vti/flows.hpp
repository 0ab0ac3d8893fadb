#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vti/made.hpp"
#include "vti/modelspace.hpp"
#include "vti/optim.hpp"
#include "vti/tape.hpp"

namespace vti {

enum class FlowKind { DiagGaussian, Affine, Spline };

struct CtxEncoderConfig {
  enum class Kind { Identity, Mlp } kind = Kind::Identity;
  int target_width = 0;  // Mlp: widths double (next power of two) up to this
};

struct FlowConfig {
  FlowKind kind = FlowKind::Affine;
  int d_max = 0;
  int n_transforms = 0;  // 0 = composition default (5 affine, 4 spline, 1 diag)
  int blocks = 0;        // 0 = composition default (5 affine, 6 spline)
  int hidden = 64;
  int spline_bins = 8;
  double spline_bound = 5.0;
  bool global_affine = true;  // spline composition only
  bool global_affine_trainable = false;
  int feature_dim = 0;
  CtxEncoderConfig ctx;
  int ctx_hidden = 64;  // hidden width of the DiagGaussian context conditioner

  int transforms_or_default() const;
  int blocks_or_default() const;
};

/// Per-model quantities the flow needs: the coordinate mask, the left-align
/// permutation (actives first, original order preserved within groups), and
/// the raw context features.
struct ModelContext {
  ModelIndex index;
  std::vector<uint8_t> chi;
  int d_m = 0;
  std::vector<int> perm;      // aligned position -> original coordinate
  std::vector<int> inv_perm;  // original coordinate -> aligned position
  std::vector<double> features;
};

ModelContext make_model_context(const ModelIndex& m, std::vector<uint8_t> chi,
                                std::vector<double> features);

struct FlowForward {
  ad::Var theta;          // (batch, d_max) original layout: theta_m active, u elsewhere
  ad::Var logdet_active;  // (batch, 1)
  ad::Var logdet_full;    // (batch, 1)
  ad::Var log_nu_active;  // (batch, 1): log nu_{d_m}(z_m)
};

struct FlowInverse {
  ad::Var z;  // (batch, d_max) original layout
  ad::Var logdet_active;
  ad::Var logdet_full;
};

/// Elementwise standard normal log-density graph: -x^2/2 - log(2*pi)/2.
ad::Var gauss_logpdf(ad::Var x);

/// Single CoSMIC flow: masked autoregressive (or context-only) conditioners,
/// per-coordinate affine/spline transforms gated toward their static point by
/// the model's broadcast mask, bookended by the model's left-align
/// permutation, with model-specific reverse permutations between steps.
class CosmicFlow {
 public:
  CosmicFlow(const FlowConfig& cfg, ParamStore& store, Rng& init);

  /// Sampling direction over a heterogeneous model batch: one conditioner
  /// pass per step, all coordinates in parallel.
  FlowForward forward(ad::Tape& tape, ad::Var z,
                      const std::vector<const ModelContext*>& ms) const;

  /// Likelihood direction; all rows share one model. Coordinates are
  /// recovered sequentially, as for any inverse autoregressive flow.
  FlowInverse inverse(ad::Tape& tape, ad::Var theta_sat, const ModelContext& m) const;

  /// log q~(theta, u | m) on the saturated space (full determinant).
  ad::Var saturated_logq(ad::Tape& tape, ad::Var theta_sat, const ModelContext& m) const;

  /// log q(theta | m) on the active coordinates only. theta_active columns
  /// list the active coordinates in original order, d_m of them.
  ad::Var conditional_logq(ad::Tape& tape, ad::Var theta_active, const ModelContext& m) const;

  const FlowConfig& config() const { return cfg_; }
  ParamStore& store() const { return *store_; }
  int param_block() const { return param_block_; }  // |rho_i| per coordinate

 private:
  struct Step {
    std::unique_ptr<MadeNetwork> made;   // null for context-only conditioner
    ParamId cw1, cb1, cw2, cb2;          // context-only conditioner weights
  };

  ad::Var encode_ctx(ad::Tape& tape, const Tensor& features) const;
  ad::Var conditioner(ad::Tape& tape, const Step& s, ad::Var x, ad::Var ctx) const;

  struct Applied {
    ad::Var out, ld_active, ld_full;
  };
  Applied apply_affine(ad::Tape& tape, ad::Var x, ad::Var rho, const Tensor& c_aligned) const;
  struct AppliedCol {
    ad::Var out, ld;
  };
  AppliedCol spline_col(ad::Tape& tape, ad::Var v, ad::Var raw, const Tensor& c_col,
                        bool inverse) const;
  ad::Var affine_col_inverse(ad::Tape& tape, ad::Var theta_col, ad::Var rho_block,
                             const Tensor& c_col, ad::Var* ld_out) const;

  struct AlignedInverse {
    ad::Var z_aligned, ld_active, ld_full;
  };
  AlignedInverse inverse_aligned(ad::Tape& tape, ad::Var x_aligned, const ModelContext& m) const;

  FlowConfig cfg_;
  ParamStore* store_ = nullptr;
  int ctx_width_ = 0;
  int param_block_ = 0;
  std::vector<Step> steps_;
  std::vector<ParamId> enc_w_, enc_b_;
  ParamId ga_loc_, ga_scale_raw_;  // global affine
  std::vector<double> static_raw_;
  std::vector<double> static_constrained_;
};

double softplus_inv(double y);

}  // namespace vti
