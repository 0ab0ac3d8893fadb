#pragma once

#include <string>
#include <vector>

#include "vti/optim.hpp"
#include "vti/tape.hpp"
#include "vti/tensor.hpp"

namespace vti {

/// Residual masked autoencoder. Degrees 1..d are assigned to the inputs and
/// propagated so that the output block for dimension i depends only on
/// inputs j < i. Per-dimension output multipliers set how many parameters
/// each dimension emits; optional context is injected additively inside each
/// residual block.
struct MadeConfig {
  int features = 0;
  int hidden = 64;
  int blocks = 2;
  std::vector<int> out_multipliers;  // size == features
  int ctx_dim = 0;
};

class MadeNetwork {
 public:
  MadeNetwork(const MadeConfig& cfg, const std::string& prefix, ParamStore& store, Rng& init);

  ad::Var forward(ad::Tape& tape, ParamStore& store, ad::Var x, ad::Var ctx) const;
  /// Eager evaluation without a tape (sampling loops).
  Tensor forward_value(const ParamStore& store, const Tensor& x, const Tensor& ctx) const;

  int features() const { return cfg_.features; }
  int out_features() const { return out_features_; }
  /// Offset of dimension i's block in the output row.
  int out_offset(int i) const { return out_offsets_[static_cast<size_t>(i)]; }
  int out_multiplier(int i) const { return cfg_.out_multipliers[static_cast<size_t>(i)]; }

  /// Overwrites the final-layer bias (e.g. so an identity-start conditioner
  /// emits the static parameter block).
  void set_final_bias(ParamStore& store, const std::vector<double>& bias) const;

 private:
  MadeConfig cfg_;
  int out_features_ = 0;
  std::vector<int> out_offsets_;
  Tensor mask0_, mask_hidden_, mask_final_;
  ParamId w0_, b0_, wf_, bf_;
  struct Block {
    ParamId w1, b1, w2, b2, wc;
  };
  std::vector<Block> blocks_;
};

}  // namespace vti
