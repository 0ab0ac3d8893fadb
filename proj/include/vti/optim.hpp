#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vti/rng.hpp"
#include "vti/tape.hpp"
#include "vti/tensor.hpp"

namespace vti {

struct ParamId {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Named trainable tensors with gradient buffers. Placing a parameter on a
/// tape yields one shared leaf per tape epoch, so repeated use inside a
/// single forward pass accumulates into the same gradient.
class ParamStore {
 public:
  ParamId create(const std::string& name, Tensor init, bool trainable = true);
  ParamId create_uniform(const std::string& name, long rows, long cols, double bound, Rng& rng);

  ad::Var use(ad::Tape& tape, ParamId id);

  /// Copies leaf gradients from the tape back into the store (additive).
  void collect_grads(const ad::Tape& tape);
  void zero_grads();

  Tensor& value(ParamId id) { return entries_[id.idx].value; }
  const Tensor& value(ParamId id) const { return entries_[id.idx].value; }
  Tensor& grad(ParamId id) { return entries_[id.idx].grad; }
  const std::string& name(ParamId id) const { return entries_[id.idx].name; }
  bool trainable(ParamId id) const { return entries_[id.idx].trainable; }
  void set_trainable(ParamId id, bool t) { entries_[id.idx].trainable = t; }

  size_t count() const { return entries_.size(); }
  ParamId by_name(const std::string& name) const;
  std::vector<ParamId> all() const;

  /// Flattened copies in creation order, for checkpoints and finite
  /// differences. Deterministic.
  std::vector<double> flatten_values() const;
  void unflatten_values(const std::vector<double>& flat);

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
    uint64_t tape_epoch = ~uint64_t{0};
    int leaf_id = -1;
    const ad::Tape* tape_ptr = nullptr;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Adam with bias-corrected moments; one shared step counter.
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// params <- params - lr * m_hat / (sqrt(v_hat) + eps) over all trainable
  /// entries, using the store's current gradients.
  void step(ParamStore& store);

  long t() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  // Checkpoint access.
  void bind(const ParamStore& store);
  std::vector<double> flatten_moments() const;
  void restore(long t, const std::vector<double>& flat);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;  // indexed like the store entries
};

/// Scales all gradients in the store by max_norm/||g||2 when the joint norm
/// exceeds max_norm. Returns the pre-clip norm.
double clip_by_global_norm(ParamStore& store, double max_norm);
double clip_by_global_norm(std::vector<Tensor*> grads, double max_norm);

}  // namespace vti
