#include "vti/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vti {

ParamId ParamStore::create(const std::string& name, Tensor init, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  Entry e;
  e.name = name;
  e.grad = Tensor(init.rows(), init.cols());
  e.value = std::move(init);
  e.trainable = trainable;
  entries_.push_back(std::move(e));
  int idx = static_cast<int>(entries_.size()) - 1;
  index_[name] = idx;
  return ParamId{idx};
}

ParamId ParamStore::create_uniform(const std::string& name, long rows, long cols, double bound,
                                   Rng& rng) {
  Tensor t(rows, cols);
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return create(name, std::move(t));
}

ad::Var ParamStore::use(ad::Tape& tape, ParamId id) {
  Entry& e = entries_[id.idx];
  if (e.tape_ptr == &tape && e.tape_epoch == tape.epoch() && e.leaf_id >= 0)
    return ad::Var{&tape, e.leaf_id};
  ad::Var v = tape.leaf(e.value);
  e.tape_ptr = &tape;
  e.tape_epoch = tape.epoch();
  e.leaf_id = v.id;
  return v;
}

void ParamStore::collect_grads(const ad::Tape& tape) {
  for (Entry& e : entries_) {
    if (e.tape_ptr != &tape || e.tape_epoch != tape.epoch() || e.leaf_id < 0) continue;
    const Tensor& g = tape.node(e.leaf_id).grad;
    if (g.empty()) continue;
    for (long i = 0; i < g.size(); ++i) e.grad[i] += g[i];
  }
}

void ParamStore::zero_grads() {
  for (Entry& e : entries_) e.grad.fill(0.0);
}

ParamId ParamStore::by_name(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return ParamId{it->second};
}

std::vector<ParamId> ParamStore::all() const {
  std::vector<ParamId> out;
  out.reserve(entries_.size());
  for (int i = 0; i < static_cast<int>(entries_.size()); ++i) out.push_back(ParamId{i});
  return out;
}

std::vector<double> ParamStore::flatten_values() const {
  std::vector<double> out;
  for (const Entry& e : entries_) out.insert(out.end(), e.value.vec().begin(), e.value.vec().end());
  return out;
}

void ParamStore::unflatten_values(const std::vector<double>& flat) {
  size_t pos = 0;
  for (Entry& e : entries_) {
    if (pos + e.value.vec().size() > flat.size())
      throw std::invalid_argument("ParamStore: flat vector too short");
    std::copy(flat.begin() + pos, flat.begin() + pos + e.value.vec().size(), e.value.vec().begin());
    pos += e.value.vec().size();
  }
  if (pos != flat.size()) throw std::invalid_argument("ParamStore: flat vector size mismatch");
}

void Adam::bind(const ParamStore& store) {
  if (m_.size() == store.count()) return;
  m_.resize(store.count());
  v_.resize(store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    const Tensor& val = store.value(ParamId{static_cast<int>(i)});
    if (m_[i].empty()) m_[i] = Tensor(val.rows(), val.cols());
    if (v_[i].empty()) v_[i] = Tensor(val.rows(), val.cols());
  }
}

void Adam::step(ParamStore& store) {
  bind(store);
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < store.count(); ++i) {
    ParamId id{static_cast<int>(i)};
    if (!store.trainable(id)) continue;
    Tensor& val = store.value(id);
    const Tensor& g = store.grad(id);
    if (!g.same_shape(val)) throw std::invalid_argument("adam: gradient shape mismatch");
    Tensor &m = m_[i], &v = v_[i];
    for (long j = 0; j < val.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<double> Adam::flatten_moments() const {
  std::vector<double> out;
  for (const Tensor& t : m_) out.insert(out.end(), t.vec().begin(), t.vec().end());
  for (const Tensor& t : v_) out.insert(out.end(), t.vec().begin(), t.vec().end());
  return out;
}

void Adam::restore(long t, const std::vector<double>& flat) {
  t_ = t;
  size_t pos = 0;
  for (Tensor& m : m_) {
    std::copy(flat.begin() + pos, flat.begin() + pos + m.vec().size(), m.vec().begin());
    pos += m.vec().size();
  }
  for (Tensor& v : v_) {
    std::copy(flat.begin() + pos, flat.begin() + pos + v.vec().size(), v.vec().begin());
    pos += v.vec().size();
  }
  if (pos != flat.size()) throw std::invalid_argument("adam: moment vector size mismatch");
}

double clip_by_global_norm(std::vector<Tensor*> grads, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_by_global_norm: max_norm must be > 0");
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (long i = 0; i < g->size(); ++i) sq += (*g)[i] * (*g)[i];
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* g : grads)
      for (long i = 0; i < g->size(); ++i) (*g)[i] *= s;
  }
  return norm;
}

double clip_by_global_norm(ParamStore& store, double max_norm) {
  std::vector<Tensor*> gs;
  for (ParamId id : store.all())
    if (store.trainable(id)) gs.push_back(&store.grad(id));
  return clip_by_global_norm(std::move(gs), max_norm);
}

}  // namespace vti
