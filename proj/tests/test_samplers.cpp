#include <doctest.h>

#include <cmath>

#include "vti/samplers.hpp"

using namespace vti;

namespace {

std::vector<ModelIndex> bit_models(int n_bits) {
  std::vector<ModelIndex> out;
  for (uint64_t v = 0; v < (uint64_t{1} << n_bits); ++v)
    out.push_back(ModelIndex::from_int(v, n_bits));
  return out;
}

}  // namespace

TEST_CASE("categorical: degenerate logits always return the mass point") {
  CategoricalSampler s(bit_models(3));
  Tensor psi(1, 8);
  for (long i = 1; i < 8; ++i) psi[i] = -1e30;
  s.set_logits(psi);
  Rng rng(1);
  for (const ModelIndex& m : s.sample(200, rng)) REQUIRE(m.canonical_int() == 0);
}

TEST_CASE("categorical: uniform logits give binomially-concentrated frequencies") {
  CategoricalSampler s(bit_models(3));
  Rng rng(2);
  const int n = 100000;
  std::vector<long> counts(8, 0);
  for (const ModelIndex& m : s.sample(n, rng)) ++counts[m.canonical_int()];
  const double p = 1.0 / 8.0;
  const double tol = 3.0 * std::sqrt(p * (1 - p) / n);
  for (long c : counts) CHECK(std::abs(static_cast<double>(c) / n - p) < tol);
}

TEST_CASE("categorical: log mass and entropy closed forms") {
  CategoricalSampler s(bit_models(7));
  const ModelIndex m = ModelIndex::from_int(5, 7);
  CHECK(s.log_mass(m) == doctest::Approx(std::log(1.0 / 128.0)).epsilon(1e-12));
  CHECK(s.entropy(nullptr, 0) == doctest::Approx(std::log(128.0)).epsilon(1e-12));
  // outside support: zero mass by contract
  CHECK(s.log_mass(ModelIndex::from_int(2, 5)) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("categorical SFE: baseline cancellation and the score identity") {
  CategoricalSampler s(bit_models(2));
  Tensor psi(1, 4);
  psi[0] = 0.3;
  psi[1] = -0.4;
  psi[2] = 0.9;
  psi[3] = 0.0;
  s.set_logits(psi);

  SUBCASE("identical per-sample factors minus their value vanish exactly") {
    const Tensor g = s.sfe_gradient({0, 2, 1, 3}, {0.0, 0.0, 0.0, 0.0});
    for (long i = 0; i < 4; ++i) CHECK(g[i] == 0.0);
  }

  SUBCASE("the expected score is zero") {
    Rng rng(3);
    const int n = 100000;
    std::vector<double> acc(4, 0.0);
    const std::vector<ModelIndex> draws = s.sample(n, rng);
    std::vector<double> probs = s.probs();
    for (const ModelIndex& m : draws) {
      const int idx = s.index_of(m);
      for (int k = 0; k < 4; ++k) acc[static_cast<size_t>(k)] += (k == idx ? 1.0 : 0.0) - probs[static_cast<size_t>(k)];
    }
    for (int k = 0; k < 4; ++k) {
      const double se = std::sqrt(probs[static_cast<size_t>(k)] / n) + 1e-9;
      CHECK(std::abs(acc[static_cast<size_t>(k)] / n) < 5.0 * se);
    }
  }
}

TEST_CASE("categorical SFE: sample mean matches the enumerated gradient") {
  // small version of the unbiasedness audit: M=4, known per-model losses
  CategoricalSampler s(bit_models(2));
  Tensor psi(1, 4);
  psi[0] = 0.2;
  psi[1] = -0.1;
  psi[2] = 0.5;
  psi[3] = -0.7;
  s.set_logits(psi);
  const std::vector<double> ell{1.3, -0.2, 0.7, 2.1};
  const std::vector<double> log_p(4, std::log(0.25));

  // enumerated gradient of E_q[ell - log p + log q]
  std::vector<double> probs = s.probs();
  std::vector<double> f(4), exact(4, 0.0);
  for (int k = 0; k < 4; ++k) f[static_cast<size_t>(k)] = ell[static_cast<size_t>(k)] - log_p[static_cast<size_t>(k)] + s.log_mass(s.models()[static_cast<size_t>(k)]);
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) {
      const double dlogq = (j == k ? 1.0 : 0.0) - probs[static_cast<size_t>(k)];
      // d q_j / d psi_k * f_j summed, plus E[d log q] term which integrates to zero
      exact[static_cast<size_t>(k)] += probs[static_cast<size_t>(j)] * f[static_cast<size_t>(j)] *
                                       ((j == k ? 1.0 : 0.0) - probs[static_cast<size_t>(k)]);
      (void)dlogq;
    }
  }

  Rng rng(4);
  const int reps = 20000;
  std::vector<double> mean(4, 0.0), sq(4, 0.0);
  for (int r = 0; r < reps; ++r) {
    const std::vector<ModelIndex> batch = s.sample(2, rng);
    std::vector<int> idx;
    std::vector<double> g;
    for (const ModelIndex& m : batch) {
      const int k = s.index_of(m);
      idx.push_back(k);
      g.push_back(f[static_cast<size_t>(k)]);  // zero baseline
    }
    const Tensor grad = s.sfe_gradient(idx, g);
    for (int k = 0; k < 4; ++k) {
      mean[static_cast<size_t>(k)] += grad[k];
      sq[static_cast<size_t>(k)] += grad[k] * grad[k];
    }
  }
  for (int k = 0; k < 4; ++k) {
    mean[static_cast<size_t>(k)] /= reps;
    const double var = sq[static_cast<size_t>(k)] / reps - mean[static_cast<size_t>(k)] * mean[static_cast<size_t>(k)];
    const double se = std::sqrt(var / reps) + 1e-12;
    REQUIRE(std::abs(mean[static_cast<size_t>(k)] - exact[static_cast<size_t>(k)]) < 4.0 * se);
  }
}

TEST_CASE("control variate: bias correction, fixed point, convergence") {
  ControlVariate cv;
  CHECK(cv.baseline() == 0.0);
  cv.update(5.0);
  CHECK(cv.mu_tilde == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cv.baseline() == doctest::Approx(5.0).epsilon(1e-12));

  ControlVariate c2;
  for (int t = 0; t < 50; ++t) {
    c2.update(3.25);
    CHECK(c2.baseline() == doctest::Approx(3.25).epsilon(1e-9));
  }

  ControlVariate c3;
  Rng rng(5);
  double last = 0.0;
  for (int t = 0; t < 500; ++t) {
    c3.update(2.0 + rng.normal());
    last = c3.baseline();
  }
  CHECK(std::abs(last - 2.0) < 0.35);
}

TEST_CASE("information-gain limiter") {
  IgLimiterConfig cfg;
  cfg.eps = 0.01;

  SUBCASE("zero gradient: accepted untouched with zero entropy change") {
    const IgResult r = ig_limited_step(0.5, 1.0, [](double) { return 1.0; }, cfg);
    CHECK(r.accepted);
    CHECK(r.alpha == 0.5);
    CHECK(r.halvings == 0);
  }

  SUBCASE("large categorical step is halved until the bound holds") {
    Tensor psi(1, 2);  // uniform: H = log 2
    const Tensor grad = Tensor::row({10.0, -10.0});
    const double h0 = CategoricalSampler::entropy_of_logits(psi);
    auto entropy_at = [&](double alpha) {
      Tensor cand = psi;
      for (long i = 0; i < 2; ++i) cand[i] -= alpha * grad[i];
      return CategoricalSampler::entropy_of_logits(cand);
    };
    const IgResult r = ig_limited_step(1.0, h0, entropy_at, cfg);
    REQUIRE(r.accepted);
    CHECK(r.halvings >= 1);
    CHECK(std::abs(h0 - entropy_at(r.alpha)) <= 0.01);
  }

  SUBCASE("an impossible bound rejects and zeroes the step") {
    const IgResult r = ig_limited_step(1.0, 0.0, [](double) { return 5.0; }, cfg);
    CHECK_FALSE(r.accepted);
    CHECK(r.alpha == 0.0);
  }
}

TEST_CASE("made+ sampler: zero weights give fair bits; sampling agrees with scoring") {
  MadePlusConfig cfg;
  cfg.hidden = 24;
  cfg.blocks = 2;
  MadePlusSampler s(vs_slot_codec(5), cfg, 7);
  for (ParamId id : s.params().all()) s.params().value(id).fill(0.0);

  Rng rng(6);
  const int n = 50000;
  std::vector<double> lq;
  const std::vector<ModelIndex> draws = s.sample_with_logq(n, rng, &lq);
  std::vector<double> bit_mean(5, 0.0);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < 5; ++b) bit_mean[static_cast<size_t>(b)] += draws[static_cast<size_t>(i)].bits[static_cast<size_t>(b)];
  for (double m : bit_mean) CHECK(std::abs(m / n - 0.5) < 0.01);
  for (int i = 0; i < 200; ++i)
    REQUIRE(std::abs(lq[static_cast<size_t>(i)] - s.log_mass(draws[static_cast<size_t>(i)])) <= 1e-12);
}

TEST_CASE("made+ sampler: exhaustive normalization over 2^7 models") {
  MadePlusConfig cfg;
  cfg.hidden = 32;
  cfg.blocks = 2;
  MadePlusSampler s(vs_slot_codec(7), cfg, 8);
  Rng rng(9);
  for (ParamId id : s.params().all()) {
    Tensor& v = s.params().value(id);
    for (long i = 0; i < v.size(); ++i) v[i] += 0.3 * rng.uniform(-1, 1);
  }
  double total = 0.0;
  for (uint64_t v = 0; v < 128; ++v) total += std::exp(s.log_mass(ModelIndex::from_int(v, 7)));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("made+ sampler over DAG slots: codes always in range, normalization") {
  MadePlusConfig cfg;
  cfg.hidden = 32;
  cfg.blocks = 2;
  const int N = 3;
  MadePlusSampler s(dag_slot_codec(N), cfg, 10);
  Rng rng(11);
  for (ParamId id : s.params().all()) {
    Tensor& v = s.params().value(id);
    for (long i = 0; i < v.size(); ++i) v[i] += 0.4 * rng.uniform(-1, 1);
  }
  for (const ModelIndex& m : s.sample(2000, rng)) {
    REQUIRE(m.lehmer.size() == 2);
    for (size_t i = 0; i < m.lehmer.size(); ++i) {
      REQUIRE(m.lehmer[i] >= 0);
      REQUIRE(m.lehmer[i] <= N - 1 - static_cast<int>(i));
    }
  }
  // full normalization over all (P, U) pairs
  DagLayout layout(N, 1, false);
  double total = 0.0;
  for (const ModelIndex& m : layout.enumerate()) total += std::exp(s.log_mass(m));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("made+ sampler: importance-weighted entropy at unchanged parameters") {
  MadePlusConfig cfg;
  cfg.hidden = 16;
  cfg.blocks = 1;
  MadePlusSampler s(vs_slot_codec(4), cfg, 12);
  Rng rng(13);
  for (ParamId id : s.params().all()) {
    Tensor& v = s.params().value(id);
    for (long i = 0; i < v.size(); ++i) v[i] += 0.5 * rng.uniform(-1, 1);
  }
  std::vector<double> lq;
  const std::vector<ModelIndex> held = s.sample_with_logq(64, rng, &lq);
  std::vector<std::vector<int>> slots;
  for (const ModelIndex& m : held) {
    std::vector<int> sv(m.bits.size());
    for (size_t i = 0; i < m.bits.size(); ++i) sv[i] = m.bits[i];
    slots.push_back(sv);
  }
  double plain = 0.0;
  for (double v : lq) plain -= v;
  plain /= 64.0;
  CHECK(s.importance_entropy(slots, lq) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("gp surrogate: single-observation conjugate update") {
  for (bool diag : {false, true}) {
    GpSurrogateConfig cfg;
    cfg.diagonal = diag;
    cfg.noise_var = 1.0;
    cfg.signal_var = 1.0;
    cfg.lambda_m = 1e-9;  // effectively independent models in exact mode
    std::vector<ModelIndex> models = bit_models(3);
    std::vector<double> lp(models.size(), -3 * std::log(2.0));
    GpSurrogateSampler s(models, lp, cfg);
    s.gp_update({2}, {1.8});
    CHECK(s.mean()[2] == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(s.variance()[2] == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("gp surrogate: recursive updates match a one-shot batch solve") {
  GpSurrogateConfig cfg;
  cfg.noise_var = 0.7;
  cfg.signal_var = 1.3;
  cfg.lambda_m = 1.1;
  std::vector<ModelIndex> models = bit_models(3);
  std::vector<double> lp(models.size(), -3 * std::log(2.0));
  GpSurrogateSampler rec(models, lp, cfg);

  Rng rng(14);
  std::vector<int> all_idx;
  std::vector<double> all_y;
  for (int b = 0; b < 3; ++b) {
    std::vector<int> idx;
    std::vector<double> y;
    for (int i = 0; i < 4; ++i) {
      idx.push_back(static_cast<int>(rng.uniform_int(8)));
      y.push_back(rng.normal());
    }
    rec.gp_update(idx, y);
    all_idx.insert(all_idx.end(), idx.begin(), idx.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
  }
  GpSurrogateSampler oneshot(models, lp, cfg);
  oneshot.gp_update(all_idx, all_y);
  for (int m = 0; m < 8; ++m) {
    REQUIRE(std::abs(rec.mean()[static_cast<size_t>(m)] - oneshot.mean()[static_cast<size_t>(m)]) <= 1e-8);
    REQUIRE(std::abs(rec.variance()[static_cast<size_t>(m)] - oneshot.variance()[static_cast<size_t>(m)]) <= 1e-8);
  }
}

TEST_CASE("gp surrogate: variance never increases at observed models") {
  for (bool diag : {false, true}) {
    GpSurrogateConfig cfg;
    cfg.diagonal = diag;
    std::vector<ModelIndex> models = bit_models(3);
    std::vector<double> lp(models.size(), -3 * std::log(2.0));
    GpSurrogateSampler s(models, lp, cfg);
    Rng rng(15);
    std::vector<double> prev = s.variance();
    for (int t = 0; t < 50; ++t) {
      const int idx = static_cast<int>(rng.uniform_int(8));
      s.gp_update({idx}, {rng.normal()});
      const std::vector<double> cur = s.variance();
      REQUIRE(cur[static_cast<size_t>(idx)] <= prev[static_cast<size_t>(idx)] + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("ucb weights") {
  std::vector<ModelIndex> m2 = bit_models(1);
  std::vector<double> lp2(2, -std::log(2.0));

  SUBCASE("zero mean, beta 0, uniform prior: uniform weights") {
    GpSurrogateConfig cfg;
    cfg.beta = 0.0;
    GpSurrogateSampler s(m2, lp2, cfg);
    const std::vector<double> w = s.ucb_weights();
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("softmax arithmetic: mean (log 2, 0) gives (2/3, 1/3)") {
    GpSurrogateConfig cfg;
    cfg.beta = 0.0;
    cfg.diagonal = true;
    cfg.noise_var = 1e-12;  // pin the means with two near-noiseless observations
    GpSurrogateSampler s(m2, lp2, cfg);
    s.gp_update({0, 1}, {std::log(2.0), 0.0});
    const std::vector<double> w = s.ucb_weights();
    CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }

  SUBCASE("weights normalize for random states") {
    Rng rng(16);
    GpSurrogateConfig cfg;
    cfg.beta = 1.7;
    std::vector<ModelIndex> models = bit_models(4);
    std::vector<double> lp(models.size(), -4 * std::log(2.0));
    GpSurrogateSampler s(models, lp, cfg);
    for (int t = 0; t < 10; ++t) {
      s.gp_update({static_cast<int>(rng.uniform_int(16))}, {rng.normal(0, 3)});
      double total = 0.0;
      for (double w : s.ucb_weights()) total += w;
      REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("surrogate upweights models with smaller per-sample loss") {
  std::vector<ModelIndex> models = bit_models(2);
  std::vector<double> lp(models.size(), -2 * std::log(2.0));
  GpSurrogateConfig cfg;
  cfg.beta = 0.0;
  cfg.diagonal = true;
  GpSurrogateSampler s(models, lp, cfg);
  SamplerUpdate up;
  ModelIndex m0 = models[0], m1 = models[1];
  up.models = {&m0, &m1};
  // log h = log q~ - log eta~: more negative means larger evidence, so
  // model 1 carries the smaller loss and should gain weight
  up.log_h = {-1.0, -5.0};
  up.log_prior = {lp[0], lp[1]};
  Rng rng(17);
  s.update(up, rng);
  CHECK(s.ucb_weights()[1] > s.ucb_weights()[0]);
}

TEST_CASE("surrogate weights approach the optimal softmax on a frozen problem") {
  // fixed per-model losses; observations are noisy draws around -loss
  const std::vector<double> ell{2.0, 0.5, 1.2, 3.0, 0.9, 1.6, 2.4, 0.1};
  std::vector<ModelIndex> models = bit_models(3);
  std::vector<double> lp(models.size(), -3 * std::log(2.0));

  // optimal weights: p(m) exp(-ell) normalized
  std::vector<double> opt(8);
  double z = 0.0;
  for (int k = 0; k < 8; ++k) z += std::exp(-ell[static_cast<size_t>(k)]);
  for (int k = 0; k < 8; ++k) opt[static_cast<size_t>(k)] = std::exp(-ell[static_cast<size_t>(k)]) / z;

  GpSurrogateConfig cfg;
  cfg.beta = 1.0;
  cfg.noise_var = 0.25;
  GpSurrogateSampler s(models, lp, cfg);
  Rng rng(21);
  auto kl_to_opt = [&]() {
    const std::vector<double> w = s.ucb_weights();
    double kl = 0.0;
    for (int k = 0; k < 8; ++k)
      if (w[static_cast<size_t>(k)] > 0)
        kl += w[static_cast<size_t>(k)] * std::log(w[static_cast<size_t>(k)] / opt[static_cast<size_t>(k)]);
    return kl;
  };
  std::vector<double> kls{kl_to_opt()};
  for (int t = 0; t < 60; ++t) {
    const std::vector<ModelIndex> batch = s.sample(8, rng);
    std::vector<int> idx;
    std::vector<double> y;
    for (const ModelIndex& m : batch) {
      const int k = s.index_of(m);
      idx.push_back(k);
      y.push_back(-ell[static_cast<size_t>(k)] + 0.5 * rng.normal());
    }
    s.gp_update(idx, y);
    kls.push_back(kl_to_opt());
  }
  // decreasing trend: late-window mean well below the early-window mean
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) {
    early += kls[static_cast<size_t>(i)];
    late += kls[kls.size() - 10 + static_cast<size_t>(i)];
  }
  CHECK(late / 10.0 < 0.5 * early / 10.0);
  CHECK(kls.back() < 0.05);
}
