#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "vti/metrics.hpp"

using namespace vti;
using vti::testutil::GaussianToyTarget;

namespace {

RobustVsTarget conjugate_target(Rng& rng, int nb = 3, long n = 30) {
  Tensor X(n, nb);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < nb; ++j) X(i, j) = rng.normal();
  std::vector<double> y(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) y[static_cast<size_t>(i)] = 0.5 + 0.7 * X(i, 0) + rng.normal();
  RobustVsConfig cfg;
  cfg.n_predictors = nb;
  cfg.intercept = false;
  cfg.alpha = 0.0;
  return RobustVsTarget(cfg, std::move(X), std::move(y));
}

}  // namespace

TEST_CASE("gauss-hermite rule integrates low-order polynomials exactly") {
  std::vector<double> x, w;
  gauss_hermite(24, &x, &w);
  double s0 = 0.0, s2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s2 += w[i] * x[i] * x[i];
  }
  CHECK(s0 == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));
}

TEST_CASE("quadrature evidence matches the analytic conjugate formula") {
  Rng rng(1);
  RobustVsTarget t = conjugate_target(rng);
  for (const ModelIndex& m : t.enumerate_models()) {
    const double analytic = analytic_log_evidence(t, m);
    const QuadResult quad = quadrature_log_evidence(t, m, 64);
    REQUIRE(std::abs(quad.log_z - analytic) <= 1e-6);
  }
}

TEST_CASE("quadrature is converged: doubling the nodes moves log Z below 1e-8") {
  Rng rng(2);
  RobustVsTarget t = conjugate_target(rng, 2, 25);
  OracleConfig oc;
  oc.method = "quadrature";
  const OracleResult res = oracle_model_posterior(t, t.enumerate_models(), oc);
  CHECK(res.quad_err < 1e-8);
}

TEST_CASE("flat likelihood: the oracle posterior equals the prior") {
  GaussianToyTarget t(3, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});  // Z_m = 1 for every model
  OracleConfig oc;
  oc.method = "quadrature";
  oc.quad_nodes = 32;
  const OracleResult res = oracle_model_posterior(t, t.enumerate_models(), oc);
  for (double p : res.posterior) CHECK(p == doctest::Approx(1.0 / 8.0).epsilon(1e-9));
  double total = 0.0;
  for (double p : res.posterior) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oracle entropy: Gaussian case has the closed-form entropy") {
  const double sd = 0.6;
  GaussianToyTarget t(1, {1.2}, {sd});
  const QuadResult q = quadrature_log_evidence(t, ModelIndex::from_bits({1}), 64);
  const double want = 0.5 * std::log(2.0 * M_PI * M_E * sd * sd);
  CHECK(q.log_z == doctest::Approx(0.0).epsilon(1e-9));  // normalized density
  CHECK(q.log_z - q.e_log_eta == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("nll: self-samples recover the variational entropy; oracle match on a toy") {
  // flow fixed to an exact Gaussian on a single-model space
  GaussianToyTarget target(1, {0.8}, {1.7});
  ParamStore store;
  Rng init(3);
  FlowConfig fc;
  fc.kind = FlowKind::Affine;
  fc.d_max = 1;
  fc.n_transforms = 1;
  fc.blocks = 1;
  fc.hidden = 8;
  fc.feature_dim = 1;
  CosmicFlow flow(fc, store, init);
  Tensor& bf = store.value(store.by_name("flow.t0.bf"));
  bf[0] = 0.8;
  bf[1] = softplus_inv(1.7 - 1e-3);

  std::vector<ModelIndex> support{ModelIndex::from_bits({1})};
  CategoricalSampler sampler(support);

  Rng rng(4);
  const long n = 20000;
  std::vector<ModelIndex> models(static_cast<size_t>(n), support[0]);
  Tensor thetas(n, 1);
  for (long i = 0; i < n; ++i) thetas(i, 0) = 0.8 + 1.7 * rng.normal();

  const NllResult res = cross_entropy_nll(models, thetas, flow, sampler, target);
  const double h_true = 0.5 * std::log(2.0 * M_PI * M_E * 1.7 * 1.7);
  CHECK(std::abs(res.nll - h_true) < 4.0 * res.se + 1e-3);
  CHECK(res.n_unsupported == 0);
  REQUIRE(res.per_model_ce.count(support[0].str()) == 1);
  CHECK(std::abs(res.per_model_ce.at(support[0].str()).first - h_true) < 0.05);

  // the cross-entropy lower bound: a mismatched q scores strictly worse
  Tensor& bf2 = store.value(store.by_name("flow.t0.bf"));
  bf2[0] = -0.5;  // wrong location
  const NllResult worse = cross_entropy_nll(models, thetas, flow, sampler, target);
  CHECK(worse.nll > res.nll + 0.1);
  CHECK(res.nll > h_true - 4.0 * res.se - 1e-3);  // NLL >= H(pi) - MC error
}

TEST_CASE("nll: a model with zero variational mass contributes +inf, reported") {
  GaussianToyTarget target(1, {0.0}, {1.0});
  ParamStore store;
  Rng init(5);
  FlowConfig fc;
  fc.kind = FlowKind::Affine;
  fc.d_max = 1;
  fc.n_transforms = 1;
  fc.blocks = 1;
  fc.hidden = 8;
  fc.feature_dim = 1;
  CosmicFlow flow(fc, store, init);
  // sampler that only supports the full model
  CategoricalSampler sampler({ModelIndex::from_bits({1})});

  std::vector<ModelIndex> models{ModelIndex::from_bits({0}), ModelIndex::from_bits({1})};
  Tensor thetas(2, 1);
  thetas(1, 0) = 0.4;
  const NllResult res = cross_entropy_nll(models, thetas, flow, sampler, target, 1);
  CHECK(res.n_unsupported == 1);
  CHECK(std::isinf(res.nll));
}

TEST_CASE("dag metrics: perfect prediction and the worked 3-node case") {
  Tensor A(3, 3);
  A(0, 1) = 1.0;
  A(1, 2) = 1.0;
  SUBCASE("probabilities equal to the adjacency") {
    const DagMetrics m = dag_metrics(A, A);
    CHECK(m.f1 == 1.0);
    CHECK(m.shd == 0.0);
    CHECK(m.brier == 0.0);
    CHECK(m.auroc == 1.0);
    CHECK(m.auroc_defined);
  }
  SUBCASE("two of six slots predicted with certainty") {
    Tensor p(3, 3);
    p(0, 1) = 1.0;
    p(1, 2) = 1.0;
    const DagMetrics m = dag_metrics(A, p);
    CHECK(m.f1 == 1.0);
    CHECK(m.shd == 0.0);
    CHECK(m.brier == 0.0);
  }
  SUBCASE("a reversed edge counts once in SHD") {
    Tensor p(3, 3);
    p(1, 0) = 1.0;  // reversal of (0,1)
    p(1, 2) = 1.0;
    const DagMetrics m = dag_metrics(A, p);
    CHECK(m.shd == 1.0);
  }
}

TEST_CASE("dag metrics: all-constant scores flag AUROC as undefined") {
  Tensor A(3, 3);  // no true edges: no positive class
  Tensor p(3, 3);
  p(0, 1) = 0.5;
  const DagMetrics m = dag_metrics(A, p);
  CHECK_FALSE(m.auroc_defined);
  CHECK(m.auroc == 0.5);
}

TEST_CASE("shd is a metric on adjacency matrices") {
  Rng rng(6);
  auto random_adj = [&](int n) {
    Tensor A(n, n);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j)
        if (i != j && rng.bernoulli(0.3)) A(i, j) = 1.0;
    return A;
  };
  for (int rep = 0; rep < 100; ++rep) {
    const Tensor A = random_adj(5), B = random_adj(5), C = random_adj(5);
    CHECK(shd(A, A) == 0.0);
    CHECK(shd(A, B) == shd(B, A));
    CHECK(shd(A, C) <= shd(A, B) + shd(B, C));
    if (shd(A, B) == 0.0)
      for (long i = 0; i < A.size(); ++i)
        if (i / 5 != i % 5) CHECK(A[i] == B[i]);
  }
}

TEST_CASE("model probability scatter rows") {
  std::vector<ModelIndex> ms{ModelIndex::from_int(0, 3), ModelIndex::from_int(5, 3),
                             ModelIndex::from_int(7, 3)};
  const ModelIndex dgp = ModelIndex::from_int(5, 3);
  SUBCASE("q equals the oracle: every row on the diagonal") {
    const std::vector<double> p{0.2, 0.5, 0.3};
    const auto rows = model_prob_scatter(ms, p, p, &dgp);
    for (const auto& r : rows) CHECK(r.oracle_p == r.q_p);
    CHECK(rows[0].is_null);
    CHECK(rows[1].is_dgp);
    CHECK_FALSE(rows[2].is_dgp);
  }
  SUBCASE("uniform q: a horizontal band at 1/M") {
    const std::vector<double> p{0.7, 0.2, 0.1};
    const std::vector<double> q(3, 1.0 / 3.0);
    const auto rows = model_prob_scatter(ms, p, q, nullptr);
    for (const auto& r : rows) CHECK(r.q_p == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("total variation and Spearman correlation") {
  CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(total_variation({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(spearman_rank_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman_rank_correlation({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  const double r = spearman_rank_correlation({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4});
  CHECK(r > 0.5);
  CHECK(r < 1.0);
}

TEST_CASE("importance-sampling oracle agrees with quadrature on a small case") {
  Rng rng(7);
  RobustVsTarget t = conjugate_target(rng, 2, 25);
  const ModelIndex m = ModelIndex::from_bits({1, 1});

  // proposal: a flow trained not at all, but defensively mixed with the prior;
  // use a generous sample count and compare against the analytic value
  ParamStore store;
  Rng init(8);
  FlowConfig fc;
  fc.kind = FlowKind::Affine;
  fc.d_max = 2;
  fc.n_transforms = 1;
  fc.blocks = 1;
  fc.hidden = 8;
  fc.feature_dim = 2;
  CosmicFlow flow(fc, store, init);
  ModelContext ctx = make_model_context(m, t.chi(m), t.features(m));
  OracleConfig oc;
  oc.is_samples = 200000;
  oc.is_min_ess = 500.0;
  Rng is_rng(9);
  const IsResult is = importance_log_evidence(t, flow, ctx, oc, is_rng);
  const double analytic = analytic_log_evidence(t, m);
  CHECK(std::abs(is.log_z - analytic) < 0.05);
  CHECK(is.ess >= 500.0);

  // an unreachable ESS gate refuses with a diagnostic
  OracleConfig strict = oc;
  strict.is_samples = 50;
  strict.is_min_ess = 1000.0;
  Rng r2(10);
  CHECK_THROWS_AS(importance_log_evidence(t, flow, ctx, strict, r2), std::runtime_error);
}
