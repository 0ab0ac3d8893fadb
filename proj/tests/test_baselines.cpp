#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vti/baselines.hpp"

using namespace vti;

namespace {

RobustVsTarget toy_target(Rng& rng, int nb, long n, double alpha) {
  Tensor X(n, nb);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < nb; ++j) X(i, j) = rng.normal();
  std::vector<double> y(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) y[static_cast<size_t>(i)] = 0.8 * X(i, 0) + rng.normal();
  RobustVsConfig cfg;
  cfg.n_predictors = nb;
  cfg.intercept = false;
  cfg.alpha = alpha;
  return RobustVsTarget(cfg, std::move(X), std::move(y));
}

// in-test oracle: trapezoid integration of the 1-D evidence
double trapezoid_log_evidence(const RobustVsTarget& t, const ModelIndex& m, double lo, double hi,
                              int n_grid) {
  if (t.d_m(m) == 0) return t.log_eta_value({}, m);
  const double h = (hi - lo) / n_grid;
  double best = -1e300;
  std::vector<double> vals(static_cast<size_t>(n_grid + 1));
  for (int i = 0; i <= n_grid; ++i) {
    vals[static_cast<size_t>(i)] = t.log_eta_value({lo + i * h}, m);
    best = std::max(best, vals[static_cast<size_t>(i)]);
  }
  double acc = 0.0;
  for (int i = 0; i <= n_grid; ++i) {
    const double w = (i == 0 || i == n_grid) ? 0.5 : 1.0;
    acc += w * std::exp(vals[static_cast<size_t>(i)] - best);
  }
  return best + std::log(acc * h);
}

}  // namespace

TEST_CASE("within-model kernel accepts zero-step proposals on the empty model") {
  Rng rng(1);
  RobustVsTarget t = toy_target(rng, 2, 15, 0.1);
  RjConfig cfg;
  cfg.p_jump = 0.0;  // within-model moves only
  RjSampler chain(t, cfg, ModelIndex::from_bits({0, 0}),
                  std::vector<double>{0.3, -0.5});
  Rng step_rng(2);
  for (int i = 0; i < 200; ++i) chain.step(step_rng);
  CHECK(chain.n_within_proposed == 200);
  CHECK(chain.n_within_accepted == 200);  // empty active set: MH identity
  CHECK(chain.beta()[0] == 0.3);
  CHECK(chain.beta()[1] == -0.5);
}

TEST_CASE("birth immediately followed by death restores the state exactly") {
  Rng rng(3);
  RobustVsTarget t = toy_target(rng, 3, 10, 0.1);
  const ModelIndex m0 = ModelIndex::from_bits({1, 0, 0});
  const std::vector<double> b0{0.2, -0.1, 0.9};
  RjSampler chain(t, RjConfig{}, m0, b0);
  // bit flips carry the saturated coordinate, so flipping j twice is exact
  ModelIndex m1 = m0;
  m1.bits[1] ^= 1;
  RjSampler after(t, RjConfig{}, m1, b0);
  ModelIndex m2 = m1;
  m2.bits[1] ^= 1;
  RjSampler back(t, RjConfig{}, m2, b0);
  CHECK(back.model() == m0);
  CHECK(back.beta() == b0);
  CHECK(back.log_target() == chain.log_target());
}

TEST_CASE("log-target cache always matches a fresh evaluation") {
  Rng rng(4);
  RobustVsTarget t = toy_target(rng, 3, 25, 0.1);
  Rng init(5);
  RjSampler chain(t, RjConfig{}, init);
  Rng step_rng(6);
  for (int i = 0; i < 2000; ++i) {
    chain.step(step_rng, i < 500);
    if (i % 100 == 0) REQUIRE(chain.log_target() == doctest::Approx(chain.fresh_log_target()).epsilon(1e-12));
  }
}

TEST_CASE("saturated chain: within-model moves never touch inactive coordinates") {
  Rng rng(7);
  RobustVsTarget t = toy_target(rng, 2, 20, 0.1);
  RjConfig cfg;
  cfg.p_jump = 0.0;  // within-model kernel only
  RjSampler chain(t, cfg, ModelIndex::from_bits({1, 0}), std::vector<double>{0.1, -0.7});
  Rng step_rng(9);
  for (int i = 0; i < 3000; ++i) {
    chain.step(step_rng);
    REQUIRE(chain.beta()[1] == -0.7);  // inactive coordinate frozen under the RW kernel
  }
}

TEST_CASE("two-state toy: empirical stationary distribution matches the oracle") {
  Rng rng(10);
  RobustVsTarget t = toy_target(rng, 1, 20, 0.1);
  const std::vector<ModelIndex> support = t.enumerate_models();
  // in-test oracle: posterior over the two models by 1-D quadrature
  const double lz0 = trapezoid_log_evidence(t, support[0], -12, 12, 40000);
  const double lz1 = trapezoid_log_evidence(t, support[1], -12, 12, 40000);
  const double m = std::max(lz0, lz1);
  const double p1 = std::exp(lz1 - m) / (std::exp(lz0 - m) + std::exp(lz1 - m));

  Rng chain_rng(11);
  RjSamples samples = rj_run(t, 1000000, 50000, 1, chain_rng);
  const std::vector<long> counts = samples.model_counts(support);
  const double freq1 =
      static_cast<double>(counts[1]) / static_cast<double>(counts[0] + counts[1]);
  CHECK(std::abs(freq1 - p1) < 0.01);
}

TEST_CASE("within-model kernel agrees with a quadrature density (KS distance)") {
  Rng rng(12);
  RobustVsTarget t = toy_target(rng, 1, 20, 0.1);
  RjConfig cfg;
  cfg.p_jump = 0.0;
  RjSampler chain(t, cfg, ModelIndex::from_bits({1}), std::vector<double>{0.0});
  Rng step_rng(13);
  for (int i = 0; i < 20000; ++i) chain.step(step_rng, i < 10000);  // adapt then freeze

  const long n_keep = 1000000;
  std::vector<double> draws;
  draws.reserve(static_cast<size_t>(n_keep));
  for (long i = 0; i < n_keep; ++i) {
    chain.step(step_rng);
    draws.push_back(chain.beta()[0]);
  }
  std::sort(draws.begin(), draws.end());

  // quadrature CDF of the conditional posterior on a fine grid
  const ModelIndex m = ModelIndex::from_bits({1});
  const int ng = 20000;
  const double lo = -6, hi = 6, h = (hi - lo) / ng;
  std::vector<double> dens(static_cast<size_t>(ng + 1));
  double best = -1e300;
  for (int i = 0; i <= ng; ++i) {
    dens[static_cast<size_t>(i)] = t.log_eta_value({lo + i * h}, m);
    best = std::max(best, dens[static_cast<size_t>(i)]);
  }
  std::vector<double> cdf(static_cast<size_t>(ng + 1), 0.0);
  for (int i = 1; i <= ng; ++i)
    cdf[static_cast<size_t>(i)] =
        cdf[static_cast<size_t>(i - 1)] +
        0.5 * (std::exp(dens[static_cast<size_t>(i - 1)] - best) + std::exp(dens[static_cast<size_t>(i)] - best)) * h;
  for (auto& c : cdf) c /= cdf.back();

  double ks = 0.0;
  for (long i = 0; i < n_keep; i += 97) {
    const double x = draws[static_cast<size_t>(i)];
    const long gi = std::min<long>(ng, std::max<long>(0, static_cast<long>((x - lo) / h)));
    const double emp = static_cast<double>(i + 1) / static_cast<double>(n_keep);
    ks = std::max(ks, std::abs(emp - cdf[static_cast<size_t>(gi)]));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("run bookkeeping: counts, thinning, split-half stability") {
  Rng rng(14);
  RobustVsTarget t = toy_target(rng, 2, 20, 0.1);
  Rng chain_rng(15);
  RjSamples s1 = rj_run(t, 1000, 0, 1, chain_rng);
  CHECK(s1.models.size() == 1000);  // thin 1, no burn-in: every step kept

  CHECK_THROWS_AS(rj_run(t, 100, 100, 1, chain_rng), std::invalid_argument);

  Rng r2(16);
  RjSamples s2 = rj_run(t, 200000, 20000, 5, r2);
  const std::vector<ModelIndex> support = t.enumerate_models();
  const size_t half = s2.models.size() / 2;
  std::vector<double> f1(support.size(), 0.0), f2(support.size(), 0.0);
  for (size_t i = 0; i < s2.models.size(); ++i) {
    for (size_t k = 0; k < support.size(); ++k)
      if (support[k] == s2.models[i]) {
        (i < half ? f1[k] : f2[k]) += 1.0;
        break;
      }
  }
  for (size_t k = 0; k < support.size(); ++k) {
    f1[k] /= static_cast<double>(half);
    f2[k] /= static_cast<double>(s2.models.size() - half);
    const double p = 0.5 * (f1[k] + f2[k]);
    const double mc = 2.0 * std::sqrt(std::max(p * (1 - p), 1e-6) / half);
    // halves agree within twice the (correlation-inflated) binomial error
    CHECK(std::abs(f1[k] - f2[k]) < 8.0 * mc);
  }
}
