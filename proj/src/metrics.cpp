#include "vti/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <atomic>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace vti {

namespace {

double logsumexp_vec(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Numerical gradient/Hessian of log eta at theta (central differences).
void num_grad_hess(const Target& target, const ModelIndex& m, const std::vector<double>& th,
                   Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  const int d = static_cast<int>(th.size());
  const double h = 1e-4;
  auto f = [&](const std::vector<double>& x) { return target.log_eta_value(x, m); };
  grad->resize(d);
  hess->resize(d, d);
  const double f0 = f(th);
  for (int i = 0; i < d; ++i) {
    std::vector<double> xp = th, xm = th;
    xp[static_cast<size_t>(i)] += h;
    xm[static_cast<size_t>(i)] -= h;
    const double fp = f(xp), fm = f(xm);
    (*grad)(i) = (fp - fm) / (2 * h);
    (*hess)(i, i) = (fp - 2 * f0 + fm) / (h * h);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      std::vector<double> xpp = th, xpm = th, xmp = th, xmm = th;
      xpp[static_cast<size_t>(i)] += h;
      xpp[static_cast<size_t>(j)] += h;
      xpm[static_cast<size_t>(i)] += h;
      xpm[static_cast<size_t>(j)] -= h;
      xmp[static_cast<size_t>(i)] -= h;
      xmp[static_cast<size_t>(j)] += h;
      xmm[static_cast<size_t>(i)] -= h;
      xmm[static_cast<size_t>(j)] -= h;
      (*hess)(i, j) = (*hess)(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4 * h * h);
    }
}

std::vector<double> find_mode(const Target& target, const ModelIndex& m, int d) {
  std::vector<double> th(static_cast<size_t>(d), 0.0);
  double f0 = target.log_eta_value(th, m);
  for (int it = 0; it < 80; ++it) {
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    num_grad_hess(target, m, th, &g, &H);
    if (g.norm() < 1e-10) break;
    Eigen::MatrixXd Hn = -H;
    // damp toward gradient ascent until positive definite
    double damp = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(Hn);
    while (llt.info() != Eigen::Success && damp < 1e8) {
      damp = damp == 0.0 ? 1e-6 : damp * 10.0;
      llt.compute(Hn + damp * Eigen::MatrixXd::Identity(d, d));
    }
    Eigen::VectorXd step = llt.info() == Eigen::Success ? llt.solve(g) : g;
    double scale = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      std::vector<double> cand = th;
      for (int i = 0; i < d; ++i) cand[static_cast<size_t>(i)] += scale * step(i);
      const double fc = target.log_eta_value(cand, m);
      if (fc > f0) {
        th = std::move(cand);
        f0 = fc;
        scale = -1.0;
        break;
      }
      scale *= 0.5;
    }
    if (scale > 0.0) break;  // line search failed: at (numerical) optimum
  }
  return th;
}

}  // namespace

void gauss_hermite(int n, std::vector<double>* nodes, std::vector<double>* weights) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    J(k - 1, k) = b;
    J(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes->resize(static_cast<size_t>(n));
  weights->resize(static_cast<size_t>(n));
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    (*nodes)[static_cast<size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    (*weights)[static_cast<size_t>(i)] = sqrt_pi * v0 * v0;
  }
}

QuadResult quadrature_log_evidence(const Target& target, const ModelIndex& m, int n_nodes) {
  return quadrature_posterior_expectation(target, m, n_nodes, nullptr);
}

QuadResult quadrature_posterior_expectation(
    const Target& target, const ModelIndex& m, int n_nodes,
    const std::function<std::vector<double>(const Tensor&)>& f) {
  const int d = target.d_m(m);
  if (d == 0) {
    const double lz = target.log_eta_value({}, m);
    QuadResult res{lz, lz, 0.0};
    if (f) res.e_f = f(Tensor(1, 0))[0];
    return res;
  }

  const std::vector<double> mode = find_mode(target, m, d);
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  num_grad_hess(target, m, mode, &g, &H);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
  {
    Eigen::MatrixXd Hn = -H;
    Eigen::LLT<Eigen::MatrixXd> llt(Hn);
    double damp = 0.0;
    while (llt.info() != Eigen::Success && damp < 1e8) {
      damp = damp == 0.0 ? 1e-8 : damp * 10.0;
      llt.compute(Hn + damp * Eigen::MatrixXd::Identity(d, d));
    }
    if (llt.info() == Eigen::Success)
      cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
  }
  Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
  Eigen::MatrixXd L = cov_llt.info() == Eigen::Success
                          ? Eigen::MatrixXd(cov_llt.matrixL())
                          : Eigen::MatrixXd::Identity(d, d);

  std::vector<double> x, w;
  gauss_hermite(n_nodes, &x, &w);
  std::vector<double> log_w(w.size());
  for (size_t i = 0; i < w.size(); ++i) log_w[i] = std::log(w[i]) + x[i] * x[i];

  const long total = static_cast<long>(std::pow(static_cast<double>(n_nodes), d));
  std::vector<double> terms(static_cast<size_t>(total));
  std::vector<double> log_eta_vals(static_cast<size_t>(total));
  Tensor grid(f ? total : 0, f ? d : 0);
  const double sqrt2 = std::sqrt(2.0);

  // The curvature-matched scale diverges when the target has shoulders
  // heavier than the Gaussian envelope (the e^{x^2} node weights then beat
  // the integrand's decay). Inflate the scale until the outermost node shell
  // carries negligible mass.
  double inflate = 1.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    std::vector<int> idx(static_cast<size_t>(d), 0);
    std::vector<double> th(static_cast<size_t>(d));
    double max_term = -std::numeric_limits<double>::infinity();
    double max_edge = -std::numeric_limits<double>::infinity();
    for (long t = 0; t < total; ++t) {
      double lw = 0.0;
      bool edge = false;
      for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (int l = 0; l <= k; ++l)
          acc += L(k, l) * x[static_cast<size_t>(idx[static_cast<size_t>(l)])];
        th[static_cast<size_t>(k)] = mode[static_cast<size_t>(k)] + sqrt2 * inflate * acc;
        lw += log_w[static_cast<size_t>(idx[static_cast<size_t>(k)])];
        edge = edge || idx[static_cast<size_t>(k)] == 0 || idx[static_cast<size_t>(k)] == n_nodes - 1;
      }
      if (f)
        for (int k = 0; k < d; ++k) grid(t, k) = th[static_cast<size_t>(k)];
      const double le = target.log_eta_value(th, m);
      log_eta_vals[static_cast<size_t>(t)] = le;
      terms[static_cast<size_t>(t)] = le + lw;
      max_term = std::max(max_term, terms[static_cast<size_t>(t)]);
      if (edge) max_edge = std::max(max_edge, terms[static_cast<size_t>(t)]);
      for (int k = 0; k < d; ++k) {
        if (++idx[static_cast<size_t>(k)] < n_nodes) break;
        idx[static_cast<size_t>(k)] = 0;
      }
    }
    if (max_edge <= max_term - 30.0 || attempt == 5) break;
    inflate *= 2.0;
  }

  double log_det_l = d * std::log(inflate);
  for (int k = 0; k < d; ++k) log_det_l += std::log(L(k, k));
  const double lse = logsumexp_vec(terms);
  const double log_z = lse + 0.5 * d * std::log(2.0) + log_det_l;

  QuadResult res{log_z, 0.0, 0.0};
  std::vector<double> fv;
  if (f) fv = f(grid);
  for (size_t t = 0; t < terms.size(); ++t) {
    const double r = std::exp(terms[t] - lse);
    res.e_log_eta += r * log_eta_vals[t];
    if (f) res.e_f += r * fv[t];
  }
  return res;
}

double analytic_log_evidence(const RobustVsTarget& target, const ModelIndex& m) {
  if (target.config().alpha != 0.0)
    throw std::invalid_argument("analytic evidence requires the alpha = 0 conjugate case");
  const std::vector<uint8_t> c = target.layout().chi(m);
  const Tensor& X = target.X();
  const long n = X.rows();
  std::vector<int> act;
  for (size_t j = 0; j < c.size(); ++j)
    if (c[j]) act.push_back(static_cast<int>(j));
  const double s1 = target.config().sigma1, sb = target.config().sigma_beta;
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) * (s1 * s1);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int a : act) dot += X(i, a) * X(j, a);
      S(i, j) += sb * sb * dot;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  Eigen::VectorXd yv(n);
  for (long i = 0; i < n; ++i) yv(i) = target.y()[static_cast<size_t>(i)];
  const Eigen::VectorXd alpha = llt.solve(yv);
  double log_det = 0.0;
  for (long i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * yv.dot(alpha) - log_det - 0.5 * n * std::log(2.0 * M_PI);
}

IsResult importance_log_evidence(const Target& target, const CosmicFlow& flow,
                                 const ModelContext& ctx, const OracleConfig& cfg, Rng& rng) {
  const int d = ctx.d_m;
  const long n = cfg.is_samples;
  if (d == 0) return {target.log_eta_value({}, ctx.index), static_cast<double>(n)};

  // prior scale for the defensive component: match the target's Gaussian prior
  const auto* rvs = dynamic_cast<const RobustVsTarget*>(&target);
  const auto* dag = dynamic_cast<const DagTarget*>(&target);
  const double prior_sd = rvs ? rvs->config().sigma_beta : (dag ? dag->config().sigma_w : 1.0);

  const double log_w_flow = std::log1p(-cfg.defensive_prior_mass);
  const double log_w_prior = std::log(cfg.defensive_prior_mass);

  // draw from the mixture
  const long n_prior = static_cast<long>(std::llround(cfg.defensive_prior_mass * n));
  const long n_flow = n - n_prior;
  Tensor theta(n, d);
  {
    ad::Tape tape;
    const int dmax = flow.config().d_max;
    Tensor z(n_flow, dmax);
    for (long i = 0; i < z.size(); ++i) z[i] = rng.normal();
    std::vector<const ModelContext*> ms(static_cast<size_t>(n_flow), &ctx);
    FlowForward fwd = flow.forward(tape, tape.constant(z), ms);
    const Tensor& th = fwd.theta.value();
    for (long i = 0; i < n_flow; ++i) {
      int k = 0;
      for (int j = 0; j < dmax; ++j)
        if (ctx.chi[static_cast<size_t>(j)]) theta(i, k++) = th(i, j);
    }
  }
  for (long i = n_flow; i < n; ++i)
    for (int k = 0; k < d; ++k) theta(i, k) = prior_sd * rng.normal();

  // proposal density and target at every draw
  std::vector<double> log_terms(static_cast<size_t>(n));
  std::vector<double> lq(static_cast<size_t>(n));
  {
    ad::Tape tape;
    ad::Var lqv = flow.conditional_logq(tape, tape.constant(theta), ctx);
    for (long i = 0; i < n; ++i) lq[static_cast<size_t>(i)] = lqv.value()(i, 0);
  }
  const double c_prior = -0.5 * std::log(2.0 * M_PI) - std::log(prior_sd);
  for (long i = 0; i < n; ++i) {
    std::vector<double> th_row(static_cast<size_t>(d));
    double lp_prior = 0.0;
    for (int k = 0; k < d; ++k) {
      th_row[static_cast<size_t>(k)] = theta(i, k);
      const double zk = theta(i, k) / prior_sd;
      lp_prior += c_prior - 0.5 * zk * zk;
    }
    const double log_prop =
        logsumexp_vec({log_w_flow + lq[static_cast<size_t>(i)], log_w_prior + lp_prior});
    log_terms[static_cast<size_t>(i)] = target.log_eta_value(th_row, ctx.index) - log_prop;
  }
  const double lse = logsumexp_vec(log_terms);
  double ess_den = 0.0;
  for (double lt : log_terms) ess_den += std::exp(2.0 * (lt - lse));
  const double ess = 1.0 / ess_den;
  if (ess < cfg.is_min_ess)
    throw std::runtime_error("importance sampling ESS " + std::to_string(ess) +
                             " below the acceptance gate " + std::to_string(cfg.is_min_ess));
  return {lse - std::log(static_cast<double>(n)), ess};
}

OracleResult oracle_model_posterior(const Target& target, const std::vector<ModelIndex>& models,
                                    const OracleConfig& cfg, const CosmicFlow* flow, Rng* rng) {
  // Per-model work is independent; quadrature-only evaluation may fan out
  // over threads without changing any value.
  if (cfg.threads > 1 && cfg.method == "quadrature" && !flow && !rng) {
    OracleResult res;
    res.models = models;
    res.method = "quadrature";
    res.log_z.assign(models.size(), 0.0);
    res.entropy.assign(models.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> shift(models.size(), 0.0);
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const int n_threads = std::min<int>(cfg.threads, static_cast<int>(models.size()));
    for (int w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (size_t k = next.fetch_add(1); k < models.size(); k = next.fetch_add(1)) {
          if (target.d_m(models[k]) > cfg.quad_dim_limit)
            throw std::invalid_argument("model dimension exceeds the quadrature limit");
          const QuadResult q = quadrature_log_evidence(target, models[k], cfg.quad_nodes);
          res.log_z[k] = q.log_z;
          res.entropy[k] = q.log_z - q.e_log_eta;
          const QuadResult q2 = quadrature_log_evidence(target, models[k], 2 * cfg.quad_nodes);
          shift[k] = std::abs(q2.log_z - q.log_z);
        }
      });
    }
    for (auto& th : pool) th.join();
    res.quad_err = *std::max_element(shift.begin(), shift.end());
    std::vector<double> log_post(models.size());
    for (size_t k = 0; k < models.size(); ++k)
      log_post[k] = res.log_z[k] + target.log_prior_m(models[k]);
    const double lse = logsumexp_vec(log_post);
    res.posterior.resize(models.size());
    for (size_t k = 0; k < models.size(); ++k) res.posterior[k] = std::exp(log_post[k] - lse);
    return res;
  }

  OracleResult res;
  res.models = models;
  res.log_z.resize(models.size());
  res.entropy.assign(models.size(), std::numeric_limits<double>::quiet_NaN());

  const auto* rvs = dynamic_cast<const RobustVsTarget*>(&target);
  const bool analytic_ok = rvs && rvs->config().alpha == 0.0;

  std::string method = cfg.method;
  if (method == "auto") method = analytic_ok ? "analytic" : "quadrature";
  res.method = method;

  double max_shift = 0.0;
  for (size_t k = 0; k < models.size(); ++k) {
    const ModelIndex& m = models[k];
    const int d = target.d_m(m);
    if (method == "analytic") {
      if (!analytic_ok) throw std::invalid_argument("analytic oracle unavailable for this target");
      res.log_z[k] = analytic_log_evidence(*rvs, m);
    } else if (method == "quadrature") {
      if (d > cfg.quad_dim_limit) {
        if (!flow || !rng)
          throw std::invalid_argument("model dimension exceeds the quadrature limit and no flow "
                                      "proposal was supplied for importance sampling");
        ModelContext ctx = make_model_context(m, target.chi(m), target.features(m));
        res.log_z[k] = importance_log_evidence(target, *flow, ctx, cfg, *rng).log_z;
        res.method = "quadrature+importance";
      } else {
        const QuadResult q = quadrature_log_evidence(target, m, cfg.quad_nodes);
        res.log_z[k] = q.log_z;
        res.entropy[k] = q.log_z - q.e_log_eta;
        const QuadResult q2 = quadrature_log_evidence(target, m, 2 * cfg.quad_nodes);
        max_shift = std::max(max_shift, std::abs(q2.log_z - q.log_z));
      }
    } else if (method == "importance") {
      if (!flow || !rng) throw std::invalid_argument("importance oracle needs a flow and rng");
      ModelContext ctx = make_model_context(m, target.chi(m), target.features(m));
      res.log_z[k] = importance_log_evidence(target, *flow, ctx, cfg, *rng).log_z;
    } else {
      throw std::invalid_argument("unknown oracle method " + method);
    }
  }
  res.quad_err = max_shift;

  std::vector<double> log_post(models.size());
  for (size_t k = 0; k < models.size(); ++k)
    log_post[k] = res.log_z[k] + target.log_prior_m(models[k]);
  const double lse = logsumexp_vec(log_post);
  res.posterior.resize(models.size());
  for (size_t k = 0; k < models.size(); ++k) res.posterior[k] = std::exp(log_post[k] - lse);
  return res;
}

// ---------------------------------------------------------------------------

NllResult cross_entropy_nll(const std::vector<ModelIndex>& models, const Tensor& thetas,
                            const CosmicFlow& flow, const ModelSampler& sampler,
                            const Target& target, long min_per_model) {
  if (models.size() != static_cast<size_t>(thetas.rows()))
    throw std::invalid_argument("cross_entropy_nll: model/theta count mismatch");
  const long n = thetas.rows();

  // group rows by model so each group shares one inverse pass
  std::map<std::string, std::vector<long>> groups;
  for (long i = 0; i < n; ++i) groups[models[static_cast<size_t>(i)].str()].push_back(i);

  NllResult res;
  res.n = n;
  res.per_sample.assign(static_cast<size_t>(n), 0.0);
  std::map<std::string, std::pair<double, long>> ce_acc;

  for (const auto& [key, rows] : groups) {
    const ModelIndex& m = models[static_cast<size_t>(rows[0])];
    ModelContext ctx = make_model_context(m, target.chi(m), target.features(m));
    const double lq_m = sampler.log_mass(m);

    Tensor th_act(static_cast<long>(rows.size()), ctx.d_m);
    for (size_t r = 0; r < rows.size(); ++r) {
      int k = 0;
      for (int j = 0; j < target.d_max(); ++j)
        if (ctx.chi[static_cast<size_t>(j)]) th_act(static_cast<long>(r), k++) = thetas(rows[r], j);
    }
    std::vector<double> lq_th(rows.size(), 0.0);
    if (ctx.d_m > 0) {
      ad::Tape tape;
      ad::Var v = flow.conditional_logq(tape, tape.constant(th_act), ctx);
      for (size_t r = 0; r < rows.size(); ++r) lq_th[r] = v.value()(static_cast<long>(r), 0);
    }
    double ce_sum = 0.0;
    for (size_t r = 0; r < rows.size(); ++r) {
      const double nll_i = -(lq_m + lq_th[r]);
      res.per_sample[static_cast<size_t>(rows[r])] = nll_i;
      if (!std::isfinite(nll_i)) ++res.n_unsupported;
      ce_sum += -lq_th[r];
    }
    if (static_cast<long>(rows.size()) >= min_per_model)
      ce_acc[key] = {ce_sum / static_cast<double>(rows.size()), static_cast<long>(rows.size())};
  }

  double mean = 0.0;
  for (double v : res.per_sample) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : res.per_sample) var += (v - mean) * (v - mean);
  res.nll = mean;
  res.se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n))
                 : 0.0;
  res.per_model_ce = std::move(ce_acc);
  return res;
}

// ---------------------------------------------------------------------------

double shd(const Tensor& A, const Tensor& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::invalid_argument("shd: shape mismatch");
  const long n = A.rows();
  double d = 0.0;
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const bool a_ij = A(i, j) != 0.0, a_ji = A(j, i) != 0.0;
      const bool b_ij = B(i, j) != 0.0, b_ji = B(j, i) != 0.0;
      if (a_ij == b_ij && a_ji == b_ji) continue;
      d += 1.0;  // insertion, deletion, or reversal each count once per pair
    }
  return d;
}

DagMetrics dag_metrics(const Tensor& A_true, const Tensor& edge_probs, double threshold) {
  if (!A_true.same_shape(edge_probs)) throw std::invalid_argument("dag_metrics: shape mismatch");
  const long n = A_true.rows();
  DagMetrics out;

  Tensor A_hat(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (i != j) A_hat(i, j) = edge_probs(i, j) >= threshold ? 1.0 : 0.0;

  long tp = 0, fp = 0, fn = 0;
  double brier = 0.0;
  std::vector<std::pair<double, int>> scored;  // (probability, is-true-edge)
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool truth = A_true(i, j) != 0.0;
      const bool pred = A_hat(i, j) != 0.0;
      tp += truth && pred;
      fp += !truth && pred;
      fn += truth && !pred;
      const double p = edge_probs(i, j);
      brier += (p - (truth ? 1.0 : 0.0)) * (p - (truth ? 1.0 : 0.0));
      scored.push_back({p, truth ? 1 : 0});
    }
  const double denom = 2.0 * tp + fp + fn;
  out.f1 = denom > 0.0 ? 2.0 * tp / denom : 1.0;
  out.brier = brier / static_cast<double>(n * (n - 1));
  out.shd = shd(A_true, A_hat);

  long n_pos = 0, n_neg = 0;
  for (auto& [p, y] : scored) (y ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) {
    out.auroc = 0.5;
    out.auroc_defined = false;
    return out;
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // midrank-based Mann-Whitney statistic
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < scored.size()) {
    size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (size_t k = i; k < j; ++k)
      if (scored[k].second) rank_sum_pos += midrank;
    i = j;
  }
  out.auroc = (rank_sum_pos - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
  return out;
}

std::vector<ScatterRow> model_prob_scatter(const std::vector<ModelIndex>& models,
                                           const std::vector<double>& oracle_p,
                                           const std::vector<double>& q_p,
                                           const ModelIndex* dgp_model) {
  if (models.size() != oracle_p.size() || models.size() != q_p.size())
    throw std::invalid_argument("model_prob_scatter: length mismatch");
  std::vector<ScatterRow> rows(models.size());
  for (size_t k = 0; k < models.size(); ++k) {
    rows[k].model = models[k].str();
    rows[k].oracle_p = oracle_p[k];
    rows[k].q_p = q_p[k];
    if (models[k].kind == ModelIndex::Kind::Bits) {
      rows[k].is_null = models[k].canonical_int() == 0;
    } else {
      rows[k].is_null = true;
      for (uint8_t b : models[k].edge_bits)
        if (b) rows[k].is_null = false;
    }
    rows[k].is_dgp = dgp_model != nullptr && models[k] == *dgp_model;
  }
  return rows;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: length mismatch");
  double tv = 0.0;
  for (size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two same-length vectors");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> ord(v.size());
    std::iota(ord.begin(), ord.end(), size_t{0});
    std::sort(ord.begin(), ord.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < ord.size()) {
      size_t j = i;
      while (j < ord.size() && v[ord[j]] == v[ord[i]]) ++j;
      const double mid = 0.5 * static_cast<double>(i + 1 + j);
      for (size_t k = i; k < j; ++k) r[ord[k]] = mid;
      i = j;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double num = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace vti
