#include "vti/targets.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vti {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727;

double gauss_logpdf_value(double x, double sd) {
  const double z = x / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// select-based two-term logsumexp, stable for finite inputs
ad::Var lse2(ad::Tape& tape, ad::Var a, ad::Var b) {
  using namespace ad;
  Tensor mask(a.rows(), a.cols());
  const Tensor &av = a.value(), &bv = b.value();
  for (long i = 0; i < mask.size(); ++i) mask[i] = av[i] >= bv[i] ? 1.0 : 0.0;
  Var m = select(mask, a, b);
  return add(m, log(add(exp(sub(a, m)), exp(sub(b, m)))));
}

double lfactorial(int n) {
  double s = 0.0;
  for (int k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

}  // namespace

int Target::d_m(const ModelIndex& m) const {
  int d = 0;
  for (uint8_t b : chi(m)) d += b;
  return d;
}

// ---------------------------------------------------------------------------
// Robust variable selection

RobustVsTarget::RobustVsTarget(RobustVsConfig cfg, Tensor X, std::vector<double> y)
    : cfg_(cfg), layout_(cfg.n_predictors, cfg.intercept), X_(std::move(X)), y_(std::move(y)) {
  if (X_.cols() != layout_.d_max())
    throw std::invalid_argument("RobustVsTarget: design matrix width must equal d_max");
  if (X_.rows() != static_cast<long>(y_.size()))
    throw std::invalid_argument("RobustVsTarget: X/y length mismatch");
  if (cfg_.alpha < 0.0 || cfg_.alpha > 1.0)
    throw std::invalid_argument("RobustVsTarget: alpha outside [0,1]");
  if (cfg_.sigma1 <= 0.0 || cfg_.sigma2 <= 0.0 || cfg_.sigma_beta <= 0.0)
    throw std::invalid_argument("RobustVsTarget: scales must be positive");
}

std::vector<double> RobustVsTarget::features(const ModelIndex& m) const {
  std::vector<double> f(m.bits.size());
  for (size_t i = 0; i < m.bits.size(); ++i) f[i] = m.bits[i] ? 1.0 : 0.0;
  return f;
}

double RobustVsTarget::log_prior_m(const ModelIndex&) const {
  return -layout_.n_bits() * std::log(2.0);
}

ad::Var RobustVsTarget::log_eta(ad::Tape& tape, ad::Var theta_sat,
                                const std::vector<const ModelIndex*>& ms) const {
  using namespace ad;
  const long batch = theta_sat.rows();
  const int p = layout_.d_max();
  if (theta_sat.cols() != p) throw std::invalid_argument("robustvs log_eta: width mismatch");

  Tensor chi_mat(batch, p);
  for (long r = 0; r < batch; ++r) {
    const std::vector<uint8_t> c = layout_.chi(*ms[static_cast<size_t>(r)]);
    for (int j = 0; j < p; ++j) chi_mat(r, j) = c[static_cast<size_t>(j)];
  }
  Var chi_v = tape.constant(chi_mat);
  Var theta_m = mul(theta_sat, chi_v);

  Tensor Xt(p, X_.rows());
  for (long i = 0; i < X_.rows(); ++i)
    for (int j = 0; j < p; ++j) Xt(j, i) = X_(i, j);
  Var mu = matmul(theta_m, tape.constant(Xt));  // (batch, n)
  Var resid = add_row(neg(mu), tape.constant(Tensor::row(y_)));

  const double s1 = cfg_.sigma1, s2 = cfg_.sigma2, a = cfg_.alpha;
  Var rsq = square(resid);
  Var lp1 = add_k(mul_k(rsq, -0.5 / (s1 * s1)), std::log1p(-a) - std::log(s1) - kLogSqrt2Pi);
  Var ll;
  if (a > 0.0) {
    Var lp2 = add_k(mul_k(rsq, -0.5 / (s2 * s2)), std::log(a) - std::log(s2) - kLogSqrt2Pi);
    ll = row_sum(lse2(tape, lp1, lp2));
  } else {
    ll = row_sum(lp1);
  }

  const double sb = cfg_.sigma_beta;
  Var lp_beta = add_k(mul_k(square(theta_sat), -0.5 / (sb * sb)), -std::log(sb) - kLogSqrt2Pi);
  Var prior = row_sum(mul(chi_v, lp_beta));
  return add(ll, prior);
}

double RobustVsTarget::loglik_masked(const std::vector<double>& beta_full,
                                     const std::vector<uint8_t>& chi_mask) const {
  const int p = layout_.d_max();
  const double s1 = cfg_.sigma1, s2 = cfg_.sigma2, a = cfg_.alpha;
  const double c1 = std::log1p(-a) - std::log(s1) - kLogSqrt2Pi;
  const double c2 = a > 0.0 ? std::log(a) - std::log(s2) - kLogSqrt2Pi
                            : -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (long i = 0; i < X_.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < p; ++j)
      if (chi_mask[static_cast<size_t>(j)]) mu += X_(i, j) * beta_full[static_cast<size_t>(j)];
    const double r = y_[static_cast<size_t>(i)] - mu;
    const double lp1 = c1 - 0.5 * r * r / (s1 * s1);
    if (a > 0.0) {
      const double lp2 = c2 - 0.5 * r * r / (s2 * s2);
      ll += logaddexp(lp1, lp2);
    } else {
      ll += lp1;
    }
  }
  return ll;
}

double RobustVsTarget::log_prior_beta_coord(double b) const {
  return gauss_logpdf_value(b, cfg_.sigma_beta);
}

double RobustVsTarget::log_eta_value(const std::vector<double>& theta_active,
                                     const ModelIndex& m) const {
  const std::vector<uint8_t> c = layout_.chi(m);
  std::vector<double> beta(static_cast<size_t>(layout_.d_max()), 0.0);
  size_t k = 0;
  double prior = 0.0;
  for (size_t j = 0; j < c.size(); ++j) {
    if (!c[j]) continue;
    if (k >= theta_active.size())
      throw std::invalid_argument("robustvs log_eta_value: theta dimension mismatch");
    beta[j] = theta_active[k++];
    prior += log_prior_beta_coord(beta[j]);
  }
  if (k != theta_active.size())
    throw std::invalid_argument("robustvs log_eta_value: theta dimension mismatch");
  return loglik_masked(beta, c) + prior;
}

ModelIndex RobustVsTarget::sample_prior_model(Rng& rng) const {
  std::vector<uint8_t> bits(static_cast<size_t>(layout_.n_bits()));
  for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return ModelIndex::from_bits(std::move(bits));
}

double RobustVsDgpConfig::dgp_sigma1() const {
  if (misspec == "none") return 1.0;
  if (misspec == "mid") return 2.0;
  if (misspec == "high") return 4.0;
  throw std::invalid_argument("robustvs: unknown misspecification level '" + misspec +
                              "' (expected none|mid|high)");
}

double RobustVsDgpConfig::dgp_sigma2() const {
  if (misspec == "none") return 10.0;
  if (misspec == "mid") return 5.0;
  if (misspec == "high") return 4.0;
  throw std::invalid_argument("robustvs: unknown misspecification level '" + misspec +
                              "' (expected none|mid|high)");
}

double RobustVsDgpConfig::beta2() const { return misspec == "none" ? 0.5 : 1.5; }

RobustVsSim robustvs_simulate(const RobustVsDgpConfig& cfg, Rng& rng) {
  const int nb = cfg.n_predictors;
  const int p = nb + (cfg.intercept ? 1 : 0);
  const int off = cfg.intercept ? 1 : 0;
  Tensor X(cfg.n, p);
  for (long i = 0; i < cfg.n; ++i) {
    if (cfg.intercept) X(i, 0) = 1.0;
    for (int j = 0; j < nb; ++j) X(i, off + j) = rng.normal();
  }

  std::vector<uint8_t> bits(static_cast<size_t>(nb));
  for (auto& b : bits) b = rng.bernoulli(cfg.incl_prob) ? 1 : 0;
  ModelIndex truth = ModelIndex::from_bits(bits);

  if (cfg.correlated()) {
    // Spread a total correlation mass of 0.1 from each included predictor
    // over excluded predictors chosen with probability 0.4, then standardize.
    for (int i = 0; i < nb; ++i) {
      if (!bits[static_cast<size_t>(i)]) continue;
      std::vector<int> chosen;
      for (int j = 0; j < nb; ++j)
        if (!bits[static_cast<size_t>(j)] && rng.bernoulli(0.4)) chosen.push_back(j);
      if (chosen.empty()) continue;
      const double w = 0.1 / static_cast<double>(chosen.size());
      for (int j : chosen)
        for (long r = 0; r < cfg.n; ++r) X(r, off + j) += w * X(r, off + i);
    }
    for (int j = 0; j < nb; ++j) {
      double mean = 0.0, sq = 0.0;
      for (long r = 0; r < cfg.n; ++r) mean += X(r, off + j);
      mean /= cfg.n;
      for (long r = 0; r < cfg.n; ++r) sq += (X(r, off + j) - mean) * (X(r, off + j) - mean);
      const double sd = std::sqrt(sq / cfg.n);
      for (long r = 0; r < cfg.n; ++r) X(r, off + j) = (X(r, off + j) - mean) / sd;
    }
  }

  const double b = rng.bernoulli(0.5) ? cfg.beta1 : cfg.beta2();
  std::vector<double> beta(static_cast<size_t>(p), 0.0);
  if (cfg.intercept) beta[0] = b;
  for (int j = 0; j < nb; ++j)
    if (bits[static_cast<size_t>(j)]) beta[static_cast<size_t>(off + j)] = b;

  const double s1 = cfg.dgp_sigma1(), s2 = cfg.dgp_sigma2();
  std::vector<double> y(static_cast<size_t>(cfg.n));
  for (long i = 0; i < cfg.n; ++i) {
    double mu = 0.0;
    for (int j = 0; j < p; ++j) mu += X(i, j) * beta[static_cast<size_t>(j)];
    const double sd = rng.bernoulli(cfg.alpha) ? s2 : s1;
    y[static_cast<size_t>(i)] = mu + sd * rng.normal();
  }

  RobustVsSim sim;
  sim.X = std::move(X);
  sim.y = std::move(y);
  sim.true_model = std::move(truth);
  sim.true_beta = std::move(beta);
  sim.beta_value = b;
  return sim;
}

// ---------------------------------------------------------------------------
// Non-linear DAG target

DagTarget::DagTarget(DagTargetConfig cfg, Tensor X)
    : cfg_(cfg), layout_(cfg.nodes, cfg.hidden, cfg.bias), X_(std::move(X)) {
  if (X_.cols() != cfg_.nodes) throw std::invalid_argument("DagTarget: column count mismatch");
  if (cfg_.sigma <= 0.0 || cfg_.sigma_w <= 0.0)
    throw std::invalid_argument("DagTarget: scales must be positive");
  if (cfg_.lambda_s < 0.0) throw std::invalid_argument("DagTarget: lambda_s must be >= 0");
}

std::vector<double> DagTarget::features(const ModelIndex& m) const {
  const Tensor P = lehmer_decode_matrix(m.lehmer, cfg_.nodes);
  const Tensor U = edge_bits_to_upper(m.edge_bits, cfg_.nodes);
  const Tensor A = assemble_dag(P, U);
  return A.vec();
}

double DagTarget::log_prior_m(const ModelIndex& m) const {
  const int n = cfg_.nodes;
  int n_edges = 0;
  for (uint8_t b : m.edge_bits) n_edges += b;
  return -lfactorial(n) - 0.5 * n * (n - 1) * std::log(2.0) - cfg_.lambda_s * n_edges;
}

ad::Var DagTarget::log_eta(ad::Tape& tape, ad::Var theta_sat,
                           const std::vector<const ModelIndex*>& ms) const {
  using namespace ad;
  const long batch = theta_sat.rows();
  const int N = cfg_.nodes, h = cfg_.hidden;
  const long n = X_.rows();
  const double s2 = cfg_.sigma * cfg_.sigma;
  const double base = -0.5 * n * N * std::log(2.0 * M_PI * s2);

  std::vector<Var> rows;
  rows.reserve(static_cast<size_t>(batch));
  for (long r = 0; r < batch; ++r) {
    const ModelIndex& m = *ms[static_cast<size_t>(r)];
    const std::vector<int> order = lehmer_decode_order(m.lehmer, N);
    const std::vector<uint8_t> c = layout_.chi(m);

    Tensor chi_row(1, layout_.d_max());
    for (int j = 0; j < layout_.d_max(); ++j) chi_row(0, j) = c[static_cast<size_t>(j)];
    Var theta_r = slice_rows(theta_sat, r, 1);
    Var theta_m = mul(theta_r, tape.constant(chi_row));

    double const_ss = 0.0;
    for (long i = 0; i < n; ++i) {
      const double x0 = X_(i, order[0]);
      const_ss += x0 * x0;  // root node: f identically zero
    }
    Var ss = tape.constant(Tensor::scalar(const_ss));

    for (int j = 1; j < N; ++j) {
      int n_par = 0;
      for (int i = 0; i < j; ++i) n_par += m.edge_bits[static_cast<size_t>(upper_index(i, j, N))];
      Tensor xj(n, 1);
      for (long i = 0; i < n; ++i) xj(i, 0) = X_(i, order[static_cast<size_t>(j)]);
      if (n_par == 0) {
        double cs = 0.0;
        for (long i = 0; i < n; ++i) cs += xj(i, 0) * xj(i, 0);
        ss = add(ss, tape.constant(Tensor::scalar(cs)));
        continue;
      }
      Tensor Xp(n, j);
      for (long i = 0; i < n; ++i)
        for (int pcol = 0; pcol < j; ++pcol) Xp(i, pcol) = X_(i, order[static_cast<size_t>(pcol)]);

      const int base_off = layout_.w1_offset(j);
      Var w1 = reshape(slice_cols(theta_m, base_off, j * h), j, h);
      Var pre = matmul(tape.constant(Xp), w1);  // (n, h)
      if (cfg_.bias) pre = add_row(pre, slice_cols(theta_m, layout_.b1_offset(j), h));
      Var act = relu(pre);
      Var w2 = reshape(slice_cols(theta_m, layout_.w2_offset(j), h), h, 1);
      Var fj = matmul(act, w2);  // (n, 1)
      if (cfg_.bias) {
        Var b2 = slice_cols(theta_m, layout_.b2_offset(j), 1);  // (1,1)
        fj = add_col(fj, matmul(tape.constant(Tensor::full(n, 1, 1.0)), b2));
      }
      Var resid = sub(tape.constant(xj), fj);
      ss = add(ss, sum_all(square(resid)));
    }

    Var ll = add_k(mul_k(ss, -0.5 / s2), base);
    const double sw = cfg_.sigma_w;
    Var lp = add_k(mul_k(square(theta_r), -0.5 / (sw * sw)), -std::log(sw) - kLogSqrt2Pi);
    Var prior = row_sum(mul(tape.constant(chi_row), lp));
    rows.push_back(add(ll, prior));
  }
  Var stacked = concat_cols(rows);  // (1, batch)
  return reshape(stacked, batch, 1);
}

double DagTarget::log_eta_value(const std::vector<double>& theta_active,
                                const ModelIndex& m) const {
  const std::vector<uint8_t> c = layout_.chi(m);
  std::vector<double> theta(static_cast<size_t>(layout_.d_max()), 0.0);
  size_t k = 0;
  double prior = 0.0;
  for (size_t j = 0; j < c.size(); ++j) {
    if (!c[j]) continue;
    if (k >= theta_active.size())
      throw std::invalid_argument("dag log_eta_value: theta dimension mismatch");
    theta[j] = theta_active[k++];
    prior += gauss_logpdf_value(theta[j], cfg_.sigma_w);
  }
  if (k != theta_active.size())
    throw std::invalid_argument("dag log_eta_value: theta dimension mismatch");

  const int N = cfg_.nodes, h = cfg_.hidden;
  const long n = X_.rows();
  const double s2 = cfg_.sigma * cfg_.sigma;
  const std::vector<int> order = lehmer_decode_order(m.lehmer, N);

  double ss = 0.0;
  std::vector<double> hid(static_cast<size_t>(h));
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < N; ++j) {
      double f = 0.0;
      if (j > 0) {
        const int w1 = layout_.w1_offset(j);
        for (int u = 0; u < h; ++u) {
          double acc = cfg_.bias ? theta[static_cast<size_t>(layout_.b1_offset(j) + u)] : 0.0;
          for (int pcol = 0; pcol < j; ++pcol)
            acc += theta[static_cast<size_t>(w1 + pcol * h + u)] * X_(i, order[static_cast<size_t>(pcol)]);
          hid[static_cast<size_t>(u)] = acc > 0.0 ? acc : 0.0;
        }
        const int w2 = layout_.w2_offset(j);
        for (int u = 0; u < h; ++u) f += theta[static_cast<size_t>(w2 + u)] * hid[static_cast<size_t>(u)];
        if (cfg_.bias) f += theta[static_cast<size_t>(layout_.b2_offset(j))];
      }
      const double r = X_(i, order[static_cast<size_t>(j)]) - f;
      ss += r * r;
    }
  }
  return -0.5 * n * N * std::log(2.0 * M_PI * s2) - 0.5 * ss / s2 + prior;
}

ModelIndex DagTarget::sample_prior_model(Rng& rng) const {
  const int N = cfg_.nodes;
  std::vector<int> codes(static_cast<size_t>(N - 1));
  for (int i = 0; i < N - 1; ++i) codes[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(N - i));
  // p(U) factorizes: each edge bit is Bernoulli(sigmoid(-lambda_s))
  const double p_edge = 1.0 / (1.0 + std::exp(cfg_.lambda_s));
  std::vector<uint8_t> eb(static_cast<size_t>(N * (N - 1) / 2));
  for (auto& b : eb) b = rng.bernoulli(p_edge) ? 1 : 0;
  return ModelIndex::dag(std::move(codes), std::move(eb));
}

DagSim dag_simulate(const DagDgpConfig& cfg, Rng& rng) {
  const int N = cfg.nodes, h = cfg.hidden;
  DagLayout layout(N, h, cfg.bias);

  std::vector<int> codes(static_cast<size_t>(N - 1));
  for (int i = 0; i < N - 1; ++i) codes[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(N - i));
  std::vector<uint8_t> eb(static_cast<size_t>(N * (N - 1) / 2));
  for (auto& b : eb) b = rng.bernoulli(cfg.rho_edge) ? 1 : 0;
  ModelIndex truth = ModelIndex::dag(codes, eb);

  // active parameters drawn uniformly from a range bounded away from zero
  std::vector<double> theta(static_cast<size_t>(layout.d_max()));
  for (auto& t : theta) {
    const double mag = rng.uniform(0.3, 0.7);
    t = rng.bernoulli(0.5) ? mag : -mag;
  }

  const std::vector<int> order = lehmer_decode_order(codes, N);
  const std::vector<uint8_t> chi = layout.chi(truth);
  Tensor X(cfg.n, N);
  std::vector<double> hid(static_cast<size_t>(h));
  for (long s = 0; s < cfg.n; ++s) {
    for (int j = 0; j < N; ++j) {
      double f = 0.0;
      if (j > 0) {
        const int w1 = layout.w1_offset(j);
        for (int u = 0; u < h; ++u) {
          double acc = 0.0;
          if (cfg.bias && chi[static_cast<size_t>(layout.b1_offset(j) + u)])
            acc = theta[static_cast<size_t>(layout.b1_offset(j) + u)];
          for (int pcol = 0; pcol < j; ++pcol) {
            const long coord = w1 + pcol * h + u;
            if (chi[static_cast<size_t>(coord)])
              acc += theta[static_cast<size_t>(coord)] * X(s, order[static_cast<size_t>(pcol)]);
          }
          hid[static_cast<size_t>(u)] = acc > 0.0 ? acc : 0.0;
        }
        int n_par = 0;
        for (int i = 0; i < j; ++i) n_par += eb[static_cast<size_t>(upper_index(i, j, N))];
        if (n_par > 0) {
          const int w2 = layout.w2_offset(j);
          for (int u = 0; u < h; ++u) f += theta[static_cast<size_t>(w2 + u)] * hid[static_cast<size_t>(u)];
          if (cfg.bias) f += theta[static_cast<size_t>(layout.b2_offset(j))];
        }
      }
      X(s, order[static_cast<size_t>(j)]) = f + cfg.sigma * rng.normal();
    }
  }

  DagSim sim;
  sim.A_true = assemble_dag(lehmer_decode_matrix(codes, N), edge_bits_to_upper(eb, N));
  sim.X = std::move(X);
  sim.true_model = std::move(truth);
  return sim;
}

Tensor load_standardized_csv(const std::string& path, int expect_cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first) {
      first = false;
      // skip a non-numeric header row
      if (line.find_first_not_of("0123456789+-.eE, \t") != std::string::npos) continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    if (expect_cols > 0 && static_cast<int>(row.size()) != expect_cols)
      throw std::runtime_error("unexpected column count in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path);
  Tensor X(static_cast<long>(rows.size()), static_cast<long>(rows[0].size()));
  for (long i = 0; i < X.rows(); ++i)
    for (long j = 0; j < X.cols(); ++j) X(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  for (long j = 0; j < X.cols(); ++j) {
    double mean = 0.0, sq = 0.0;
    for (long i = 0; i < X.rows(); ++i) mean += X(i, j);
    mean /= X.rows();
    for (long i = 0; i < X.rows(); ++i) sq += (X(i, j) - mean) * (X(i, j) - mean);
    const double sd = std::sqrt(sq / X.rows());
    for (long i = 0; i < X.rows(); ++i) X(i, j) = (X(i, j) - mean) / (sd > 0.0 ? sd : 1.0);
  }
  return X;
}

}  // namespace vti
