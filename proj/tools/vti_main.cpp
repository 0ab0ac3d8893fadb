#include <CLI11.hpp>

#include <cmath>
#include <iostream>

#include "vti/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitMissingInput = 4;

using namespace vti;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out;
  std::string data;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_file.empty() ? ExperimentConfig::from_overrides(sets)
                                               : ExperimentConfig::from_file(config_file, sets);
    if (!out.empty()) cfg.set("out", out);
    if (!data.empty()) cfg.set("data", data);
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_file, "experiment config file (key = value lines)");
  cmd->add_option("--set", args->sets, "override a config key, e.g. --set train.iters=1000");
  cmd->add_option("--out", args->out, "output directory (overrides config key 'out')");
  cmd->add_option("--data", args->data, "dataset directory (overrides config key 'data')");
}

std::string out_dir(const ExperimentConfig& cfg) {
  return join_path(output_root(), cfg.get("out"));
}

int cmd_simulate(const ExperimentConfig& cfg) {
  Rng rng(derive_seeds(static_cast<uint64_t>(cfg.get_long("seed"))).data);
  const std::string dir = out_dir(cfg);
  if (cfg.get("target") == "robustvs") {
    RobustVsDgpConfig dc;
    dc.n = cfg.get_int("robustvs.n");
    dc.n_predictors = cfg.get_int("robustvs.predictors");
    dc.intercept = cfg.get_bool("robustvs.intercept");
    dc.misspec = cfg.get("robustvs.misspec");
    dc.incl_prob = cfg.get_double("robustvs.incl_prob");
    dc.alpha = cfg.get_double("robustvs.alpha");
    dc.dgp_sigma1();  // validates the misspec name
    save_robustvs_dataset(dir, robustvs_simulate(dc, rng), cfg);
  } else {
    DagDgpConfig dc;
    dc.nodes = cfg.get_int("dag.nodes");
    dc.hidden = cfg.get_int("dag.hidden");
    dc.sigma = cfg.get_double("dag.sigma");
    dc.rho_edge = cfg.get_double("dag.rho_edge");
    dc.bias = cfg.get_bool("dag.bias");
    dc.n = cfg.get_int("dag.n");
    save_dag_dataset(dir, dag_simulate(dc, rng), cfg);
  }
  std::cout << "wrote dataset to " << dir << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, bool resume) {
  if (cfg.get("data").empty() || !file_exists(join_path(cfg.get("data"), "dataset.csv"))) {
    std::cerr << "error: dataset not found under '" << cfg.get("data") << "'\n";
    return kExitMissingInput;
  }
  Experiment ex = build_experiment(cfg);
  const std::string dir = out_dir(cfg);
  if (resume && !file_exists(join_path(dir, "checkpoint.json"))) {
    std::cerr << "error: no checkpoint to resume in " << dir << "\n";
    return kExitMissingInput;
  }
  run_training(ex, dir, resume);
  std::cout << "trained " << ex.trainer->t() << " steps; checkpoint in " << dir << "\n";
  return kExitOk;
}

RobustVsTarget make_rvs_target(const ExperimentConfig& cfg) {
  LoadedRobustVs data = load_robustvs_dataset(cfg.get("data"));
  RobustVsConfig tc;
  tc.n_predictors = cfg.get_int("robustvs.predictors");
  tc.intercept = cfg.get_bool("robustvs.intercept");
  tc.alpha = cfg.get_double("robustvs.alpha");
  tc.sigma1 = cfg.get_double("robustvs.sigma1");
  tc.sigma2 = cfg.get_double("robustvs.sigma2");
  tc.sigma_beta = cfg.get_double("robustvs.sigma_beta");
  return RobustVsTarget(tc, std::move(data.X), std::move(data.y));
}

int cmd_rjmcmc(const ExperimentConfig& cfg) {
  if (cfg.get("target") != "robustvs") {
    std::cerr << "error: the RJMCMC baseline covers the robustvs target only\n";
    return kExitConfig;
  }
  if (cfg.get("data").empty() || !file_exists(join_path(cfg.get("data"), "dataset.csv"))) {
    std::cerr << "error: dataset not found under '" << cfg.get("data") << "'\n";
    return kExitMissingInput;
  }
  RobustVsTarget target = make_rvs_target(cfg);
  RjConfig rc;
  rc.p_jump = cfg.get_double("rj.p_jump");
  rc.scale_mult = cfg.get_double("rj.scale");
  Rng rng(derive_seeds(static_cast<uint64_t>(cfg.get_long("seed"))).data ^ 0xB0B5ull);
  RjSamples samples = rj_run(target, cfg.get_long("rj.steps"), cfg.get_long("rj.burnin"),
                             cfg.get_long("rj.thin"), rng, rc);
  const std::string dir = out_dir(cfg);
  ensure_dir(dir);
  std::vector<std::string> header{"model"};
  for (int j = 0; j < target.layout().d_max(); ++j) header.push_back("theta" + std::to_string(j));
  CsvWriter w(join_path(dir, "rj_samples.csv"), header, cfg);
  for (size_t i = 0; i < samples.models.size(); ++i) {
    std::vector<std::string> cells{samples.models[i].str()};
    const std::vector<uint8_t> chi = target.layout().chi(samples.models[i]);
    for (int j = 0; j < target.layout().d_max(); ++j)
      cells.push_back(chi[static_cast<size_t>(j)]
                          ? CsvWriter::fmt(samples.thetas(static_cast<long>(i), j))
                          : "NA");
    w.row(cells);
  }
  std::cout << "wrote " << samples.models.size() << " samples to " << dir << "\n";
  return kExitOk;
}

int cmd_oracle(const ExperimentConfig& cfg, const std::vector<std::string>& model_filters) {
  if (cfg.get("data").empty() || !file_exists(join_path(cfg.get("data"), "dataset.csv"))) {
    std::cerr << "error: dataset not found under '" << cfg.get("data") << "'\n";
    return kExitMissingInput;
  }
  nlohmann::json meta;
  std::unique_ptr<Target> target = build_target(cfg, cfg.get("data"), &meta);
  if (!target->enumerable()) {
    std::cerr << "error: oracle requires an enumerable model space\n";
    return kExitConfig;
  }
  std::vector<ModelIndex> models = target->enumerate_models();
  if (!model_filters.empty()) {
    std::vector<ModelIndex> chosen;
    for (const std::string& s : model_filters) chosen.push_back(ModelIndex::parse(s));
    models = std::move(chosen);
  }
  OracleConfig oc;
  oc.method = cfg.get("oracle.method");
  oc.quad_nodes = cfg.get_int("oracle.nodes");
  oc.quad_dim_limit = cfg.get_int("oracle.dim_limit");
  oc.is_samples = cfg.get_long("oracle.is_samples");
  oc.is_min_ess = cfg.get_double("oracle.min_ess");
  oc.threads = cfg.get_int("threads");
  const OracleResult res = oracle_model_posterior(*target, models, oc);
  const std::string dir = out_dir(cfg);
  ensure_dir(dir);
  CsvWriter w(join_path(dir, "oracle.csv"), {"model", "log_evidence", "posterior", "entropy", "method"},
              cfg);
  for (size_t k = 0; k < res.models.size(); ++k)
    w.row({res.models[k].str(), CsvWriter::fmt(res.log_z[k]), CsvWriter::fmt(res.posterior[k]),
           CsvWriter::fmt(res.entropy[k]), res.method});
  std::cout << "oracle (" << res.method << ") over " << res.models.size()
            << " models; max node-doubling shift " << res.quad_err << "\n";
  return kExitOk;
}

struct RjLoaded {
  std::vector<ModelIndex> models;
  Tensor thetas;
};

RjLoaded load_rj_csv(const std::string& path, int d_max) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing RJMCMC samples: " + path);
  std::string line;
  RjLoaded out;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ls(line);
    std::string tok;
    std::getline(ls, tok, ',');
    out.models.push_back(ModelIndex::parse(tok));
    std::vector<double> th;
    while (std::getline(ls, tok, ',')) th.push_back(tok == "NA" ? 0.0 : std::stod(tok));
    if (static_cast<int>(th.size()) != d_max)
      throw std::runtime_error("RJMCMC sample width mismatch in " + path);
    rows.push_back(std::move(th));
  }
  out.thetas = Tensor(static_cast<long>(rows.size()), d_max);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < d_max; ++j) out.thetas(static_cast<long>(i), j) = rows[i][static_cast<size_t>(j)];
  return out;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& rj_csv,
                 const std::string& checkpoint_dir) {
  const std::string ckpt_dir = checkpoint_dir.empty() ? out_dir(cfg) : checkpoint_dir;
  const std::string ckpt = join_path(ckpt_dir, "checkpoint.json");
  if (!file_exists(ckpt)) {
    std::cerr << "error: missing checkpoint " << ckpt << "\n";
    return kExitMissingInput;
  }
  Experiment ex = build_experiment(cfg);
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  ex.store->unflatten_values(ck.flow_params);
  ex.sampler->restore(ck.sampler);

  const std::string dir = out_dir(cfg);
  ensure_dir(dir);

  if (cfg.get("target") == "robustvs") {
    if (rj_csv.empty() || !file_exists(rj_csv)) {
      std::cerr << "error: evaluate needs --rj-samples pointing at rj_samples.csv\n";
      return kExitMissingInput;
    }
    RjLoaded rj = load_rj_csv(rj_csv, ex.target->d_max());
    const NllResult nll = cross_entropy_nll(rj.models, rj.thetas, *ex.flow, *ex.sampler,
                                            *ex.target, cfg.get_long("eval.min_per_model"));
    CsvWriter w(join_path(dir, "nll.csv"),
                {"config_hash", "seed", "nll", "se", "n", "n_unsupported"}, cfg);
    w.row({cfg.hash(), cfg.get("seed"), CsvWriter::fmt(nll.nll), CsvWriter::fmt(nll.se),
           std::to_string(nll.n), std::to_string(nll.n_unsupported)});
    CsvWriter pm(join_path(dir, "per_model_ce.csv"), {"model", "cross_entropy", "n"}, cfg);
    for (const auto& [model, ce] : nll.per_model_ce)
      pm.row({model, CsvWriter::fmt(ce.first), std::to_string(ce.second)});
    std::cout << "NLL " << nll.nll << " (se " << nll.se << ", n " << nll.n << ")\n";

    if (ex.target->enumerable() && ex.target->d_max() <= 16) {
      const std::vector<ModelIndex> models = ex.target->enumerate_models();
      OracleConfig oc;
      oc.method = cfg.get("oracle.method");
      oc.quad_nodes = cfg.get_int("oracle.nodes");
      oc.quad_dim_limit = cfg.get_int("oracle.dim_limit");
      oc.is_samples = cfg.get_long("oracle.is_samples");
      oc.is_min_ess = cfg.get_double("oracle.min_ess");
      Rng is_rng(ex.seeds.data ^ 0x15EEDull);
      try {
        const OracleResult oracle =
            oracle_model_posterior(*ex.target, models, oc, ex.flow.get(), &is_rng);
        std::vector<double> qp(models.size());
        for (size_t k = 0; k < models.size(); ++k)
          qp[k] = std::exp(ex.sampler->log_mass(models[k]));
        ModelIndex dgp;
        const ModelIndex* dgp_ptr = nullptr;
        if (ex.data_meta.contains("true_model")) {
          dgp = ModelIndex::parse(ex.data_meta["true_model"].get<std::string>());
          dgp_ptr = &dgp;
        }
        const auto rows = model_prob_scatter(models, oracle.posterior, qp, dgp_ptr);
        CsvWriter sw(join_path(dir, "scatter.csv"),
                     {"model", "oracle_p", "q_p", "log_oracle_p", "log_q_p", "is_null", "is_dgp"},
                     cfg);
        for (const auto& r : rows)
          sw.row({r.model, CsvWriter::fmt(r.oracle_p), CsvWriter::fmt(r.q_p),
                  CsvWriter::fmt(std::log(r.oracle_p)), CsvWriter::fmt(std::log(r.q_p)),
                  r.is_null ? "1" : "0", r.is_dgp ? "1" : "0"});
        std::cout << "TV(q_psi, oracle) = " << total_variation(oracle.posterior, qp) << "\n";
      } catch (const std::runtime_error& e) {
        std::cerr << "note: oracle comparison skipped (" << e.what() << ")\n";
      }
    }
    return kExitOk;
  }

  // DAG evaluation: posterior mean adjacency from sampler draws
  if (!ex.data_meta.contains("adjacency")) {
    std::cerr << "error: dataset metadata lacks the true adjacency\n";
    return kExitMissingInput;
  }
  const int N = cfg.get_int("dag.nodes");
  const std::vector<double> a_flat = ex.data_meta["adjacency"].get<std::vector<double>>();
  Tensor A_true(N, N);
  A_true.vec() = a_flat;
  Rng eval_rng(ex.seeds.data ^ 0xE7A1ull);
  const int n_samp = cfg.get_int("eval.samples");
  const std::vector<ModelIndex> draws = ex.sampler->sample(n_samp, eval_rng);
  Tensor probs(N, N);
  for (const ModelIndex& m : draws) {
    const Tensor A = assemble_dag(lehmer_decode_matrix(m.lehmer, N),
                                  edge_bits_to_upper(m.edge_bits, N));
    for (long i = 0; i < probs.size(); ++i) probs[i] += A[i];
  }
  for (long i = 0; i < probs.size(); ++i) probs[i] /= n_samp;
  const DagMetrics dm = dag_metrics(A_true, probs);
  CsvWriter w(join_path(dir, "dag_metrics.csv"),
              {"config_hash", "seed", "f1", "shd", "brier", "auroc", "auroc_defined"}, cfg);
  w.row({cfg.hash(), cfg.get("seed"), CsvWriter::fmt(dm.f1), CsvWriter::fmt(dm.shd),
         CsvWriter::fmt(dm.brier), CsvWriter::fmt(dm.auroc), dm.auroc_defined ? "1" : "0"});
  std::cout << "F1 " << dm.f1 << " SHD " << dm.shd << " Brier " << dm.brier << " AUROC "
            << dm.auroc << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& base) {
  std::vector<int> cards;
  {
    std::stringstream ss(base.get("sweep.cards"));
    std::string tok;
    while (std::getline(ss, tok, ',')) cards.push_back(std::stoi(tok));
  }
  const std::string dir = out_dir(base);
  ensure_dir(dir);
  CsvWriter w(join_path(dir, "sweep.csv"),
              {"config_hash", "seed", "log2_cardinality", "predictors", "nll", "se", "n"}, base);
  for (int c : cards) {
    ExperimentConfig cfg = base;
    cfg.set("robustvs.predictors", std::to_string(c));
    const std::string sub = join_path(dir, "card" + std::to_string(c));
    cfg.set("data", join_path(sub, "data"));
    cfg.set("out", join_path(cfg.get("out"), "card" + std::to_string(c)));

    Rng rng(derive_seeds(static_cast<uint64_t>(cfg.get_long("seed"))).data + c);
    RobustVsDgpConfig dc;
    dc.n = cfg.get_int("robustvs.n");
    dc.n_predictors = c;
    dc.intercept = cfg.get_bool("robustvs.intercept");
    dc.misspec = cfg.get("robustvs.misspec");
    dc.incl_prob = cfg.get_double("robustvs.incl_prob");
    dc.alpha = cfg.get_double("robustvs.alpha");
    save_robustvs_dataset(cfg.get("data"), robustvs_simulate(dc, rng), cfg);

    Experiment ex = build_experiment(cfg);
    run_training(ex, out_dir(cfg), false);

    RobustVsTarget target = make_rvs_target(cfg);
    RjConfig rc;
    rc.p_jump = cfg.get_double("rj.p_jump");
    rc.scale_mult = cfg.get_double("rj.scale");
    Rng rj_rng(derive_seeds(static_cast<uint64_t>(cfg.get_long("seed"))).data ^ 0xABCDull);
    RjSamples samples = rj_run(target, cfg.get_long("rj.steps"), cfg.get_long("rj.burnin"),
                               cfg.get_long("rj.thin"), rj_rng, rc);
    const NllResult nll = cross_entropy_nll(samples.models, samples.thetas, *ex.flow, *ex.sampler,
                                            *ex.target, cfg.get_long("eval.min_per_model"));
    w.row({cfg.hash(), cfg.get("seed"), std::to_string(c), std::to_string(c),
           CsvWriter::fmt(nll.nll), CsvWriter::fmt(nll.se), std::to_string(nll.n)});
    std::cout << "card 2^" << c << ": NLL " << nll.nll << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational transdimensional inference over discrete model spaces"};
  app.require_subcommand(1);

  CommonArgs sim_args, train_args, rj_args, or_args, ev_args, sw_args;
  bool resume = false;
  std::vector<std::string> model_filters;
  std::string rj_csv, checkpoint_dir;

  CLI::App* c_sim = app.add_subcommand("simulate", "generate a dataset from the configured DGP");
  add_common(c_sim, &sim_args);
  CLI::App* c_train = app.add_subcommand("train", "fit the variational family");
  add_common(c_train, &train_args);
  c_train->add_flag("--resume", resume, "continue from the checkpoint in the output directory");
  CLI::App* c_rj = app.add_subcommand("rjmcmc", "run the reversible jump baseline");
  add_common(c_rj, &rj_args);
  CLI::App* c_or = app.add_subcommand("oracle", "brute-force model posterior on small spaces");
  add_common(c_or, &or_args);
  c_or->add_option("--model", model_filters, "restrict to specific model strings");
  CLI::App* c_ev = app.add_subcommand("evaluate", "cross-entropy and structure metrics");
  add_common(c_ev, &ev_args);
  c_ev->add_option("--rj-samples", rj_csv, "rj_samples.csv from the rjmcmc subcommand");
  c_ev->add_option("--checkpoint-dir", checkpoint_dir, "directory holding checkpoint.json");
  CLI::App* c_sw = app.add_subcommand("sweep", "cardinality sweep: simulate, train, and score");
  add_common(c_sw, &sw_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) return cmd_simulate(sim_args.resolve());
    if (c_train->parsed()) return cmd_train(train_args.resolve(), resume);
    if (c_rj->parsed()) return cmd_rjmcmc(rj_args.resolve());
    if (c_or->parsed()) return cmd_oracle(or_args.resolve(), model_filters);
    if (c_ev->parsed()) return cmd_evaluate(ev_args.resolve(), rj_csv, checkpoint_dir);
    if (c_sw->parsed()) return cmd_sweep(sw_args.resolve());
  } catch (const vti::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vti::TrainDivergence& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
