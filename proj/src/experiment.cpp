#include "vti/experiment.hpp"

#include <cmath>
#include <iostream>

namespace vti {

StreamSeeds derive_seeds(uint64_t master) {
  StreamSeeds s;
  s.models = master * 1000003ull + 1;
  s.z = master * 1000003ull + 2;
  s.data = master * 1000003ull + 3;
  s.init = master * 1000003ull + 4;
  return s;
}

FlowConfig flow_config_from(const ExperimentConfig& cfg, int d_max, int feature_dim) {
  FlowConfig fc;
  const std::string kind = cfg.get("flow");
  if (kind == "spline")
    fc.kind = FlowKind::Spline;
  else if (kind == "affine")
    fc.kind = FlowKind::Affine;
  else if (kind == "diaggauss")
    fc.kind = FlowKind::DiagGaussian;
  else
    throw ConfigError("unknown flow kind: " + kind + " (expected spline|affine|diaggauss)");
  fc.d_max = d_max;
  fc.feature_dim = feature_dim;
  fc.n_transforms = cfg.get_int("flow.transforms");
  fc.blocks = cfg.get_int("flow.blocks");
  fc.hidden = cfg.get_int("flow.hidden");
  fc.spline_bins = cfg.get_int("flow.spline_bins");
  fc.spline_bound = cfg.get_double("flow.spline_bound");
  fc.global_affine = cfg.get_bool("flow.global_affine");
  fc.global_affine_trainable = cfg.get_bool("flow.global_affine_trainable");
  fc.ctx_hidden = cfg.get_int("flow.ctx_hidden");
  const std::string enc = cfg.get("flow.ctx");
  if (enc == "identity")
    fc.ctx.kind = CtxEncoderConfig::Kind::Identity;
  else if (enc == "mlp") {
    fc.ctx.kind = CtxEncoderConfig::Kind::Mlp;
    fc.ctx.target_width = cfg.get_int("flow.ctx_width");
  } else
    throw ConfigError("unknown context encoder: " + enc + " (expected identity|mlp)");
  return fc;
}

std::unique_ptr<Target> build_target(const ExperimentConfig& cfg, const std::string& data_dir,
                                     nlohmann::json* meta_out) {
  const std::string kind = cfg.get("target");
  if (kind == "robustvs") {
    LoadedRobustVs data = load_robustvs_dataset(data_dir);
    RobustVsConfig tc;
    tc.n_predictors = cfg.get_int("robustvs.predictors");
    tc.intercept = cfg.get_bool("robustvs.intercept");
    tc.alpha = cfg.get_double("robustvs.alpha");
    tc.sigma1 = cfg.get_double("robustvs.sigma1");
    tc.sigma2 = cfg.get_double("robustvs.sigma2");
    tc.sigma_beta = cfg.get_double("robustvs.sigma_beta");
    if (meta_out) *meta_out = data.meta;
    return std::make_unique<RobustVsTarget>(tc, std::move(data.X), std::move(data.y));
  }
  if (kind == "dag") {
    LoadedDag data = load_dag_dataset(data_dir);
    DagTargetConfig tc;
    tc.nodes = cfg.get_int("dag.nodes");
    tc.hidden = cfg.get_int("dag.hidden");
    tc.sigma = cfg.get_double("dag.sigma");
    tc.lambda_s = cfg.get_double("dag.lambda_s");
    tc.bias = cfg.get_bool("dag.bias");
    tc.sigma_w = cfg.get_double("dag.sigma_w");
    if (meta_out) *meta_out = data.meta;
    return std::make_unique<DagTarget>(tc, std::move(data.X));
  }
  throw ConfigError("unknown target: " + kind + " (expected robustvs|dag)");
}

std::unique_ptr<ModelSampler> build_sampler(const ExperimentConfig& cfg, const Target& target,
                                            const StreamSeeds& seeds) {
  const std::string kind = cfg.get("sampler");
  IgLimiterConfig ig;
  ig.eps = cfg.get_double("sampler.ig_eps");
  const double cv_beta = cfg.get_double("sampler.cv_beta");

  if (kind == "categorical") {
    if (!target.enumerable())
      throw ConfigError("categorical sampler requires an enumerable model space");
    return std::make_unique<CategoricalSampler>(target.enumerate_models(), ig, cv_beta);
  }
  if (kind == "neural") {
    SlotCodec codec;
    if (cfg.get("target") == "robustvs")
      codec = vs_slot_codec(cfg.get_int("robustvs.predictors"));
    else
      codec = dag_slot_codec(cfg.get_int("dag.nodes"));
    MadePlusConfig mc;
    mc.hidden = cfg.get_int("sampler.hidden");
    mc.blocks = cfg.get_int("sampler.blocks");
    return std::make_unique<MadePlusSampler>(std::move(codec), mc, seeds.init ^ 0x5A5Au, ig,
                                             cv_beta);
  }
  if (kind == "surrogate") {
    if (!target.enumerable())
      throw ConfigError("surrogate sampler requires an enumerable model space");
    std::vector<ModelIndex> models = target.enumerate_models();
    std::vector<double> log_prior(models.size());
    for (size_t i = 0; i < models.size(); ++i) log_prior[i] = target.log_prior_m(models[i]);
    GpSurrogateConfig gc;
    gc.beta = cfg.get_double("sampler.beta");
    gc.noise_var = cfg.get_double("sampler.noise");
    gc.signal_var = cfg.get_double("sampler.signal");
    gc.lambda_m = cfg.get_double("sampler.lambda_m");
    const std::string diag = cfg.get("sampler.diagonal");
    if (diag == "auto")
      gc.diagonal = models.size() > 512;
    else
      gc.diagonal = diag == "true" || diag == "1" || diag == "yes";
    return std::make_unique<GpSurrogateSampler>(std::move(models), std::move(log_prior), gc);
  }
  throw ConfigError("unknown sampler: " + kind + " (expected categorical|neural|surrogate)");
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  ex.seeds = derive_seeds(static_cast<uint64_t>(cfg.get_long("seed")));
  const std::string data_dir = cfg.get("data");
  if (data_dir.empty()) throw ConfigError("config key 'data' must point at a dataset directory");
  ex.target = build_target(cfg, data_dir, &ex.data_meta);

  ex.store = std::make_unique<ParamStore>();
  Rng init_rng(ex.seeds.init);
  ex.flow = std::make_unique<CosmicFlow>(
      flow_config_from(cfg, ex.target->d_max(), ex.target->feature_dim()), *ex.store, init_rng);
  ex.adam = std::make_unique<Adam>(cfg.get_double("train.lr_phi"));
  ex.sampler = build_sampler(cfg, *ex.target, ex.seeds);

  TrainerConfig tc;
  tc.iters = cfg.get_long("train.iters");
  tc.batch = cfg.get_int("train.batch");
  tc.lr_phi = cfg.get_double("train.lr_phi");
  tc.lr_psi = cfg.get_double("train.lr_psi");
  tc.clip_norm = cfg.get_double("train.clip");
  tc.log_every = cfg.get_long("train.log_every");
  ex.trainer = std::make_unique<Trainer>(*ex.flow, *ex.store, *ex.adam, *ex.sampler, *ex.target,
                                         tc, ex.seeds.models, ex.seeds.z);
  return ex;
}

void run_training(Experiment& ex, const std::string& out_dir, bool resume) {
  ensure_dir(out_dir);
  const std::string ckpt_path = join_path(out_dir, "checkpoint.json");
  if (resume) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_path);
    ex.store->unflatten_values(ck.flow_params);
    ex.adam->bind(*ex.store);
    ex.adam->restore(ck.adam_t, ck.adam_moments);
    ex.sampler->restore(ck.sampler);
    ex.trainer->set_t(ck.extras.t);
    ex.trainer->rng_models().restore_state(ck.extras.rng_models);
    ex.trainer->rng_z().restore_state(ck.extras.rng_z);
  }

  JsonlWriter loss_log(join_path(out_dir, "loss.jsonl"), ex.cfg);
  ex.trainer->run([&](const LossRecord& rec) {
    loss_log.record({{"t", rec.t}, {"loss", rec.loss}, {"entropy", rec.entropy},
                     {"wall_s", rec.wall_s}});
  });

  CheckpointExtras extras;
  extras.t = ex.trainer->t();
  extras.rng_models = ex.trainer->rng_models().serialize_state();
  extras.rng_z = ex.trainer->rng_z().serialize_state();
  save_checkpoint(ckpt_path, *ex.store, *ex.adam, *ex.sampler, extras, ex.cfg);

  if (ex.target->enumerable()) {
    const std::vector<ModelIndex> models = ex.target->enumerate_models();
    CsvWriter qw(join_path(out_dir, "qpsi.csv"), {"model", "q_psi", "log_q_psi"}, ex.cfg);
    for (const ModelIndex& m : models) {
      const double lq = ex.sampler->log_mass(m);
      qw.row({m.str(), CsvWriter::fmt(std::exp(lq)), CsvWriter::fmt(lq)});
    }
  }
}

}  // namespace vti
