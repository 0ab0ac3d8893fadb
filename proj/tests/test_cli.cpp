#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "vti/io.hpp"

namespace {

#ifndef VTI_CLI_PATH
#define VTI_CLI_PATH "./vti"
#endif

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string out_file = "/tmp/vti_cli_test_output.txt";
  const std::string cmd = std::string(VTI_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_data_rows(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  long rows = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    ++rows;
  }
  return rows;
}

const std::string kTmp = "/tmp/vti_cli_t";

}  // namespace

TEST_CASE("simulate: files exist, row counts, byte-identical reruns") {
  std::system(("rm -rf " + kTmp + "a " + kTmp + "b").c_str());
  const std::string common = "simulate --set target=robustvs --set robustvs.misspec=mid --set seed=1";
  RunResult r1 = run_cli(common + " --out " + kTmp + "a");
  REQUIRE(r1.exit_code == 0);
  CHECK(count_data_rows(kTmp + "a/dataset.csv") == 50);
  CHECK(vti::file_exists(kTmp + "a/dataset_meta.json"));

  RunResult r2 = run_cli(common + " --out " + kTmp + "b");
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(kTmp + "a/dataset.csv") == slurp(kTmp + "b/dataset.csv"));

  // first line carries the config hash, seed, and version
  std::ifstream in(kTmp + "a/dataset.csv");
  std::string meta;
  std::getline(in, meta);
  CHECK(meta.find("config_hash=") != std::string::npos);
  CHECK(meta.find("seed=1") != std::string::npos);
  CHECK(meta.find("version=") != std::string::npos);
}

TEST_CASE("simulate: invalid misspecification name exits 2 and lists valid names") {
  RunResult r = run_cli("simulate --set robustvs.misspec=bogus --out " + kTmp + "x");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("none|mid|high") != std::string::npos);
}

TEST_CASE("config: unknown keys are rejected before any compute") {
  RunResult r = run_cli("simulate --set robustvs.wat=1 --out " + kTmp + "x");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("unknown configuration key") != std::string::npos);
}

TEST_CASE("train: smoke run on 2^3 models finishes with a finite loss, then resumes") {
  std::system(("rm -rf " + kTmp + "_train").c_str());
  const std::string data = kTmp + "_train/data";
  const std::string out = kTmp + "_train/run";
  const std::string common_target =
      " --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
      " --set robustvs.n=40 --set seed=3";
  REQUIRE(run_cli("simulate" + common_target + " --out " + data).exit_code == 0);

  const std::string train_cfg = common_target +
                                " --set flow=affine --set flow.hidden=16 --set train.iters=100"
                                " --set train.batch=16 --set train.log_every=20";
  RunResult r = run_cli("train" + train_cfg + " --data " + data + " --out " + out);
  REQUIRE(r.exit_code == 0);
  REQUIRE(vti::file_exists(out + "/checkpoint.json"));
  REQUIRE(vti::file_exists(out + "/loss.jsonl"));
  REQUIRE(vti::file_exists(out + "/qpsi.csv"));

  // loss records are finite
  std::ifstream in(out + "/loss.jsonl");
  std::string line;
  std::getline(in, line);  // metadata record
  long records = 0;
  while (std::getline(in, line)) {
    CHECK(line.find("nan") == std::string::npos);
    CHECK(line.find("inf") == std::string::npos);
    ++records;
  }
  CHECK(records >= 4);

  // resume continues the step counter monotonically
  RunResult r2 = run_cli("train --resume" + train_cfg + " --data " + data + " --out " + out);
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.output.find("trained 200 steps") != std::string::npos);
}

TEST_CASE("train: all three sampler kinds accepted on one configuration") {
  const std::string data = kTmp + "_train/data";  // from the previous case
  for (const std::string s : {"categorical", "neural", "surrogate"}) {
    RunResult r = run_cli(
        "train --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
        " --set flow=affine --set flow.hidden=16 --set train.iters=30 --set train.batch=8"
        " --set sampler=" + s + " --data " + data + " --out " + kTmp + "_train/run_" + s);
    REQUIRE(r.exit_code == 0);
  }
}

TEST_CASE("train: missing dataset exits 4") {
  RunResult r = run_cli("train --data /tmp/definitely_missing_vti --out " + kTmp + "x");
  CHECK(r.exit_code == 4);
}

TEST_CASE("rjmcmc + evaluate: NLL pipeline produces tables") {
  const std::string data = kTmp + "_train/data";
  const std::string run = kTmp + "_train/run";
  const std::string common =
      " --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
      " --set rj.steps=20000 --set rj.burnin=2000 --set rj.thin=10 --set seed=3";
  RunResult rj = run_cli("rjmcmc" + common + " --data " + data + " --out " + kTmp + "_train/rj");
  REQUIRE(rj.exit_code == 0);
  REQUIRE(vti::file_exists(kTmp + "_train/rj/rj_samples.csv"));

  RunResult ev = run_cli(
      "evaluate --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
      " --set flow=affine --set flow.hidden=16 --set eval.min_per_model=10"
      " --rj-samples " + kTmp + "_train/rj/rj_samples.csv" + " --data " + data +
      " --checkpoint-dir " + run + " --out " + kTmp + "_train/eval");
  REQUIRE(ev.exit_code == 0);
  CHECK(vti::file_exists(kTmp + "_train/eval/nll.csv"));
  CHECK(vti::file_exists(kTmp + "_train/eval/scatter.csv"));

  RunResult missing = run_cli("evaluate --data " + data + " --checkpoint-dir /tmp/nowhere_vti");
  CHECK(missing.exit_code == 4);
}

TEST_CASE("oracle subcommand writes per-model evidence") {
  const std::string data = kTmp + "_train/data";
  RunResult r = run_cli(
      "oracle --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
      " --set oracle.nodes=32 --data " + data + " --out " + kTmp + "_train/oracle");
  REQUIRE(r.exit_code == 0);
  CHECK(count_data_rows(kTmp + "_train/oracle/oracle.csv") == 8);

  // --model filters restrict the table
  RunResult f = run_cli(
      "oracle --set target=robustvs --set robustvs.predictors=3 --set robustvs.intercept=false"
      " --set oracle.nodes=32 --model 0x3:3 --data " + data + " --out " + kTmp + "_train/oracle1");
  REQUIRE(f.exit_code == 0);
  CHECK(count_data_rows(kTmp + "_train/oracle1/oracle.csv") == 1);
}

TEST_CASE("dag pipeline: simulate, train briefly, evaluate all four metrics") {
  std::system(("rm -rf " + kTmp + "_dag").c_str());
  const std::string common =
      " --set target=dag --set dag.nodes=3 --set dag.hidden=2 --set dag.n=64 --set seed=5"
      " --set flow=affine --set flow.hidden=16 --set sampler=neural --set sampler.hidden=24";
  REQUIRE(run_cli("simulate" + common + " --out " + kTmp + "_dag/data").exit_code == 0);
  REQUIRE(run_cli("train" + common + " --set train.iters=50 --set train.batch=16 --data " +
                  kTmp + "_dag/data --out " + kTmp + "_dag/run")
              .exit_code == 0);
  RunResult ev = run_cli("evaluate" + common + " --set eval.samples=2000 --data " + kTmp +
                         "_dag/data --checkpoint-dir " + kTmp + "_dag/run --out " + kTmp +
                         "_dag/eval");
  REQUIRE(ev.exit_code == 0);
  REQUIRE(vti::file_exists(kTmp + "_dag/eval/dag_metrics.csv"));
  CHECK(ev.output.find("F1") != std::string::npos);
  CHECK(ev.output.find("AUROC") != std::string::npos);
}

TEST_CASE("sweep: scaled-down cardinality table") {
  std::system(("rm -rf " + kTmp + "_sweep").c_str());
  RunResult r = run_cli(
      "sweep --set sweep.cards=3,4 --set robustvs.intercept=false --set robustvs.n=30"
      " --set flow=affine --set flow.hidden=16 --set train.iters=60 --set train.batch=16"
      " --set rj.steps=5000 --set rj.burnin=500 --set rj.thin=5 --set eval.min_per_model=10"
      " --set seed=6 --out " + kTmp + "_sweep");
  REQUIRE(r.exit_code == 0);
  CHECK(count_data_rows(kTmp + "_sweep/sweep.csv") == 2);
}

TEST_CASE("VTI_OUTPUT_ROOT relocates outputs") {
  std::system(("rm -rf " + kTmp + "_root && mkdir -p " + kTmp + "_root").c_str());
  const std::string cmd = std::string("VTI_OUTPUT_ROOT=") + kTmp + "_root " + VTI_CLI_PATH +
                          " simulate --set robustvs.predictors=3 --set seed=9 --out nested/ds "
                          "> /dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(vti::file_exists(kTmp + "_root/nested/ds/dataset.csv"));
}
