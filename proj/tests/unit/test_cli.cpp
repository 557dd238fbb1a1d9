#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "cmil/errors.hpp"
#include "cmil/policy.hpp"
#include "cmil_cli/commands.hpp"
#include "cmil_cli/run_config.hpp"

using namespace cmil;
using namespace cmil::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

RunConfig tiny(const std::string& out) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.n_particles = 3;
  cfg.m_train = 6;
  cfg.m_val = 3;
  cfg.m_test = 3;
  cfg.horizon = 12;
  cfg.hidden = 8;
  cfg.epochs = 4;
  cfg.copula_hidden = 4;
  cfg.copula_epochs = 2;
  cfg.n_samples = 5;
  cfg.repetitions = 2;
  cfg.rollouts = 2;
  cfg.out = out;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CMIL_CLI_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config text round trips") {
  RunConfig cfg = tiny("x");
  cfg.copula = "gmm";
  cfg.lr = 0.0125;
  cfg.state = "0.1,0.2";
  const std::string text = render_run_config(cfg);
  const RunConfig back = parse_run_config(text);
  CHECK(render_run_config(back) == text);
  const RunConfig commented = parse_run_config("# a comment\n\nseed = 9\n  hidden=12  \n");
  CHECK(*commented.seed == 9);
  CHECK(commented.hidden == 12);
  CHECK_THROWS_AS(parse_run_config("seed = 1\nlearning_speed = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("seed = one\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("no equals sign\n"), ConfigError);
}

TEST_CASE("config validation") {
  RunConfig cfg = tiny("x");
  cfg.validate();
  cfg.seed.reset();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny("x");
  cfg.components = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny("x");
  cfg.copula_components = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny("x");
  cfg.copula = "frank";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_pairs("0:1, 2:3") == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}});
  CHECK_THROWS_AS(parse_pairs("0-1"), ConfigError);

  const PolicyTrainConfig t = make_train_config(tiny("x"));
  CHECK(t.hidden == 8);
  CHECK(t.marginal.max_epochs == 4);
  CHECK(t.copula_train.max_epochs == 2);
  CHECK(t.seed == 5);
}

TEST_CASE("end-to-end commands are deterministic") {
  TempDir dir("cmil_cli_test");
  std::ostringstream log;
  RunConfig cfg = tiny(dir / "data");
  cmd_gen_data(cfg, log);
  for (const char* leaf : {"train.json", "train.csv", "validation.json", "validation.csv", "test.json", "test.csv",
                           "config.txt"}) {
    CHECK(fs::exists(fs::path(cfg.out) / leaf));
  }
  CHECK(log.str().find("train 6, validation 3, test 3") != std::string::npos);
  const std::string first = slurp(fs::path(cfg.out) / "train.csv");
  cfg.out = dir / "again";
  cmd_gen_data(cfg, log);
  CHECK(slurp(fs::path(cfg.out) / "train.csv") == first);
  CHECK(slurp(fs::path(cfg.out) / "test.json") == slurp(fs::path(dir / "data") / "test.json"));

  RunConfig train = tiny(dir / "uniform");
  train.train_data = dir / "data/train";
  train.val_data = dir / "data/validation";
  train.copula = "uniform";
  cmd_train(train, log);
  CHECK(slurp(fs::path(train.out) / "train.log").find("stage=copula kind=uniform skipped") != std::string::npos);

  train.copula = "kde";
  train.out = dir / "kde1";
  cmd_train(train, log);
  train.out = dir / "kde2";
  cmd_train(train, log);
  CHECK(slurp(dir / "kde1/policy.cmil") == slurp(dir / "kde2/policy.cmil"));

  RunConfig ev = tiny(dir / "eval");
  ev.policy = dir / "kde1/policy.cmil";
  ev.test_data = dir / "data/test";
  ev.swap_policy = dir / "uniform/policy.cmil";
  ev.metrics = "nll,rmse,swap";
  cmd_eval(ev, log);
  const std::string tsv = slurp(dir / "eval/report.tsv");
  CHECK(tsv.find("nll[copula=kde]") != std::string::npos);
  CHECK(tsv.find("rmse[n_samples=5]") != std::string::npos);
  CHECK(tsv.find("nll[marginals=new,copula=old]") != std::string::npos);
  cmd_eval(ev, log);
  CHECK(slurp(dir / "eval/report.tsv") == tsv);

  RunConfig ro = ev;
  ro.out = dir / "rollout";
  cmd_rollout(ro, log);
  const Dataset rolled = load_dataset(dir / "rollout/rollout");
  CHECK(rolled.count() == 2);
  CHECK(rolled.trajectories[0].length() == 12);

  RunConfig ex = ev;
  ex.out = dir / "grid";
  ex.pairs = "0:1,2:5";
  ex.resolution = 8;
  cmd_export_copula(ex, log);
  CHECK(fs::exists(dir / "grid/copula_0_1.txt"));
  CHECK(fs::exists(dir / "grid/copula_2_5.txt"));
}

TEST_CASE("conflicting action dimension fails before training") {
  TempDir dir("cmil_cli_dim");
  std::ostringstream log;
  RunConfig cfg = tiny(dir / "data");
  cmd_gen_data(cfg, log);
  RunConfig train = tiny(dir / "model");
  train.train_data = dir / "data/train";
  train.action_dim = 4;
  CHECK_THROWS_AS(cmd_train(train, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "model"));
  train.action_dim = 6;
  train.n_particles = 4;
  CHECK_THROWS_AS(cmd_train(train, log), ConfigError);
}

TEST_CASE("output directories") {
  TempDir dir("cmil_cli_dirs");
  ensure_directory(dir / "a/b/c");
  CHECK(fs::is_directory(dir / "a/b/c"));
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(ensure_directory(dir / "file/sub"), IoError);
}

TEST_CASE("exit codes") {
  TempDir dir("cmil_cli_exit");
  CHECK(run_cli("gen-data --seed 1 --set n_particles=2 --set m_train=2 --set m_val=1 --set m_test=1 --set horizon=5 "
                "--out " + (dir / "d")) == 0);
  CHECK(run_cli("gen-data --out " + (dir / "e")) == 2);
  CHECK(run_cli("gen-data --seed 1 --copula vine") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train --seed 1 --set train_data=" + (dir / "d/train") + " --set n_particles=2 --set lr=1e9 --set epochs=3 --out " +
                (dir / "m")) == 3);
  CHECK(run_cli("eval --seed 1 --set policy=" + (dir / "missing.cmil") + " --set test_data=" + (dir / "d/test")) == 2);
  std::ofstream(dir / "run.cfg") << "seed = 2\nn_particles = 2\nm_train = 2\nm_val = 1\nm_test = 1\nhorizon = 4\n";
  CHECK(run_cli("gen-data --config " + (dir / "run.cfg") + " --out " + (dir / "f")) == 0);
  CHECK(parse_run_config(slurp(dir / "f/config.txt")).seed == 2u);
}

}  // TEST_SUITE
