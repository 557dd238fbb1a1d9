#include "cmil_cli/commands.hpp"

#include <filesystem>
#include <fstream>

#include "cmil/errors.hpp"
#include "cmil/eval.hpp"
#include "cmil/rollout.hpp"
#include "cmil/text_io.hpp"

namespace cmil::cli {

namespace fs = std::filesystem;

namespace {

std::string in_out(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out) / name).string(); }

const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("config: '") + key + "' is required for this command");
  return value;
}

// Fail before any training when the dataset disagrees with the configuration.
void check_dataset_against_config(const RunConfig& cfg, const Dataset& ds) {
  if (cfg.action_dim > 0 && ds.meta.action_dim != cfg.action_dim) {
    throw ConfigError("dataset has D = " + std::to_string(ds.meta.action_dim) + " but config sets action_dim = " +
                      std::to_string(cfg.action_dim));
  }
  if (ds.meta.env == "physim" && cfg.env == "physim" && ds.meta.action_dim != 2 * cfg.n_particles) {
    throw ConfigError("dataset has D = " + std::to_string(ds.meta.action_dim) + " but config n_particles = " +
                      std::to_string(cfg.n_particles) + " implies D = " + std::to_string(2 * cfg.n_particles));
  }
}

}  // namespace

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "': " + (ec ? ec.message() : "not a directory"));
  }
}

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const EnvConfig env = make_env_config(cfg);
  const DatasetSplits splits = generate_splits(env, cfg.m_train, cfg.m_val, cfg.m_test, cfg.horizon, *cfg.seed);
  ensure_directory(cfg.out);
  save_dataset(splits.train, in_out(cfg, "train"));
  save_dataset(splits.validation, in_out(cfg, "validation"));
  save_dataset(splits.test, in_out(cfg, "test"));
  text::write_file(in_out(cfg, "config.txt"), render_run_config(cfg));
  log << "env " << env_tag(env) << ": train " << splits.train.count() << ", validation " << splits.validation.count()
      << ", test " << splits.test.count() << " trajectories of " << cfg.horizon << " steps written to " << cfg.out
      << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Dataset train = load_dataset(require_path(cfg.train_data, "train_data"));
  check_dataset_against_config(cfg, train);
  std::optional<Dataset> val;
  if (!cfg.val_data.empty()) {
    val = load_dataset(cfg.val_data);
    check_dataset_against_config(cfg, *val);
  }
  ensure_directory(cfg.out);
  const TrainedPolicy result = train_policy(train, make_train_config(cfg), val ? &*val : nullptr);
  save_policy(result.policy, in_out(cfg, "policy.cmil"));
  std::ofstream f(in_out(cfg, "train.log"), std::ios::app | std::ios::binary);
  if (!f) throw IoError("cannot open " + in_out(cfg, "train.log"));
  f << "# run seed=" << *cfg.seed << " copula=" << cfg.copula << " data=" << cfg.train_data << "\n"
    << result.log.render();
  log << "trained " << cfg.copula << " policy: marginal epochs " << result.log.marginal.epochs_run
      << (result.log.copula_stage_skipped ? ", copula stage skipped" : "") << "; wrote " << in_out(cfg, "policy.cmil")
      << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const CopulaPolicy p = load_policy(require_path(cfg.policy, "policy"));
  const Dataset test = load_dataset(require_path(cfg.test_data, "test_data"));
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < cfg.repetitions; ++r) seeds.push_back(derive_seed(*cfg.seed, static_cast<std::uint64_t>(r)));

  std::vector<EvalReport> reports;
  for (auto metric : text::split(cfg.metrics, ',')) {
    metric = text::trim(metric);
    if (metric.empty()) continue;
    if (metric == "nll") {
      reports.push_back(eval_nll(p, test));
    } else if (metric == "rmse") {
      reports.push_back(eval_rmse(p, test, cfg.n_samples, seeds));
    } else if (metric == "swap") {
      const CopulaPolicy other = load_policy(require_path(cfg.swap_policy, "swap_policy"));
      for (auto& r : eval_swap(p, other, test)) reports.push_back(std::move(r));
    } else {
      throw ConfigError("unknown metric '" + std::string(metric) + "' (expected nll, rmse or swap)");
    }
  }
  ensure_directory(cfg.out);
  text::write_file(in_out(cfg, "report.txt"), render_table(reports));
  text::write_file(in_out(cfg, "report.tsv"), render_tsv(reports));
  log << render_table(reports);
}

void cmd_rollout(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const CopulaPolicy p = load_policy(require_path(cfg.policy, "policy"));
  const Dataset test = load_dataset(require_path(cfg.test_data, "test_data"));
  std::vector<Eigen::VectorXd> starts;
  for (const auto& traj : test.trajectories) {
    if (static_cast<int>(starts.size()) == cfg.rollouts) break;
    if (!traj.steps.empty()) starts.push_back(traj.steps.front().state);
  }
  if (starts.empty()) throw NotEnoughData("rollout: test data has no initial states");
  const Dataset out = rollout_dataset(p, make_env_config(cfg), starts, cfg.horizon - 1, cfg.n_samples,
                                      derive_seed(*cfg.seed, 0x5011ULL));
  ensure_directory(cfg.out);
  save_dataset(out, in_out(cfg, "rollout"));
  log << "wrote " << out.count() << " rollouts of " << cfg.horizon << " steps to " << in_out(cfg, "rollout") << "\n";
}

void cmd_export_copula(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const CopulaPolicy p = load_policy(require_path(cfg.policy, "policy"));
  std::optional<Eigen::VectorXd> state;
  if (!cfg.state.empty()) {
    const auto v = text::split_doubles(cfg.state, ',');
    state = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else if (is_state_dependent(p.copula)) {
    state = Eigen::VectorXd::Zero(p.marginals.state_dim());
  }
  ensure_directory(cfg.out);
  for (const auto& [a, b] : parse_pairs(cfg.pairs)) {
    const Eigen::MatrixXd grid = export_copula_grid(p, a, b, cfg.resolution, state ? &*state : nullptr);
    const std::string path = in_out(cfg, "copula_" + std::to_string(a) + "_" + std::to_string(b) + ".txt");
    text::write_file(path, render_grid(grid, a, b, copula_kind(p.copula)));
    log << "wrote " << path << "\n";
  }
}

}  // namespace cmil::cli
