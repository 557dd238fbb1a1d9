#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmil/errors.hpp"
#include "cmil/text_io.hpp"
#include "cmil_cli/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> copula;
  std::optional<int> n_samples;
  std::vector<std::string> sets;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value configuration file");
  cmd->add_option("--seed", f.seed, "overrides 'seed'");
  cmd->add_option("--out", f.out, "output directory, overrides 'out'");
  cmd->add_option("--copula", f.copula, "overrides 'copula'")->check(CLI::IsMember({"uniform", "kde", "gmm"}));
  cmd->add_option("--n-samples", f.n_samples, "overrides 'n_samples'");
  cmd->add_option("--set", f.sets, "extra key=value overrides, applied last");
}

cmil::cli::RunConfig resolve(const Flags& f) {
  cmil::cli::RunConfig cfg;
  if (!f.config.empty()) cfg = cmil::cli::parse_run_config(cmil::text::read_file(f.config));
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.copula) cfg.copula = *f.copula;
  if (f.n_samples) cfg.n_samples = *f.n_samples;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cmil::ConfigError("--set expects key=value, got '" + kv + "'");
    cmil::cli::set_key(cfg, cmil::text::trim(std::string_view(kv).substr(0, eq)),
                       cmil::text::trim(std::string_view(kv).substr(eq + 1)));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmil: copula-factorized multi-agent imitation learning"};
  app.require_subcommand(1);
  Flags flags;
  using Command = void (*)(const cmil::cli::RunConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"gen-data", "generate train/validation/test demonstrations", cmil::cli::cmd_gen_data},
      {"train", "train a policy bundle", cmil::cli::cmd_train},
      {"eval", "evaluate NLL, RMSE or the marginal/copula swap", cmil::cli::cmd_eval},
      {"rollout", "generate trajectories with a trained policy", cmil::cli::cmd_rollout},
      {"export-copula", "write pairwise copula density grids", cmil::cli::cmd_export_copula},
  };
  Command chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(sub, flags);
    sub->callback([&chosen, fn = fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    chosen(resolve(flags), std::cout);
  } catch (const cmil::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const cmil::RolloutDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const cmil::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
