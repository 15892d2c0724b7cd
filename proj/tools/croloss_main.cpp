#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "croloss/trainer.hpp"

namespace {

using croloss::ConfigError;
using croloss::RunConfig;
namespace cli = croloss::cli;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  cmd->add_option("--config", args.config_path, "run configuration file")
      ->required(config_required);
  cmd->add_option("--set", args.overrides,
                  "override one config key, e.g. --set loss.alpha=1.2")
      ->take_all();
  cmd->add_option("--seed", args.seed,
                  "override data.seed, model.seed, and train.seed at once");
  cmd->add_option("--output-dir", args.output_dir, "override output_dir");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = croloss::parse_config_file(args.config_path);
  }
  for (const std::string& pair : args.overrides) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + pair + "'");
    }
    croloss::apply_config_value(cfg, pair.substr(0, eq), pair.substr(eq + 1));
  }
  if (args.seed >= 0) {
    const std::string s = std::to_string(args.seed);
    croloss::apply_config_value(cfg, "data.seed", s);
    croloss::apply_config_value(cfg, "model.seed", s);
    croloss::apply_config_value(cfg, "train.seed", s);
  }
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"croloss: recall-oriented retrieval losses, two-tower training, "
               "and full-catalog evaluation"};
  app.require_subcommand(1);

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model and report test recall");
  add_common(train, train_args, true);

  CommonArgs eval_args;
  std::string checkpoint, split = "test", report_path;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval, eval_args, true);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--split", split, "train | validation | test (default test)");
  eval->add_option("--report", report_path, "also write the report as JSON here");

  CommonArgs sweep_args;
  int jobs = 1;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "train a kernel x alpha grid and print a consolidated table");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--jobs", jobs, "parallel sweep cells (default 1)");

  bool quick = false;
  std::int64_t gradcheck_seed = 1771;
  double corrupt = 1.0;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "run the gradient and equivalence check battery");
  gradcheck->add_flag("--quick", quick, "reduced battery, finishes in seconds");
  gradcheck->add_option("--seed", gradcheck_seed, "battery seed");
  gradcheck
      ->add_option("--corrupt-kernel-deriv", corrupt,
                   "test hook: scale analytic kernel derivatives by this factor")
      ->group("");  // hidden

  CommonArgs inspect_args;
  CLI::App* inspect =
      app.add_subcommand("inspect-data", "dataset and split statistics");
  add_common(inspect, inspect_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return cli::kExitConfig;
  }

  try {
    if (train->parsed()) return cli::cmd_train(resolve_config(train_args));
    if (eval->parsed()) {
      return cli::cmd_eval(resolve_config(eval_args), checkpoint, split,
                           report_path);
    }
    if (sweep->parsed()) return cli::cmd_sweep(resolve_config(sweep_args), jobs);
    if (gradcheck->parsed()) {
      return cli::cmd_gradcheck(quick, static_cast<std::uint64_t>(gradcheck_seed),
                                corrupt);
    }
    if (inspect->parsed()) return cli::cmd_inspect_data(resolve_config(inspect_args));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const croloss::TrainingDiverged& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return cli::kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
  return cli::kExitConfig;
}
