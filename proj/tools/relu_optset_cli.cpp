#include "relu_optset/config.hpp"
#include "relu_optset/errors.hpp"
#include "relu_optset/run.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

using namespace relu_optset;

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("relu-optset");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("RELU_OPTSET_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Constrained group lasso tools for two-layer ReLU networks"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  bool show_config = false;
  app.add_option("command", command, "Subcommand")->required()->check(CLI::IsMember(commands()));
  app.add_option("--config", config_path, "Experiment config (INI)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override [experiment] seed");
  auto* out_opt = app.add_option("--out", out_dir, "Override [output] dir");
  app.add_flag("--show-config", show_config, "Print the effective config and exit");
  app.footer("Exit codes: 0 ok, 1 other failure, 2 parse/input error, 3 solver failure, 4 certificate failure.\n"
             "Log level: RELU_OPTSET_LOG_LEVEL=trace|debug|info|warn|err|off (default warn).");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kParseError;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    else if (!show_config) throw InputError("--config is required");
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.out_dir = out_dir;
    if (show_config) {
      std::cout << to_ini(cfg);
      return kOk;
    }
    return run(command, cfg);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
}
