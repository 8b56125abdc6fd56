// Command-line driver: run <config>, verify [--full], benchmark <spec>.

#include <iostream>

#include <CLI11.hpp>

#include "spinstar/cli/benchmark.hpp"
#include "spinstar/cli/run.hpp"
#include "spinstar/cli/verify.hpp"

int main(int argc, char** argv) {
  namespace cli = spinstar::cli;

  CLI::App app{"Exact dynamics of the XX central spin model in a fixed magnetization sector"};
  app.set_version_flag("--version", SPINSTAR_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Evolve one configured instance and write CSV + manifest");
  run->add_option("config", config_path, "JSON run configuration")->required();

  bool full = false;
  int max_n = 0;
  int seeds = 0;
  auto* verify = app.add_subcommand("verify", "Cross-path and oracle property suite");
  verify->add_flag("--full", full, "N <= 8 with 20 seeds (default: N <= 5 with 5 seeds)");
  verify->add_option("--max-n", max_n, "Override the largest N");
  verify->add_option("--seeds", seeds, "Override the number of seeds per N");

  std::string spec_path;
  auto* bench = app.add_subcommand("benchmark", "Time build, decompose and evolve per (N, p)");
  bench->add_option("spec", spec_path, "JSON benchmark specification")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_code::invalid;
  }

  spinstar::ResourceLimits limits;
  const int env_status = cli::guarded(std::cerr, [&] {
    limits = spinstar::ResourceLimits::from_environment();
    return 0;
  });
  if (env_status != 0) return env_status;

  if (run->parsed()) return cli::run_command(config_path, std::cout, std::cerr, limits);
  if (verify->parsed()) {
    auto opt = full ? cli::VerifyOptions::full() : cli::VerifyOptions::quick();
    if (verify->count("--max-n")) opt.max_n = max_n;
    if (verify->count("--seeds")) opt.seeds = seeds;
    return cli::verify_command(opt, std::cout, std::cerr);
  }
  return cli::benchmark_command(spec_path, std::cout, std::cerr, limits);
}
