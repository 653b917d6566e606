#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ouc/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
};

int run(const std::string& command, const Flags& flags) {
  ouc::ExperimentConfig cfg = ouc::load_config(flags.config);
  if (flags.seed_given) cfg.seed = flags.seed;
  const ouc::RunOptions opt{flags.out, ouc::resolve_threads(flags.threads)};
  ouc::Json summary;
  if (command == "analyze") {
    summary = ouc::cmd_analyze(cfg, opt);
  } else if (command == "simulate") {
    summary = ouc::cmd_simulate(cfg, opt);
  } else if (command == "cutoff") {
    summary = ouc::cmd_cutoff(cfg, opt);
  } else {
    summary = ouc::cmd_figure1(cfg, opt);
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cutoff stability experiments for Ornstein-Uhlenbeck systems"};
  app.set_version_flag("--version", std::string(ouc::version()));
  app.require_subcommand(1, 1);
  Flags flags;
  for (const char* name : {"analyze", "simulate", "cutoff", "figure1"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory (overrides config 'out')");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&flags](const std::uint64_t& s) { flags.seed = s, flags.seed_given = true; },
        "master seed (overrides config)");
    sub->add_option("--threads", flags.threads, "worker threads (0: hardware parallelism)");
  }
  app.get_subcommand("analyze")->description("spectrum, flags and decay rate");
  app.get_subcommand("simulate")->description("sample paths and stationary draws");
  app.get_subcommand("cutoff")->description("dichotomy sweep, window profile, observable check");
  app.get_subcommand("figure1")->description("oscillator band curve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), flags);
  } catch (const ouc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ouc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
