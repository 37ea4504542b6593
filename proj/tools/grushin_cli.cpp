#include <iostream>

#include <CLI11.hpp>

#include "grushin/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Grushin singular Brezis-Nirenberg solver suite"};
  app.require_subcommand(1);
  app.fallthrough();

  grushin::cli::RunOptions opts;
  std::string config, out;
  int jobs = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "Config file (built-in defaults when omitted)");
  app.add_option("--out", out, "Output directory (overrides GSL_OUT)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");

  const char* descriptions[][2] = {
      {"torsion", "Torsion function and positivity report"},
      {"singular", "Purely singular solution and barrier report"},
      {"branch", "Lambda sweep, extremal bracket and nonexistence probe"},
      {"second", "Mountain-pass search for a second solution"},
      {"verify", "Full property harness"},
  };
  for (auto& d : descriptions) {
    app.add_subcommand(d[0], d[1])->callback([&opts, name = std::string(d[0])]() { opts.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!config.empty()) opts.config_path = config;
  if (!out.empty()) opts.out_dir = out;
  if (jobs_opt->count()) opts.jobs = jobs;
  if (seed_opt->count()) opts.seed = seed;
  return grushin::cli::run(opts, std::cout, std::cerr);
}
