// async_lab command-line front end.

#include <CLI11.hpp>

#include <iostream>

#include "async_lab/commands.hpp"

int main(int argc, char** argv) {
  using namespace async_lab;

  CLI::App app{"Asynchronously sampled multi-agent consensus: gains, budgets, simulation"};
  app.require_subcommand(1);

  GlobalOptions opts;
  std::uint64_t seed = 0;
  double tol = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario RNG seed");
  auto* tol_opt = app.add_option("--tol", tol, "consensus tolerance on delta_sq")
                      ->check(CLI::PositiveNumber);

  std::string file;
  std::string theorem;
  std::string out_dir;
  int example = 0;

  auto* design = app.add_subcommand("design", "solve the Riccati gain design and print P, K");
  design->add_option("file", file, "scenario JSON")->required();

  auto* bound = app.add_subcommand("bound", "certified lag budget or error bound");
  bound->add_option("file", file, "scenario JSON")->required();
  bound->add_option("--theorem", theorem, "one of 1, 2, 3, 4, c1, c2, 5")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "4", "c1", "c2", "5"}));

  auto* run = app.add_subcommand("run", "simulate a scenario and write traces");
  run->add_option("file", file, "scenario JSON")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  auto* reproduce = app.add_subcommand("reproduce", "check a built-in example against its goldens");
  reproduce->add_option("--example", example, "example number")
      ->required()
      ->check(CLI::Range(1, 3));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::invalid;
  }
  if (*seed_opt) opts.seed = seed;
  if (*tol_opt) opts.tol = tol;

  if (*design) return cmd_design(file, std::cout, std::cerr);
  if (*bound) return cmd_bound(file, theorem, std::cout, std::cerr);
  if (*run) return cmd_run(file, out_dir, opts, std::cout, std::cerr);
  return cmd_reproduce(example, opts, std::cout, std::cerr);
}
