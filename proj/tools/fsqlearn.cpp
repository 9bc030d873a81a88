// fsqlearn: train and inspect finite-step Q-learning agents on the bundled
// desk-scale environments.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fsq/harness.hpp"

namespace {

fsq::RunConfig load_or_default(const std::string& path) {
  if (path.empty()) return fsq::RunConfig{};
  return fsq::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite Step Q-learning toolkit"};
  app.require_subcommand(1);

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train an agent and write curve.csv");
  std::string train_config, train_env, train_algo, train_out;
  std::optional<std::int64_t> train_seed;
  std::optional<int> train_episodes;
  train->add_option("--config", train_config, "key=value config file");
  train->add_option("--env", train_env, "point_reacher | mountain_car | lattice_mdp");
  train->add_option("--algo", train_algo, "fsq | dqn");
  train->add_option("--seed", train_seed, "master seed");
  train->add_option("--episodes", train_episodes, "episode budget");
  train->add_option("--out", train_out, "output directory");

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "greedy rollouts from a checkpoint");
  std::string eval_ckpt, eval_env;
  int eval_episodes = 10;
  std::int64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint.ckpt path")->required();
  eval->add_option("--env", eval_env, "environment override");
  eval->add_option("--episodes", eval_episodes, "number of rollouts");
  eval->add_option("--seed", eval_seed, "rollout seed");

  // oracle-check -----------------------------------------------------------
  auto* oracle = app.add_subcommand(
      "oracle-check", "compare learned lattice Q-values with value iteration");
  std::string oracle_config;
  oracle->add_option("--config", oracle_config, "key=value config file")->required();

  // bench-discretization ----------------------------------------------------
  auto* bench = app.add_subcommand(
      "bench-discretization", "3m direction heads vs k^m cartesian actions");
  std::vector<int> bench_dims{1, 2, 4, 10};
  int bench_levels = 3;
  bench->add_option("--dims", bench_dims, "action dimensionalities to tabulate")
      ->delimiter(',');
  bench->add_option("--levels", bench_levels, "grid levels k per coordinate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      fsq::RunConfig config = load_or_default(train_config);
      if (!train_env.empty()) config.env_name = train_env;
      if (!train_algo.empty()) {
        if (train_algo == "fsq") config.algo = fsq::Algo::fsq;
        else if (train_algo == "dqn") config.algo = fsq::Algo::dqn;
        else throw fsq::ConfigError("--algo must be fsq or dqn");
      }
      if (train_seed) config.seed = static_cast<std::uint64_t>(*train_seed);
      if (train_episodes) config.episodes = *train_episodes;
      if (!train_out.empty()) config.out_dir = train_out;
      return fsq::run_train(config, std::cout).exit_code;
    }
    if (*eval) {
      return fsq::run_eval(eval_ckpt, eval_env, eval_episodes,
                           static_cast<std::uint64_t>(eval_seed), std::cout)
          .exit_code;
    }
    if (*oracle) {
      return fsq::run_oracle_check(fsq::load_config(oracle_config), std::cout)
          .exit_code;
    }
    if (*bench) {
      const auto rows = fsq::bench_discretization(bench_dims, bench_levels);
      fsq::print_bench_report(std::cout, rows, bench_levels);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fsq::kExitFailed;
  }
  return 0;
}
