#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fsq/config.hpp"
#include "fsq/dqn_agent.hpp"
#include "fsq/envs.hpp"
#include "fsq/fsq_agent.hpp"
#include "fsq/types.hpp"

namespace fsq {

// Exit codes shared by the CLI subcommands.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitExhausted = 2;  // episode budget spent, threshold unmet
inline constexpr int kExitNumeric = 3;

inline constexpr const char* kCurveHeader = "episode,steps,return,epsilon,mean_loss";

void write_curve_row(std::ostream& out, const EpisodeRecord& rec);
std::vector<EpisodeRecord> read_curve_csv(std::istream& in);

/// Rolling mean of the last `window` returns; shorter prefixes average what
/// exists so far.
class RollingMean {
 public:
  explicit RollingMean(std::size_t window = 100) : window_(window) {}
  void push(Scalar value);
  Scalar mean() const { return count_ ? sum_ / static_cast<Scalar>(count_) : 0.0; }
  bool full() const { return count_ == window_; }

 private:
  std::size_t window_;
  std::vector<Scalar> ring_;
  std::size_t next_ = 0;
  std::size_t count_ = 0;
  Scalar sum_ = 0;
};

/// Success bar for an environment's rolling-100 mean return. For
/// point_reacher this is within 10% of the straight-line-optimal mean
/// (exactly 90% of it when that mean is positive); the other environments
/// carry fixed desk-scale bars.
Scalar default_success_threshold(const Environment& env);

/// Static line chart of the rolling mean return.
void write_curve_svg(std::ostream& out, const std::vector<EpisodeRecord>& records,
                     std::size_t window = 100);

struct TrainOutcome {
  int exit_code = kExitExhausted;
  std::vector<EpisodeRecord> records;
  Scalar threshold = 0;
  Scalar best_rolling_mean = 0;
  int success_episode = -1;  // first episode whose rolling-100 mean met the bar
};

/// Full training run: writes curve.csv, curve.svg and checkpoint.ckpt into
/// config.out_dir, prints the rolling mean, returns 0 once the environment's
/// success bar is met (2 if the budget runs out first, 3 on numeric abort).
TrainOutcome run_train(const RunConfig& config, std::ostream& log);

/// Greedy rollouts from a checkpoint; returns the mean return.
struct EvalOutcome {
  int exit_code = kExitSuccess;
  Scalar mean_return = 0;
  std::vector<Scalar> returns;
};
EvalOutcome run_eval(const std::string& checkpoint_path, const std::string& env_name,
                     int episodes, std::uint64_t seed, std::ostream& log);

/// One row of the discretization report.
struct BenchRow {
  int dims;
  std::uint64_t fsq_heads;          // 3m
  Scalar cartesian_actions;         // k^m, exact below 2^63
  Scalar ratio;                     // k^m / 3m
};
std::vector<BenchRow> bench_discretization(const std::vector<int>& m_list, int k);
void print_bench_report(std::ostream& out, const std::vector<BenchRow>& rows, int k);

struct OracleCheckOutcome {
  int exit_code = kExitFailed;
  Scalar max_deviation = 0;
  Scalar tolerance = 0;
  int episodes_used = 0;
};

/// Trains on lattice_mdp with a one-hot tabular encoding and compares the
/// learned lattice Q-values against exact value iteration. Passes when the
/// worst deviation is within 5% of the reward span. Dumps q_star.csv and
/// q_learned.csv into config.out_dir.
OracleCheckOutcome run_oracle_check(const RunConfig& config, std::ostream& log);

/// Checkpoint glue: parameters of both nets plus a config echo block.
void save_agent_checkpoint(const std::string& path, const RunConfig& config,
                           const QNetwork& online, const QNetwork& target);

}  // namespace fsq
