#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "fsq/types.hpp"

namespace fsq {

enum class Algo { fsq, dqn };

std::string to_string(Algo a);
std::string to_string(TargetIndexMode m);

/// Everything one training run needs. File format is flat key=value lines;
/// '#' starts a comment, unknown keys are rejected, missing keys keep the
/// defaults below.
struct RunConfig {
  std::string env_name = "point_reacher";
  Algo algo = Algo::fsq;
  AgentConfig agent;           // defaults match the shipped hyperparameter table
  Scalar delta_a = 0.75;       // lattice step per action coordinate
  int episodes = 500;
  std::uint64_t seed = 0;
  std::string out_dir = "run_out";
  int dqn_levels = 3;          // k for the cartesian baseline
  int lattice_states = 3;      // chain length for lattice_mdp
  std::optional<Scalar> success_threshold;  // unset: per-environment default

  void validate() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(std::istream& in);

/// Exact inverse of parsing: every key, full double precision.
void save_config(std::ostream& out, const RunConfig& config);
std::string config_echo(const RunConfig& config);
RunConfig config_from_echo(const std::map<std::string, std::string>& kv);

}  // namespace fsq
