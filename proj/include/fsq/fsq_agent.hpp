#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fsq/envs.hpp"
#include "fsq/network.hpp"
#include "fsq/replay.hpp"
#include "fsq/rng.hpp"
#include "fsq/types.hpp"

namespace fsq {

/// Maps a raw (state, action) pair to the network input. The default is
/// plain concatenation; the oracle check swaps in a one-hot tabular code.
using StateEncoder = std::function<Vector(const Vector& state, const Vector& action)>;

struct ActResult {
  Vector executed_action;   // what the environment receives
  DirectionVector direction;
  Vector next_action;       // integrated action carried into the next step
};

struct TargetBatch {
  Matrix y;         // 3m x B, defined only where mask is set
  BoolArray mask;   // exactly m set entries per column, one per partition
};

/// Finite-step Q agent: per-coordinate epsilon-greedy direction choice over
/// 3-head partitions, action integration on the step lattice, and a replayed
/// temporal-difference update with a delayed target network.
class FsqAgent {
 public:
  /// init_rng seeds the network weights. Passing an encoder (with its output
  /// width) replaces the default state-action concatenation.
  FsqAgent(ActionSpaceSpec spec, Index state_dim, AgentConfig config,
           RngStream& init_rng, StateEncoder encoder = nullptr,
           Index encoded_dim = 0);

  /// Direction per coordinate: uniform with probability epsilon, otherwise
  /// the argmax head of that coordinate's partition (ties to the lowest head).
  DirectionVector select_directions(const AuxiliaryState& v, RngStream& rng) const;

  /// Select directions at (state, action), integrate the action, and pick
  /// which of the two actions the environment receives.
  ActResult act(const Vector& state, const Vector& action, RngStream& rng) const;

  /// Bootstrapped targets for every partition of every transition,
  /// simultaneously; the mask marks the single head per partition that
  /// carries the target.
  TargetBatch build_targets(const std::vector<const Transition*>& batch) const;

  /// One replayed gradient step. Returns the minibatch loss, or nullopt if
  /// the buffer is not ready or the step was aborted on a numeric fault.
  /// Counts global steps and syncs the target net every C of them.
  std::optional<Scalar> learn_step(RngStream& rng);

  std::vector<EpisodeRecord> train(Environment& env, int episodes, RngPool& rngs,
                                   const EpisodeSink& sink = nullptr);

  Vector encode(const Vector& state, const Vector& action) const;
  /// Column-per-sample encoding of stored transitions.
  Matrix encode_batch(const std::vector<const Transition*>& batch, bool next) const;

  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  QNetwork& online() { return online_; }
  void sync_target() { target_ = clone_parameters(online_); }

  ReplayBuffer<Transition>& buffer() { return buffer_; }
  const ReplayBuffer<Transition>& buffer() const { return buffer_; }

  const ActionSpaceSpec& action_spec() const { return spec_; }
  const AgentConfig& config() const { return config_; }
  Index state_dim() const { return state_dim_; }

  Scalar epsilon() const { return epsilon_; }
  void set_epsilon(Scalar e) { epsilon_ = e; }
  std::int64_t global_step() const { return global_step_; }
  std::uint64_t numeric_abort_count() const { return numeric_aborts_; }

  /// Steps the whole run is expected to take; drives the PER beta anneal.
  void set_planned_steps(std::int64_t steps) { planned_steps_ = steps; }

  /// Restore parameters (online and target) from checkpoint arrays.
  void load_parameters(const QNetwork& online, const QNetwork& target);

 private:
  ActionSpaceSpec spec_;
  Index state_dim_;
  AgentConfig config_;
  StateEncoder encoder_;
  Index input_dim_;
  QNetwork online_;
  QNetwork target_;
  AdamState optimizer_;
  ReplayBuffer<Transition> buffer_;
  Scalar epsilon_;
  std::int64_t global_step_ = 0;
  std::int64_t planned_steps_ = 0;
  std::uint64_t numeric_aborts_ = 0;
};

/// Head with the largest value among the three partition rows starting at
/// `offset`; ties break toward the lowest index.
int argmax3(const Matrix& q, Index offset, Index col);
int argmax3(const Vector& q, Index offset);

}  // namespace fsq
