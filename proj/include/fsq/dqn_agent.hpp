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

/// Finite action set over a continuous box.
struct DiscreteActionSet {
  std::vector<Vector> actions;
  std::size_t count() const { return actions.size(); }
};

/// k equally spaced levels per coordinate (both endpoints included), full
/// cartesian product: k^m actions. Throws BlowupError, naming the count,
/// before allocating anything when k^m exceeds the cap.
DiscreteActionSet cartesian_discretize(const ActionSpaceSpec& spec, int k,
                                       std::uint64_t cap = 1000000);

struct DqnTransition {
  Vector state;
  int action_index = 0;
  Scalar reward = 0;
  Vector state_next;
  bool terminal = false;
};

/// Baseline DQN over a finite action set: one output head per action,
/// epsilon-greedy selection, replayed squared-error updates on the taken
/// head only, and a target net synced every C steps.
class DqnAgent {
 public:
  using Encoder = std::function<Vector(const Vector& state)>;

  DqnAgent(DiscreteActionSet actions, Index state_dim, AgentConfig config,
           RngStream& init_rng, Encoder encoder = nullptr, Index encoded_dim = 0);

  int select_action(const Vector& state, RngStream& rng) const;
  std::optional<Scalar> learn_step(RngStream& rng);
  std::vector<EpisodeRecord> train(Environment& env, int episodes, RngPool& rngs,
                                   const EpisodeSink& sink = nullptr);

  Vector encode(const Vector& state) const;

  const QNetwork& online() const { return online_; }
  QNetwork& online() { return online_; }
  const QNetwork& target() const { return target_; }
  const DiscreteActionSet& actions() const { return actions_; }
  const AgentConfig& config() const { return config_; }
  ReplayBuffer<DqnTransition>& buffer() { return buffer_; }
  std::int64_t global_step() const { return global_step_; }
  Scalar epsilon() const { return epsilon_; }
  void set_epsilon(Scalar e) { epsilon_ = e; }
  std::uint64_t numeric_abort_count() const { return numeric_aborts_; }
  void set_planned_steps(std::int64_t steps) { planned_steps_ = steps; }
  void load_parameters(const QNetwork& online, const QNetwork& target);

 private:
  DiscreteActionSet actions_;
  Index state_dim_;
  AgentConfig config_;
  Encoder encoder_;
  Index input_dim_;
  QNetwork online_;
  QNetwork target_;
  AdamState optimizer_;
  ReplayBuffer<DqnTransition> buffer_;
  Scalar epsilon_;
  std::int64_t global_step_ = 0;
  std::int64_t planned_steps_ = 0;
  std::uint64_t numeric_aborts_ = 0;
};

/// Convenience wrapper mirroring the FSQ training entry point.
std::vector<EpisodeRecord> dqn_train(Environment& env,
                                     const DiscreteActionSet& actions,
                                     const AgentConfig& config, int episodes,
                                     RngPool& rngs, const EpisodeSink& sink = nullptr);

}  // namespace fsq
