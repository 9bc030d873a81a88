#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fsq/oracle.hpp"
#include "fsq/rng.hpp"
#include "fsq/types.hpp"

namespace fsq {

struct EnvDescriptor {
  std::string name;
  Index state_dim = 0;
  ActionSpaceSpec action_spec;
  int max_steps = 0;
};

struct StepResult {
  Vector state;
  Scalar reward = 0;
  bool terminal = false;
};

/// Episodic environment. step() clips out-of-box actions (counted) and
/// throws ProtocolError when called before reset or after a terminal step.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvDescriptor& descriptor() const { return desc_; }

  Vector reset(RngStream& rng) {
    awaiting_reset_ = false;
    return do_reset(rng);
  }

  StepResult step(const Vector& action);

  std::uint64_t clip_warning_count() const { return clip_warnings_; }

 protected:
  explicit Environment(EnvDescriptor desc) : desc_(std::move(desc)) {}
  virtual Vector do_reset(RngStream& rng) = 0;
  virtual StepResult do_step(const Vector& action) = 0;
  void mark_ready() { awaiting_reset_ = false; }

 private:
  EnvDescriptor desc_;
  bool awaiting_reset_ = true;
  std::uint64_t clip_warnings_ = 0;
};

/// Planar reacher: position in [-2,2]^2, target at the origin. One Euler
/// step per action, reward -|p'| each step, +10 bonus on entering the goal
/// ball of radius 0.05 (terminal).
class PointReacher : public Environment {
 public:
  explicit PointReacher(Scalar h = 0.05, int max_steps = 100, Scalar delta_a = 0.75);

  static constexpr Scalar kGoalRadius = 0.05;
  static constexpr Scalar kGoalBonus = 10.0;
  static constexpr Scalar kBoxHalfWidth = 2.0;

  /// Return of the straight-line max-speed policy from p0: each step shrinks
  /// the distance by h*|p0|_2/|p0|_inf until the goal ball is entered.
  static Scalar optimal_return(const Vector& p0, Scalar h = 0.05);

  /// Mean of optimal_return over uniform starts, by midpoint quadrature.
  static Scalar mean_optimal_return(Scalar h = 0.05, int grid = 200);

  /// Deterministic start for evaluation from a chosen position.
  Vector reset_to(const Vector& position);

 protected:
  Vector do_reset(RngStream& rng) override;
  StepResult do_step(const Vector& action) override;

 private:
  Scalar h_;
  Vector position_;
};

/// Classic continuous mountain car: 1-dim throttle in [-1,1], reward
/// -0.1*a^2 per step, +100 on reaching position >= 0.45.
class ContinuousMountainCar : public Environment {
 public:
  explicit ContinuousMountainCar(Scalar delta_a = 0.75);

  static constexpr Scalar kGoalPosition = 0.45;
  static constexpr Scalar kGoalReward = 100.0;

  Vector reset_to(Scalar position, Scalar velocity);

 protected:
  Vector do_reset(RngStream& rng) override;
  StepResult do_step(const Vector& action) override;

 private:
  Scalar position_ = 0;
  Scalar velocity_ = 0;
};

/// Scalar chain of n states driven through a lattice action in [-1,1].
/// The action moves the state by its sign bucket; reward +1 on the right
/// edge, -1 on the left edge. Never terminal (episodes truncate at T), so
/// the (state x lattice-action) product is an exact finite MDP.
class LatticeMdp : public Environment {
 public:
  LatticeMdp(int n_states, Scalar delta_a, int max_steps = 40);

  int n_states() const { return n_states_; }
  /// Lattice points {-1, -1+delta, ..., 1}.
  int n_lattice_actions() const { return n_lattice_; }
  Scalar lattice_action(int idx) const { return -1.0 + delta_a_ * idx; }
  int lattice_index(Scalar a) const;

  static int sign_bucket(Scalar a) { return (a > kSignTol) - (a < -kSignTol); }
  static Scalar edge_reward(int state, int n_states) {
    if (state == n_states - 1) return 1.0;
    if (state == 0) return -1.0;
    return 0.0;
  }

  /// Exact MDP over augmented states (s, a) with the three direction moves
  /// as actions; mirrors one agent step: integrate the action on the
  /// lattice, then step the chain with the updated action.
  FiniteMdp augmented_mdp(Scalar gamma) const;

  /// Augmented states reachable from the episode starts (any chain state,
  /// action 0). Landing on an edge moving away from it is impossible, so a
  /// few (state, action) pairs can never occur and no learner will see them.
  std::vector<bool> reachable_augmented_states() const;

  /// Exact MDP over the n chain states with the given discrete action
  /// values executed directly (the baseline agent's view).
  FiniteMdp plain_mdp(const std::vector<Vector>& actions, Scalar gamma) const;

  /// Augmented-state index of (state, lattice action index).
  int augmented_index(int state, int action_idx) const {
    return state * n_lattice_ + action_idx;
  }

  Vector reset_to(int state);

 protected:
  Vector do_reset(RngStream& rng) override;
  StepResult do_step(const Vector& action) override;

 private:
  static constexpr Scalar kSignTol = 1e-9;
  int n_states_;
  Scalar delta_a_;
  int n_lattice_;
  int state_ = 0;
};

/// Factory for the CLI: "point_reacher", "mountain_car", "lattice_mdp".
/// delta_a feeds the action spec; lattice_states only applies to the chain.
std::unique_ptr<Environment> make_env(const std::string& name, Scalar delta_a,
                                      int lattice_states = 3);

}  // namespace fsq
