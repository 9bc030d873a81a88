#pragma once

#include <vector>

#include "fsq/rng.hpp"
#include "fsq/types.hpp"

namespace fsq {

/// Finite MDP with dense transition matrices, one row-stochastic n x n
/// matrix per action.
struct FiniteMdp {
  Index n_states = 0;
  Index n_actions = 0;
  std::vector<Matrix> transition;  // transition[a](s, s') = P(s' | s, a)
  Matrix reward;                   // reward(s, a)
  Scalar gamma = 0.99;

  void validate() const;
};

struct ValueIterationResult {
  Vector v;        // optimal state values, v = rowwise max of q
  Matrix q;        // optimal action values, n_states x n_actions
  int iterations = 0;
  Scalar residual = 0;  // final sup-norm change
};

/// Exact fixed point of the optimal Bellman operator: iterate
/// Q <- R + gamma * P * max_a Q until the sup-norm change drops below tol.
ValueIterationResult value_iteration(const FiniteMdp& mdp, Scalar tol = 1e-10,
                                     int max_iterations = 1000000);

struct TabularQOptions {
  Scalar alpha = 0.1;
  int episodes = 10000;
  int horizon = 100;
  Scalar epsilon = 0.2;  // fixed exploration rate
};

/// Classic one-step Q-learning with epsilon-greedy behavior and uniformly
/// random episode starts. Converges toward the value-iteration fixed point.
Matrix tabular_q_learning(const FiniteMdp& mdp, const TabularQOptions& opt,
                          RngStream& rng);

}  // namespace fsq
