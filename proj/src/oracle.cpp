#include "fsq/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fsq {

void FiniteMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw std::invalid_argument("finite MDP needs at least one state and action");
  if (static_cast<Index>(transition.size()) != n_actions)
    throw ShapeError("finite MDP: one transition matrix per action expected");
  if (reward.rows() != n_states || reward.cols() != n_actions)
    throw ShapeError("finite MDP: reward must be n_states x n_actions");
  if (gamma < 0 || gamma > 1)
    throw std::invalid_argument("finite MDP: gamma must be in [0,1]");
  for (Index a = 0; a < n_actions; ++a) {
    const Matrix& p = transition[static_cast<std::size_t>(a)];
    if (p.rows() != n_states || p.cols() != n_states)
      throw ShapeError("finite MDP: transition matrices must be n_states square");
    for (Index s = 0; s < n_states; ++s) {
      if (p.row(s).minCoeff() < 0)
        throw std::invalid_argument("finite MDP: negative transition probability");
      if (std::abs(p.row(s).sum() - 1.0) > 1e-12)
        throw std::invalid_argument("finite MDP: row (s=" + std::to_string(s) +
                                    ", a=" + std::to_string(a) +
                                    ") does not sum to 1");
    }
  }
}

ValueIterationResult value_iteration(const FiniteMdp& mdp, Scalar tol,
                                     int max_iterations) {
  mdp.validate();
  ValueIterationResult res;
  res.q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  Vector v = Vector::Zero(mdp.n_states);
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    Matrix q_next(mdp.n_states, mdp.n_actions);
    for (Index a = 0; a < mdp.n_actions; ++a)
      q_next.col(a) = mdp.reward.col(a) +
                      mdp.gamma * (mdp.transition[static_cast<std::size_t>(a)] * v);
    res.residual = (q_next - res.q).cwiseAbs().maxCoeff();
    res.q = std::move(q_next);
    v = res.q.rowwise().maxCoeff();
    if (res.residual < tol) break;
  }
  res.v = v;
  return res;
}

Matrix tabular_q_learning(const FiniteMdp& mdp, const TabularQOptions& opt,
                          RngStream& rng) {
  mdp.validate();
  if (!(opt.alpha > 0) || opt.alpha > 1)
    throw std::invalid_argument("tabular Q-learning: alpha must be in (0,1]");

  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  auto sample_next = [&](Index s, Index a) -> Index {
    const Matrix& p = mdp.transition[static_cast<std::size_t>(a)];
    Scalar u = rng.uniform();
    for (Index s2 = 0; s2 < mdp.n_states; ++s2) {
      u -= p(s, s2);
      if (u < 0) return s2;
    }
    return mdp.n_states - 1;
  };

  for (int ep = 0; ep < opt.episodes; ++ep) {
    Index s = static_cast<Index>(rng.integer(static_cast<std::uint64_t>(mdp.n_states)));
    for (int t = 0; t < opt.horizon; ++t) {
      Index a;
      if (rng.uniform() < opt.epsilon) {
        a = static_cast<Index>(rng.integer(static_cast<std::uint64_t>(mdp.n_actions)));
      } else {
        q.row(s).maxCoeff(&a);
      }
      const Index s2 = sample_next(s, a);
      const Scalar target = mdp.reward(s, a) + mdp.gamma * q.row(s2).maxCoeff();
      q(s, a) += opt.alpha * (target - q(s, a));
      s = s2;
    }
  }
  return q;
}

}  // namespace fsq
