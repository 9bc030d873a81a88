#include "fsq/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace fsq {

StepResult Environment::step(const Vector& action) {
  if (awaiting_reset_)
    throw ProtocolError("step called before reset or after a terminal step");
  if (action.size() != desc_.action_spec.dims)
    throw ShapeError("step: action length must equal " +
                     std::to_string(desc_.action_spec.dims));
  Vector a = action;
  bool clipped = false;
  for (Index j = 0; j < a.size(); ++j) {
    if (a[j] < desc_.action_spec.low[j] || a[j] > desc_.action_spec.high[j]) {
      clipped = true;
      a[j] = std::min(std::max(a[j], desc_.action_spec.low[j]), desc_.action_spec.high[j]);
    }
  }
  if (clipped) ++clip_warnings_;
  StepResult result = do_step(a);
  if (!result.state.allFinite() || !std::isfinite(result.reward))
    throw NumericError("environment produced a non-finite state or reward");
  if (result.terminal) awaiting_reset_ = true;
  return result;
}

// ---------------------------------------------------------------------------
// PointReacher

PointReacher::PointReacher(Scalar h, int max_steps, Scalar delta_a)
    : Environment({"point_reacher", 2, ActionSpaceSpec::uniform(2, -1.0, 1.0, delta_a),
                    max_steps}),
      h_(h) {
  if (!(h > 0)) throw std::invalid_argument("point_reacher: step size h must be positive");
}

Vector PointReacher::do_reset(RngStream& rng) {
  position_ = Vector(2);
  position_[0] = rng.uniform(-kBoxHalfWidth, kBoxHalfWidth);
  position_[1] = rng.uniform(-kBoxHalfWidth, kBoxHalfWidth);
  return position_;
}

StepResult PointReacher::do_step(const Vector& action) {
  position_ = (position_ + h_ * action)
                  .cwiseMax(-kBoxHalfWidth)
                  .cwiseMin(kBoxHalfWidth);
  const Scalar dist = position_.norm();
  StepResult r;
  r.state = position_;
  r.reward = -dist;
  if (dist < kGoalRadius) {
    r.reward += kGoalBonus;
    r.terminal = true;
  }
  return r;
}

Scalar PointReacher::optimal_return(const Vector& p0, Scalar h) {
  if (p0.size() != 2) throw ShapeError("optimal_return expects a planar start");
  Scalar dist = p0.norm();
  if (dist < kGoalRadius) return kGoalBonus;  // one step lands exactly on the origin
  // Fastest straight-line progress scales the action so the larger
  // coordinate saturates at 1: the distance shrinks by h*|p|_2/|p|_inf
  // per step, a constant along the ray through the origin.
  const Scalar shrink = h * dist / p0.cwiseAbs().maxCoeff();
  Scalar total = 0;
  while (true) {
    dist = std::max(dist - shrink, 0.0);
    total += -dist;
    if (dist < kGoalRadius) return total + kGoalBonus;
  }
}

Vector PointReacher::reset_to(const Vector& position) {
  if (position.size() != 2) throw ShapeError("reset_to expects a planar position");
  position_ = position.cwiseMax(-kBoxHalfWidth).cwiseMin(kBoxHalfWidth);
  mark_ready();
  return position_;
}

Scalar PointReacher::mean_optimal_return(Scalar h, int grid) {
  Scalar sum = 0;
  Vector p(2);
  for (int i = 0; i < grid; ++i) {
    p[0] = -kBoxHalfWidth + (i + 0.5) * (2 * kBoxHalfWidth / grid);
    for (int j = 0; j < grid; ++j) {
      p[1] = -kBoxHalfWidth + (j + 0.5) * (2 * kBoxHalfWidth / grid);
      sum += optimal_return(p, h);
    }
  }
  return sum / (static_cast<Scalar>(grid) * grid);
}

// ---------------------------------------------------------------------------
// ContinuousMountainCar

ContinuousMountainCar::ContinuousMountainCar(Scalar delta_a)
    : Environment({"mountain_car", 2, ActionSpaceSpec::uniform(1, -1.0, 1.0, delta_a),
                    999}) {}

Vector ContinuousMountainCar::do_reset(RngStream& rng) {
  position_ = rng.uniform(-0.6, -0.4);
  velocity_ = 0.0;
  Vector s(2);
  s << position_, velocity_;
  return s;
}

Vector ContinuousMountainCar::reset_to(Scalar position, Scalar velocity) {
  position_ = std::min(std::max(position, -1.2), 0.6);
  velocity_ = std::min(std::max(velocity, -0.07), 0.07);
  mark_ready();
  Vector s(2);
  s << position_, velocity_;
  return s;
}

StepResult ContinuousMountainCar::do_step(const Vector& action) {
  const Scalar a = action[0];
  velocity_ += 0.0015 * a - 0.0025 * std::cos(3.0 * position_);
  velocity_ = std::min(std::max(velocity_, -0.07), 0.07);
  position_ += velocity_;
  position_ = std::min(std::max(position_, -1.2), 0.6);
  if (position_ <= -1.2 && velocity_ < 0) velocity_ = 0.0;  // wall stops the car

  StepResult r;
  r.state = Vector(2);
  r.state << position_, velocity_;
  r.reward = -0.1 * a * a;
  if (position_ >= kGoalPosition) {
    r.reward += kGoalReward;
    r.terminal = true;
  }
  return r;
}

// ---------------------------------------------------------------------------
// LatticeMdp

LatticeMdp::LatticeMdp(int n_states, Scalar delta_a, int max_steps)
    : Environment({"lattice_mdp", 1, ActionSpaceSpec::uniform(1, -1.0, 1.0, delta_a),
                    max_steps}),
      n_states_(n_states),
      delta_a_(delta_a) {
  if (n_states < 2 || n_states > 20)
    throw std::invalid_argument("lattice_mdp: n_states must be in [2, 20]");
  // 1/delta_a integral keeps 0 on the lattice and makes clipping closed
  // over the lattice, so the starting action a=0 never leaves it.
  const Scalar half_steps = 1.0 / delta_a;
  if (std::abs(half_steps - std::round(half_steps)) > 1e-9)
    throw ConfigError("lattice_mdp: 1/delta_a must be an integer");
  n_lattice_ = 2 * static_cast<int>(std::round(half_steps)) + 1;
}

int LatticeMdp::lattice_index(Scalar a) const {
  const Scalar idx = (a + 1.0) / delta_a_;
  const int rounded = static_cast<int>(std::round(idx));
  if (std::abs(idx - rounded) > 1e-6 || rounded < 0 || rounded >= n_lattice_)
    throw std::invalid_argument("action is not on the lattice: " + std::to_string(a));
  return rounded;
}

Vector LatticeMdp::do_reset(RngStream& rng) {
  state_ = static_cast<int>(rng.integer(static_cast<std::uint64_t>(n_states_)));
  Vector s(1);
  s[0] = state_;
  return s;
}

Vector LatticeMdp::reset_to(int state) {
  if (state < 0 || state >= n_states_)
    throw std::invalid_argument("reset_to: state out of range");
  state_ = state;
  mark_ready();
  Vector s(1);
  s[0] = state_;
  return s;
}

StepResult LatticeMdp::do_step(const Vector& action) {
  state_ = std::min(std::max(state_ + sign_bucket(action[0]), 0), n_states_ - 1);
  StepResult r;
  r.state = Vector(1);
  r.state[0] = state_;
  r.reward = edge_reward(state_, n_states_);
  return r;  // continuing task, never terminal
}

FiniteMdp LatticeMdp::augmented_mdp(Scalar gamma) const {
  FiniteMdp mdp;
  mdp.n_states = n_states_ * n_lattice_;
  mdp.n_actions = 3;
  mdp.gamma = gamma;
  mdp.reward = Matrix::Zero(mdp.n_states, 3);
  mdp.transition.assign(3, Matrix::Zero(mdp.n_states, mdp.n_states));
  const ActionSpaceSpec& spec = descriptor().action_spec;
  for (int s = 0; s < n_states_; ++s) {
    for (int ai = 0; ai < n_lattice_; ++ai) {
      const int from = augmented_index(s, ai);
      for (int d = -1; d <= 1; ++d) {
        Vector a(1);
        a[0] = lattice_action(ai);
        DirectionVector dir(1);
        dir[0] = d;
        const Scalar a_next = integrate_action(a, dir, spec)[0];
        const int ai_next = lattice_index(a_next);
        const int s_next =
            std::min(std::max(s + sign_bucket(a_next), 0), n_states_ - 1);
        const int to = augmented_index(s_next, ai_next);
        mdp.transition[static_cast<std::size_t>(d + 1)](from, to) = 1.0;
        mdp.reward(from, d + 1) = edge_reward(s_next, n_states_);
      }
    }
  }
  return mdp;
}

std::vector<bool> LatticeMdp::reachable_augmented_states() const {
  const FiniteMdp mdp = augmented_mdp(1.0);
  std::vector<bool> seen(static_cast<std::size_t>(mdp.n_states), false);
  std::vector<int> frontier;
  const int zero_idx = lattice_index(0.0);
  for (int s = 0; s < n_states_; ++s) {
    const int start = augmented_index(s, zero_idx);
    seen[static_cast<std::size_t>(start)] = true;
    frontier.push_back(start);
  }
  while (!frontier.empty()) {
    const int from = frontier.back();
    frontier.pop_back();
    for (Index d = 0; d < 3; ++d) {
      Index to;
      mdp.transition[static_cast<std::size_t>(d)].row(from).maxCoeff(&to);
      if (!seen[static_cast<std::size_t>(to)]) {
        seen[static_cast<std::size_t>(to)] = true;
        frontier.push_back(static_cast<int>(to));
      }
    }
  }
  return seen;
}

FiniteMdp LatticeMdp::plain_mdp(const std::vector<Vector>& actions, Scalar gamma) const {
  FiniteMdp mdp;
  mdp.n_states = n_states_;
  mdp.n_actions = static_cast<Index>(actions.size());
  mdp.gamma = gamma;
  mdp.reward = Matrix::Zero(mdp.n_states, mdp.n_actions);
  mdp.transition.assign(actions.size(), Matrix::Zero(n_states_, n_states_));
  for (int s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const int s_next =
          std::min(std::max(s + sign_bucket(actions[a][0]), 0), n_states_ - 1);
      mdp.transition[a](s, s_next) = 1.0;
      mdp.reward(s, static_cast<Index>(a)) = edge_reward(s_next, n_states_);
    }
  }
  return mdp;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Environment> make_env(const std::string& name, Scalar delta_a,
                                      int lattice_states) {
  if (name == "point_reacher") return std::make_unique<PointReacher>(0.05, 100, delta_a);
  if (name == "mountain_car") return std::make_unique<ContinuousMountainCar>(delta_a);
  if (name == "lattice_mdp") return std::make_unique<LatticeMdp>(lattice_states, delta_a);
  throw std::invalid_argument("unknown environment: " + name +
                              " (expected point_reacher, mountain_car or lattice_mdp)");
}

}  // namespace fsq
