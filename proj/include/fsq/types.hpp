#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace fsq {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Mask over network outputs; column = one sample of a batch.
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors

/// Dimension mismatch between vectors/matrices that must agree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value where finite arithmetic is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Episode contract violation (step after terminal, step before reset).
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Cartesian action grid would exceed the configured cap.
struct BlowupError : std::runtime_error {
  BlowupError(std::uint64_t count_, std::uint64_t cap_)
      : std::runtime_error("cartesian discretization would create " +
                           std::to_string(count_) + " actions, cap is " +
                           std::to_string(cap_)),
        count(count_),
        cap(cap_) {}
  std::uint64_t count;
  std::uint64_t cap;
};

/// Config file parse or validation failure. line == 0 means validation.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg, int line_ = 0)
      : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg
                                     : msg),
        line(line_) {}
  int line;
};

// ---------------------------------------------------------------------------
// Action space

/// Per-coordinate bounds and step sizes of a continuous action box.
struct ActionSpaceSpec {
  Index dims = 0;
  Vector low;
  Vector high;
  Vector delta;

  /// Uniform box [lo, hi]^m with the same step on every coordinate.
  static ActionSpaceSpec uniform(Index m, Scalar lo, Scalar hi, Scalar step) {
    ActionSpaceSpec s;
    s.dims = m;
    s.low = Vector::Constant(m, lo);
    s.high = Vector::Constant(m, hi);
    s.delta = Vector::Constant(m, step);
    s.validate();
    return s;
  }

  void validate() const {
    if (dims <= 0) throw std::invalid_argument("action space needs dims >= 1");
    if (low.size() != dims || high.size() != dims || delta.size() != dims)
      throw ShapeError("action space bounds/step sizes must all have length dims");
    for (Index j = 0; j < dims; ++j) {
      if (!(low[j] < high[j]))
        throw std::invalid_argument("action bound low[" + std::to_string(j) +
                                    "] must be below high");
      if (!(delta[j] > 0) || delta[j] > high[j] - low[j])
        throw std::invalid_argument("action step delta[" + std::to_string(j) +
                                    "] must be in (0, high-low]");
    }
  }
};

// ---------------------------------------------------------------------------
// Directions

/// Per-coordinate move in {-1, 0, +1} (decrease, hold, increase).
using DirectionVector = IntVector;

/// Head index of a direction inside a 3-head output partition, in {1,2,3}.
inline int direction_to_index(int d_elem) {
  switch (d_elem) {
    case -1: return 1;
    case 0: return 2;
    case 1: return 3;
    default:
      throw std::invalid_argument("direction element must be -1, 0 or +1, got " +
                                  std::to_string(d_elem));
  }
}

/// Exact inverse of direction_to_index on {1,2,3}.
inline int index_to_direction(int index) {
  if (index < 1 || index > 3)
    throw std::invalid_argument("head index must be 1, 2 or 3, got " +
                                std::to_string(index));
  return index - 2;
}

inline void validate_direction(const DirectionVector& d) {
  for (Index j = 0; j < d.size(); ++j)
    if (d[j] < -1 || d[j] > 1)
      throw std::invalid_argument("direction element out of {-1,0,1}: " +
                                  std::to_string(d[j]));
}

/// One lattice move: clip(a + d*delta, low, high), element-wise.
inline Vector integrate_action(const Vector& a, const DirectionVector& d,
                               const ActionSpaceSpec& spec) {
  if (a.size() != spec.dims || d.size() != spec.dims)
    throw ShapeError("integrate_action: action/direction length must equal dims");
  validate_direction(d);
  return (a + d.cast<Scalar>().cwiseProduct(spec.delta))
      .cwiseMax(spec.low)
      .cwiseMin(spec.high);
}

// ---------------------------------------------------------------------------
// Experience

/// Concatenated (state, action) pair fed to the auxiliary Q-function.
struct AuxiliaryState {
  Vector state;
  Vector action;

  Index size() const { return state.size() + action.size(); }

  Vector concat() const {
    Vector v(size());
    v << state, action;
    return v;
  }
};

/// One replayed experience.
struct Transition {
  AuxiliaryState phi;
  DirectionVector direction;
  Scalar reward = 0;
  AuxiliaryState phi_next;
  bool terminal = false;
};

/// Per-episode training summary, streamed to the metrics sink.
struct EpisodeRecord {
  int episode_index = 0;
  int steps = 0;
  Scalar undiscounted_return = 0;
  Scalar epsilon = 0;
  Scalar mean_loss = 0;
};

using EpisodeSink = std::function<void(const EpisodeRecord&)>;

// ---------------------------------------------------------------------------
// Agent configuration

enum class TargetIndexMode {
  stored_direction,  // place target at the head of the replayed direction
  paper_literal,     // place target at the target net's argmax head
};

struct AgentConfig {
  int memory_size = 50000;
  int target_update_interval = 1000;
  int batch_size = 32;
  Scalar learning_rate = 0.0005;
  Scalar gamma = 0.99;
  Scalar eps_max = 1.0;
  Scalar eps_min = 0.1;
  Scalar eps_decay = 0.001;
  int hidden_units = 128;
  bool use_per = false;
  bool use_double_q = false;
  TargetIndexMode target_index_mode = TargetIndexMode::stored_direction;
  bool execute_updated_action = true;

  void validate() const {
    if (!(gamma > 0) || gamma > 1)
      throw std::invalid_argument("gamma must be in (0,1]");
    if (eps_min < 0 || eps_min > eps_max || eps_max > 1)
      throw std::invalid_argument("need 0 <= eps_min <= eps_max <= 1");
    if (memory_size <= 0) throw std::invalid_argument("memory_size must be positive");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (target_update_interval <= 0)
      throw std::invalid_argument("target_update_interval must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(eps_decay >= 0)) throw std::invalid_argument("eps_decay must be non-negative");
    if (hidden_units <= 0) throw std::invalid_argument("hidden_units must be positive");
  }

  /// Exploration rate after `step` global steps (exponential decay).
  Scalar epsilon_at(std::int64_t step) const {
    return eps_min + (eps_max - eps_min) * std::exp(-eps_decay * static_cast<Scalar>(step));
  }
};

}  // namespace fsq
