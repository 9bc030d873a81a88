#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "fsq/rng.hpp"
#include "fsq/types.hpp"

namespace fsq {

/// Parameter-shaped bundle, used for gradients and Adam moments.
struct ParamSet {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  static ParamSet zeros_like(const ParamSet& p) {
    return {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
            Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
  }
};

using Gradients = ParamSet;

/// One-hidden-layer ReLU network with linear output heads.
///
/// In FSQ mode the output is m partitions of 3 heads: partition j occupies
/// rows [3j, 3j+3). In DQN mode the output is one head per discrete action.
struct QNetwork {
  Index input_dim = 0;
  Index hidden_units = 0;
  Index output_dim = 0;
  ParamSet params;

  QNetwork() = default;
  QNetwork(Index input, Index hidden, Index output, RngStream& rng);

  /// Number of 3-head partitions; only meaningful in FSQ mode.
  Index partitions() const { return output_dim / 3; }
};

/// FSQ-mode constructor: output is exactly 3 heads per action coordinate.
QNetwork make_fsq_network(Index state_dim, Index action_dims, Index hidden,
                          RngStream& rng);

Vector forward(const QNetwork& net, const Vector& v);

/// Batched forward pass; columns are samples.
Matrix forward(const QNetwork& net, const Matrix& batch);

/// Forward pass keeping the intermediates needed for backprop.
struct ForwardCache {
  Matrix input;   // input_dim x B
  Matrix hidden;  // hidden x B, post-ReLU
  Matrix output;  // output_dim x B
};
ForwardCache forward_cached(const QNetwork& net, const Matrix& batch);

/// Sum of squared masked residuals per sample, averaged over the batch.
/// Unmasked entries contribute exactly zero. `sample_weights` (optional,
/// length B) scales each sample's contribution; used for PER corrections.
Scalar masked_l2_loss(const Matrix& pred, const Matrix& target,
                      const BoolArray& mask,
                      const Vector& sample_weights = Vector());

/// Gradients of masked_l2_loss w.r.t. the parameters, reusing a cache from
/// forward_cached on the same input.
Gradients masked_l2_gradients(const QNetwork& net, const ForwardCache& cache,
                              const Matrix& target, const BoolArray& mask,
                              const Vector& sample_weights = Vector());

/// Adam optimizer state. Moments start at zero and are bias-corrected.
struct AdamState {
  ParamSet first_moment;
  ParamSet second_moment;
  std::int64_t step_count = 0;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon_stability = 1e-8;

  static AdamState for_network(const QNetwork& net) {
    AdamState s;
    s.first_moment = ParamSet::zeros_like(net.params);
    s.second_moment = ParamSet::zeros_like(net.params);
    return s;
  }
};

/// One bias-corrected Adam update in place. Throws NumericError on a
/// non-finite gradient and leaves the parameters untouched.
void adam_step(QNetwork& net, const Gradients& grads, AdamState& state, Scalar lr);

/// Deep copy; later updates to the source do not affect the clone.
QNetwork clone_parameters(const QNetwork& src);

// ---------------------------------------------------------------------------
// Checkpoint arrays ("fsq-ckpt-v1")
//
// Textual format:
//   fsq-ckpt-v1
//   config <K>
//   <K lines of key=value>
//   arrays <N>
//   <name> <rows> <cols>
//   <rows lines of cols space-separated values, full double precision>
//
// Doubles are written with 17 significant digits so a load reproduces them
// bit-exactly.

inline constexpr const char* kCheckpointMagic = "fsq-ckpt-v1";

struct Checkpoint {
  std::map<std::string, std::string> config;
  std::map<std::string, Matrix> arrays;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

/// Pack / unpack the four parameter arrays under a name prefix ("online.w1", ...).
void pack_network(Checkpoint& ckpt, const std::string& prefix, const QNetwork& net);
QNetwork unpack_network(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace fsq
