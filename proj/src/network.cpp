#include "fsq/network.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace fsq {

namespace {

Matrix glorot_uniform(Index rows, Index cols, RngStream& rng) {
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

QNetwork::QNetwork(Index input, Index hidden, Index output, RngStream& rng) {
  if (input <= 0 || hidden <= 0 || output <= 0)
    throw std::invalid_argument("network dimensions must be positive");
  input_dim = input;
  hidden_units = hidden;
  output_dim = output;
  params.w1 = glorot_uniform(hidden, input, rng);
  params.b1 = Vector::Zero(hidden);
  params.w2 = glorot_uniform(output, hidden, rng);
  params.b2 = Vector::Zero(output);
}

QNetwork make_fsq_network(Index state_dim, Index action_dims, Index hidden,
                          RngStream& rng) {
  if (action_dims <= 0)
    throw std::invalid_argument("FSQ network needs at least one action coordinate");
  return QNetwork(state_dim + action_dims, hidden, 3 * action_dims, rng);
}

Vector forward(const QNetwork& net, const Vector& v) {
  if (v.size() != net.input_dim)
    throw ShapeError("forward: input length " + std::to_string(v.size()) +
                     " != input_dim " + std::to_string(net.input_dim));
  if (!v.allFinite()) throw NumericError("non-finite network input");
  Vector h = (net.params.w1 * v + net.params.b1).cwiseMax(0.0);
  return net.params.w2 * h + net.params.b2;
}

Matrix forward(const QNetwork& net, const Matrix& batch) {
  return forward_cached(net, batch).output;
}

ForwardCache forward_cached(const QNetwork& net, const Matrix& batch) {
  if (batch.rows() != net.input_dim)
    throw ShapeError("forward: batch rows " + std::to_string(batch.rows()) +
                     " != input_dim " + std::to_string(net.input_dim));
  check_finite(batch, "network input");
  ForwardCache cache;
  cache.input = batch;
  cache.hidden = ((net.params.w1 * batch).colwise() + net.params.b1).cwiseMax(0.0);
  cache.output = (net.params.w2 * cache.hidden).colwise() + net.params.b2;
  return cache;
}

Scalar masked_l2_loss(const Matrix& pred, const Matrix& target,
                      const BoolArray& mask, const Vector& sample_weights) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      pred.rows() != mask.rows() || pred.cols() != mask.cols())
    throw ShapeError("masked_l2_loss: pred/target/mask shapes must agree");
  if (!mask.any())
    throw std::invalid_argument("masked_l2_loss: mask selects no entries");
  if (sample_weights.size() != 0 && sample_weights.size() != pred.cols())
    throw ShapeError("masked_l2_loss: one weight per sample expected");

  const Eigen::ArrayXXd residual =
      mask.select((target - pred).array(), Eigen::ArrayXXd::Zero(pred.rows(), pred.cols()));
  Eigen::ArrayXd per_sample = residual.square().colwise().sum();
  if (sample_weights.size() != 0) per_sample *= sample_weights.array();
  return per_sample.sum() / static_cast<Scalar>(pred.cols());
}

Gradients masked_l2_gradients(const QNetwork& net, const ForwardCache& cache,
                              const Matrix& target, const BoolArray& mask,
                              const Vector& sample_weights) {
  const Index batch = cache.output.cols();
  if (target.rows() != cache.output.rows() || target.cols() != batch ||
      mask.rows() != cache.output.rows() || mask.cols() != batch)
    throw ShapeError("masked_l2_gradients: target/mask shapes must match outputs");

  // dL/dy = (2/B) * w_b * (y - target) on masked entries, zero elsewhere
  Matrix dy = mask.select((cache.output - target).array(),
                          Eigen::ArrayXXd::Zero(cache.output.rows(), batch))
                  .matrix() *
              (2.0 / static_cast<Scalar>(batch));
  if (sample_weights.size() != 0) {
    if (sample_weights.size() != batch)
      throw ShapeError("masked_l2_gradients: one weight per sample expected");
    dy = dy * sample_weights.asDiagonal();
  }

  Gradients g;
  g.w2 = dy * cache.hidden.transpose();
  g.b2 = dy.rowwise().sum();
  Matrix dh = net.params.w2.transpose() * dy;
  dh = (cache.hidden.array() > 0.0).select(dh.array(), Eigen::ArrayXXd::Zero(dh.rows(), dh.cols()));
  g.w1 = dh * cache.input.transpose();
  g.b1 = dh.rowwise().sum();
  return g;
}

namespace {

template <class Tensor>
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                 const AdamState& s, Scalar lr) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const Scalar bc1 = 1.0 - std::pow(s.beta1, static_cast<Scalar>(s.step_count));
  const Scalar bc2 = 1.0 - std::pow(s.beta2, static_cast<Scalar>(s.step_count));
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.epsilon_stability);
}

}  // namespace

void adam_step(QNetwork& net, const Gradients& grads, AdamState& state, Scalar lr) {
  if (grads.w1.rows() != net.params.w1.rows() || grads.w1.cols() != net.params.w1.cols() ||
      grads.w2.rows() != net.params.w2.rows() || grads.w2.cols() != net.params.w2.cols() ||
      grads.b1.size() != net.params.b1.size() || grads.b2.size() != net.params.b2.size())
    throw ShapeError("adam_step: gradient shapes must match parameters");
  if (!grads.w1.allFinite() || !grads.b1.allFinite() || !grads.w2.allFinite() ||
      !grads.b2.allFinite())
    throw NumericError("adam_step: non-finite gradient");

  state.step_count += 1;
  adam_update(net.params.w1, grads.w1, state.first_moment.w1, state.second_moment.w1,
              state, lr);
  adam_update(net.params.b1, grads.b1, state.first_moment.b1, state.second_moment.b1,
              state, lr);
  adam_update(net.params.w2, grads.w2, state.first_moment.w2, state.second_moment.w2,
              state, lr);
  adam_update(net.params.b2, grads.b2, state.first_moment.b2, state.second_moment.b2,
              state, lr);
}

QNetwork clone_parameters(const QNetwork& src) {
  return src;  // Eigen matrices copy by value
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_value(std::ostream& out, Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << "\n";
  out << "config " << ckpt.config.size() << "\n";
  for (const auto& [key, value] : ckpt.config) out << key << "=" << value << "\n";
  out << "arrays " << ckpt.arrays.size() << "\n";
  for (const auto& [name, m] : ckpt.arrays) {
    out << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        if (c) out << ' ';
        write_value(out, m(r, c));
      }
      out << "\n";
    }
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw std::runtime_error("not a " + std::string(kCheckpointMagic) + " checkpoint");

  Checkpoint ckpt;
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "config")
    throw std::runtime_error("checkpoint: expected config section");
  in.ignore();  // rest of the count line
  for (std::size_t i = 0; i < count; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated config");
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("checkpoint: malformed config line: " + line);
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
  }

  if (!(in >> tag >> count) || tag != "arrays")
    throw std::runtime_error("checkpoint: expected arrays section");
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols))
      throw std::runtime_error("checkpoint: truncated array header");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        if (!(in >> m(r, c)))
          throw std::runtime_error("checkpoint: truncated array " + name);
    ckpt.arrays[name] = std::move(m);
  }
  return ckpt;
}

void pack_network(Checkpoint& ckpt, const std::string& prefix, const QNetwork& net) {
  ckpt.arrays[prefix + ".w1"] = net.params.w1;
  ckpt.arrays[prefix + ".b1"] = net.params.b1;
  ckpt.arrays[prefix + ".w2"] = net.params.w2;
  ckpt.arrays[prefix + ".b2"] = net.params.b2;
}

QNetwork unpack_network(const Checkpoint& ckpt, const std::string& prefix) {
  auto fetch = [&](const std::string& name) -> const Matrix& {
    auto it = ckpt.arrays.find(prefix + "." + name);
    if (it == ckpt.arrays.end())
      throw std::runtime_error("checkpoint: missing array " + prefix + "." + name);
    return it->second;
  };
  QNetwork net;
  net.params.w1 = fetch("w1");
  net.params.b1 = fetch("b1");
  net.params.w2 = fetch("w2");
  net.params.b2 = fetch("b2");
  net.hidden_units = net.params.w1.rows();
  net.input_dim = net.params.w1.cols();
  net.output_dim = net.params.w2.rows();
  if (net.params.w2.cols() != net.hidden_units ||
      net.params.b1.size() != net.hidden_units ||
      net.params.b2.size() != net.output_dim)
    throw std::runtime_error("checkpoint: inconsistent array shapes under " + prefix);
  return net;
}

}  // namespace fsq
