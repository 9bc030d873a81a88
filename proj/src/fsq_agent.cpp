#include "fsq/fsq_agent.hpp"

#include <cmath>
#include <iostream>

namespace fsq {

int argmax3(const Matrix& q, Index offset, Index col) {
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (q(offset + k, col) > q(offset + best, col)) best = k;
  return best;
}

int argmax3(const Vector& q, Index offset) {
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (q[offset + k] > q[offset + best]) best = k;
  return best;
}

FsqAgent::FsqAgent(ActionSpaceSpec spec, Index state_dim, AgentConfig config,
                   RngStream& init_rng, StateEncoder encoder, Index encoded_dim)
    : spec_(std::move(spec)),
      state_dim_(state_dim),
      config_(config),
      encoder_(std::move(encoder)),
      input_dim_(encoder_ ? encoded_dim : state_dim + spec_.dims),
      online_(input_dim_, config.hidden_units, 3 * spec_.dims, init_rng),
      target_(clone_parameters(online_)),
      optimizer_(AdamState::for_network(online_)),
      buffer_(static_cast<std::size_t>(config.memory_size),
              PerConfig{config.use_per}),
      epsilon_(config.eps_max) {
  spec_.validate();
  config_.validate();
  if (encoder_ && encoded_dim <= 0)
    throw std::invalid_argument("an encoder needs its output width");
}

Vector FsqAgent::encode(const Vector& state, const Vector& action) const {
  if (encoder_) return encoder_(state, action);
  Vector v(state.size() + action.size());
  v << state, action;
  return v;
}

Matrix FsqAgent::encode_batch(const std::vector<const Transition*>& batch,
                              bool next) const {
  Matrix x(input_dim_, static_cast<Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const AuxiliaryState& phi = next ? batch[i]->phi_next : batch[i]->phi;
    x.col(static_cast<Index>(i)) = encode(phi.state, phi.action);
  }
  return x;
}

DirectionVector FsqAgent::select_directions(const AuxiliaryState& v,
                                            RngStream& rng) const {
  const Index m = spec_.dims;
  DirectionVector d(m);
  // Draw the greedy pass lazily: fully random coordinates happen often at
  // high epsilon and the forward pass is the expensive part.
  bool have_q = false;
  Vector q;
  for (Index j = 0; j < m; ++j) {
    if (rng.uniform() < epsilon_) {
      d[j] = rng.uniform_int(-1, 1);
      continue;
    }
    if (!have_q) {
      q = forward(online_, encode(v.state, v.action));
      have_q = true;
    }
    d[j] = index_to_direction(argmax3(q, 3 * j) + 1);
  }
  return d;
}

ActResult FsqAgent::act(const Vector& state, const Vector& action,
                        RngStream& rng) const {
  ActResult r;
  r.direction = select_directions({state, action}, rng);
  r.next_action = integrate_action(action, r.direction, spec_);
  r.executed_action = config_.execute_updated_action ? r.next_action : action;
  return r;
}

TargetBatch FsqAgent::build_targets(const std::vector<const Transition*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("build_targets: empty batch");
  const Index m = spec_.dims;
  const Index b = static_cast<Index>(batch.size());

  const Matrix x_next = encode_batch(batch, /*next=*/true);
  const Matrix tq = forward(target_, x_next);
  Matrix oq;
  if (config_.use_double_q) oq = forward(online_, x_next);

  TargetBatch out;
  out.y = Matrix::Zero(3 * m, b);
  out.mask = BoolArray::Constant(3 * m, b, false);

  for (Index k = 0; k < b; ++k) {
    const Transition& t = *batch[static_cast<std::size_t>(k)];
    for (Index j = 0; j < m; ++j) {
      const Index offset = 3 * j;
      Scalar y;
      if (t.terminal) {
        y = t.reward;
      } else {
        Scalar bootstrap;
        if (config_.use_double_q) {
          // evaluate the online net's pick with the target net
          bootstrap = tq(offset + argmax3(oq, offset, k), k);
        } else {
          bootstrap = tq.col(k).segment(offset, 3).maxCoeff();
        }
        y = t.reward + config_.gamma * bootstrap;
      }
      int head;
      if (config_.target_index_mode == TargetIndexMode::stored_direction) {
        head = direction_to_index(t.direction[j]) - 1;
      } else {
        head = argmax3(tq, offset, k);  // the target net's own argmax
      }
      out.y(offset + head, k) = y;
      out.mask(offset + head, k) = true;
    }
  }
  return out;
}

std::optional<Scalar> FsqAgent::learn_step(RngStream& rng) {
  global_step_ += 1;
  std::optional<Scalar> result;

  if (config_.use_per && planned_steps_ > 0)
    buffer_.set_training_progress(static_cast<Scalar>(global_step_) /
                                  static_cast<Scalar>(planned_steps_));

  if (auto sampled = buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng)) {
    std::vector<const Transition*> batch;
    batch.reserve(sampled->size());
    Vector weights;
    if (config_.use_per) weights = Vector(static_cast<Index>(sampled->size()));
    for (std::size_t i = 0; i < sampled->size(); ++i) {
      batch.push_back((*sampled)[i].item);
      if (config_.use_per)
        weights[static_cast<Index>(i)] = (*sampled)[i].importance_weight;
    }

    const TargetBatch targets = build_targets(batch);
    const Matrix x = encode_batch(batch, /*next=*/false);
    const ForwardCache cache = forward_cached(online_, x);
    const Scalar loss = masked_l2_loss(cache.output, targets.y, targets.mask, weights);

    if (!std::isfinite(loss)) {
      ++numeric_aborts_;
      std::cerr << "fsq: non-finite loss at step " << global_step_
                << ", skipping the update\n";
    } else {
      try {
        const Gradients grads =
            masked_l2_gradients(online_, cache, targets.y, targets.mask, weights);
        adam_step(online_, grads, optimizer_, config_.learning_rate);
        result = loss;
      } catch (const NumericError& e) {
        ++numeric_aborts_;
        std::cerr << "fsq: " << e.what() << " at step " << global_step_
                  << ", parameters kept\n";
      }

      if (config_.use_per) {
        // one priority per transition: mean absolute TD error over partitions
        Vector td(static_cast<Index>(batch.size()));
        for (Index k = 0; k < td.size(); ++k) {
          Scalar sum = 0;
          for (Index r = 0; r < cache.output.rows(); ++r)
            if (targets.mask(r, k)) sum += std::abs(targets.y(r, k) - cache.output(r, k));
          td[k] = sum / static_cast<Scalar>(spec_.dims);
        }
        buffer_.update_priorities(*sampled, td);
      }
    }
  }

  if (global_step_ % config_.target_update_interval == 0) sync_target();
  return result;
}

std::vector<EpisodeRecord> FsqAgent::train(Environment& env, int episodes,
                                           RngPool& rngs, const EpisodeSink& sink) {
  if (env.descriptor().action_spec.dims != spec_.dims)
    throw ShapeError("train: environment action dimensionality does not match the agent");
  if (planned_steps_ == 0)
    planned_steps_ = static_cast<std::int64_t>(episodes) * env.descriptor().max_steps;

  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(std::max(episodes, 0)));

  for (int ep = 0; ep < episodes; ++ep) {
    Vector state = env.reset(rngs.env);
    // a1 = 0, clipped into the box in case 0 is outside it
    Vector action = Vector::Zero(spec_.dims).cwiseMax(spec_.low).cwiseMin(spec_.high);

    EpisodeRecord rec;
    rec.episode_index = ep;
    Scalar loss_sum = 0;
    int loss_count = 0;

    for (int t = 0; t < env.descriptor().max_steps; ++t) {
      epsilon_ = config_.epsilon_at(global_step_);
      const ActResult a = act(state, action, rngs.agent);
      const StepResult sr = env.step(a.executed_action);
      buffer_.push(Transition{{state, action},
                              a.direction,
                              sr.reward,
                              {sr.state, a.next_action},
                              sr.terminal});
      if (auto loss = learn_step(rngs.replay)) {
        loss_sum += *loss;
        ++loss_count;
      }
      rec.undiscounted_return += sr.reward;
      rec.steps += 1;
      state = sr.state;
      action = a.next_action;
      if (sr.terminal) break;
    }

    rec.epsilon = epsilon_;
    rec.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    if (sink) sink(rec);
    records.push_back(rec);
  }
  return records;
}

void FsqAgent::load_parameters(const QNetwork& online, const QNetwork& target) {
  if (online.input_dim != input_dim_ || online.output_dim != 3 * spec_.dims)
    throw ShapeError("load_parameters: checkpoint shapes do not match the agent");
  online_ = online;
  target_ = target;
  optimizer_ = AdamState::for_network(online_);
}

}  // namespace fsq
