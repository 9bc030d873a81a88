#include "fsq/dqn_agent.hpp"

#include <cmath>
#include <iostream>

namespace fsq {

DiscreteActionSet cartesian_discretize(const ActionSpaceSpec& spec, int k,
                                       std::uint64_t cap) {
  spec.validate();
  if (k < 2) throw std::invalid_argument("cartesian_discretize: k must be >= 2");

  // count k^m arithmetically before touching memory
  std::uint64_t count = 1;
  for (Index j = 0; j < spec.dims; ++j) {
    if (count > cap / static_cast<std::uint64_t>(k))
      throw BlowupError(
          static_cast<std::uint64_t>(std::llround(
              std::min(std::pow(static_cast<double>(k), static_cast<double>(spec.dims)),
                       9e18))),
          cap);
    count *= static_cast<std::uint64_t>(k);
  }
  if (count > cap) throw BlowupError(count, cap);

  DiscreteActionSet set;
  set.actions.reserve(count);
  std::vector<int> levels(static_cast<std::size_t>(spec.dims), 0);
  while (true) {
    Vector a(spec.dims);
    for (Index j = 0; j < spec.dims; ++j)
      a[j] = spec.low[j] + (spec.high[j] - spec.low[j]) * levels[static_cast<std::size_t>(j)] /
                               static_cast<Scalar>(k - 1);
    set.actions.push_back(std::move(a));
    Index j = 0;
    for (; j < spec.dims; ++j) {
      if (++levels[static_cast<std::size_t>(j)] < k) break;
      levels[static_cast<std::size_t>(j)] = 0;
    }
    if (j == spec.dims) break;
  }
  return set;
}

DqnAgent::DqnAgent(DiscreteActionSet actions, Index state_dim, AgentConfig config,
                   RngStream& init_rng, Encoder encoder, Index encoded_dim)
    : actions_(std::move(actions)),
      state_dim_(state_dim),
      config_(config),
      encoder_(std::move(encoder)),
      input_dim_(encoder_ ? encoded_dim : state_dim),
      online_(input_dim_, config.hidden_units, static_cast<Index>(actions_.count()),
              init_rng),
      target_(clone_parameters(online_)),
      optimizer_(AdamState::for_network(online_)),
      buffer_(static_cast<std::size_t>(config.memory_size), PerConfig{config.use_per}),
      epsilon_(config.eps_max) {
  config_.validate();
  if (actions_.count() == 0)
    throw std::invalid_argument("DQN needs a non-empty action set");
}

Vector DqnAgent::encode(const Vector& state) const {
  return encoder_ ? encoder_(state) : state;
}

int DqnAgent::select_action(const Vector& state, RngStream& rng) const {
  if (rng.uniform() < epsilon_)
    return static_cast<int>(rng.integer(actions_.count()));
  const Vector q = forward(online_, encode(state));
  Index best;
  q.maxCoeff(&best);
  return static_cast<int>(best);
}

std::optional<Scalar> DqnAgent::learn_step(RngStream& rng) {
  global_step_ += 1;
  std::optional<Scalar> result;

  if (config_.use_per && planned_steps_ > 0)
    buffer_.set_training_progress(static_cast<Scalar>(global_step_) /
                                  static_cast<Scalar>(planned_steps_));

  if (auto sampled = buffer_.sample(static_cast<std::size_t>(config_.batch_size), rng)) {
    const Index b = static_cast<Index>(sampled->size());
    Matrix x(input_dim_, b);
    Matrix x_next(input_dim_, b);
    Vector weights;
    if (config_.use_per) weights = Vector(b);
    for (Index i = 0; i < b; ++i) {
      const DqnTransition& t = *(*sampled)[static_cast<std::size_t>(i)].item;
      x.col(i) = encode(t.state);
      x_next.col(i) = encode(t.state_next);
      if (config_.use_per)
        weights[i] = (*sampled)[static_cast<std::size_t>(i)].importance_weight;
    }

    const Matrix tq = forward(target_, x_next);
    Matrix oq;
    if (config_.use_double_q) oq = forward(online_, x_next);

    const ForwardCache cache = forward_cached(online_, x);
    Matrix y = Matrix::Zero(cache.output.rows(), b);
    BoolArray mask = BoolArray::Constant(cache.output.rows(), b, false);
    for (Index i = 0; i < b; ++i) {
      const DqnTransition& t = *(*sampled)[static_cast<std::size_t>(i)].item;
      Scalar target = t.reward;
      if (!t.terminal) {
        Scalar bootstrap;
        if (config_.use_double_q) {
          Index pick;
          oq.col(i).maxCoeff(&pick);
          bootstrap = tq(pick, i);
        } else {
          bootstrap = tq.col(i).maxCoeff();
        }
        target += config_.gamma * bootstrap;
      }
      y(t.action_index, i) = target;        // one head per transition
      mask(t.action_index, i) = true;
    }

    const Scalar loss = masked_l2_loss(cache.output, y, mask, weights);
    if (!std::isfinite(loss)) {
      ++numeric_aborts_;
      std::cerr << "dqn: non-finite loss at step " << global_step_
                << ", skipping the update\n";
    } else {
      try {
        const Gradients grads = masked_l2_gradients(online_, cache, y, mask, weights);
        adam_step(online_, grads, optimizer_, config_.learning_rate);
        result = loss;
      } catch (const NumericError& e) {
        ++numeric_aborts_;
        std::cerr << "dqn: " << e.what() << " at step " << global_step_
                  << ", parameters kept\n";
      }
      if (config_.use_per) {
        Vector td(b);
        for (Index i = 0; i < b; ++i) {
          const DqnTransition& t = *(*sampled)[static_cast<std::size_t>(i)].item;
          td[i] = std::abs(y(t.action_index, i) - cache.output(t.action_index, i));
        }
        buffer_.update_priorities(*sampled, td);
      }
    }
  }

  if (global_step_ % config_.target_update_interval == 0)
    target_ = clone_parameters(online_);
  return result;
}

std::vector<EpisodeRecord> DqnAgent::train(Environment& env, int episodes,
                                           RngPool& rngs, const EpisodeSink& sink) {
  if (env.descriptor().action_spec.dims != actions_.actions.front().size())
    throw ShapeError("train: environment action dimensionality does not match the set");
  if (planned_steps_ == 0)
    planned_steps_ = static_cast<std::int64_t>(episodes) * env.descriptor().max_steps;

  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(std::max(episodes, 0)));

  for (int ep = 0; ep < episodes; ++ep) {
    Vector state = env.reset(rngs.env);
    EpisodeRecord rec;
    rec.episode_index = ep;
    Scalar loss_sum = 0;
    int loss_count = 0;

    for (int t = 0; t < env.descriptor().max_steps; ++t) {
      epsilon_ = config_.epsilon_at(global_step_);
      const int idx = select_action(state, rngs.agent);
      const StepResult sr = env.step(actions_.actions[static_cast<std::size_t>(idx)]);
      buffer_.push(DqnTransition{state, idx, sr.reward, sr.state, sr.terminal});
      if (auto loss = learn_step(rngs.replay)) {
        loss_sum += *loss;
        ++loss_count;
      }
      rec.undiscounted_return += sr.reward;
      rec.steps += 1;
      state = sr.state;
      if (sr.terminal) break;
    }

    rec.epsilon = epsilon_;
    rec.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    if (sink) sink(rec);
    records.push_back(rec);
  }
  return records;
}

void DqnAgent::load_parameters(const QNetwork& online, const QNetwork& target) {
  if (online.input_dim != input_dim_ ||
      online.output_dim != static_cast<Index>(actions_.count()))
    throw ShapeError("load_parameters: checkpoint shapes do not match the agent");
  online_ = online;
  target_ = target;
  optimizer_ = AdamState::for_network(online_);
}

std::vector<EpisodeRecord> dqn_train(Environment& env,
                                     const DiscreteActionSet& actions,
                                     const AgentConfig& config, int episodes,
                                     RngPool& rngs, const EpisodeSink& sink) {
  DqnAgent agent(actions, env.descriptor().state_dim, config, rngs.agent);
  return agent.train(env, episodes, rngs, sink);
}

}  // namespace fsq
