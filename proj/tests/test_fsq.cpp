#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsq/fsq_agent.hpp"
#include "fsq/oracle.hpp"

using namespace fsq;

namespace {

AgentConfig small_config() {
  AgentConfig cfg;
  cfg.memory_size = 256;
  cfg.batch_size = 8;
  cfg.hidden_units = 8;
  cfg.target_update_interval = 5;
  return cfg;
}

FsqAgent make_agent(Index m, Index state_dim, AgentConfig cfg, std::uint64_t seed = 1) {
  RngStream rng = make_stream(seed, "init");
  return FsqAgent(ActionSpaceSpec::uniform(m, -1.0, 1.0, 0.75), state_dim, cfg, rng);
}

// Constant-output network: zero weights, per-partition bias pattern.
void set_constant_outputs(QNetwork& net, const Vector& pattern) {
  net.params.w1.setZero();
  net.params.b1.setZero();
  net.params.w2.setZero();
  for (Index i = 0; i < net.output_dim; ++i)
    net.params.b2[i] = pattern[i % pattern.size()];
}

Transition make_transition(Scalar s, Scalar a, Scalar reward, Scalar s_next,
                           Scalar a_next, int d, bool terminal) {
  Transition t;
  t.phi = {Vector::Constant(1, s), Vector::Constant(1, a)};
  t.phi_next = {Vector::Constant(1, s_next), Vector::Constant(1, a_next)};
  t.direction = DirectionVector::Constant(1, d);
  t.reward = reward;
  t.terminal = terminal;
  return t;
}

}  // namespace

TEST_CASE("pure exploration draws each direction a third of the time") {
  FsqAgent agent = make_agent(2, 3, small_config());
  agent.set_epsilon(1.0);
  RngStream rng = make_stream(2, "eps");
  AuxiliaryState v{Vector::Zero(3), Vector::Zero(2)};
  int counts[2][3] = {};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const DirectionVector d = agent.select_directions(v, rng);
    for (int j = 0; j < 2; ++j) ++counts[j][d[j] + 1];
  }
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 3; ++k)
      CHECK(static_cast<double>(counts[j][k]) / draws ==
            doctest::Approx(1.0 / 3).epsilon(0.06));  // +-0.02 absolute
}

TEST_CASE("greedy selection takes the partition argmax") {
  AgentConfig cfg = small_config();
  FsqAgent agent = make_agent(1, 2, cfg);
  Vector pattern(3);
  pattern << 0.1, 0.9, 0.3;
  set_constant_outputs(agent.online(), pattern);
  agent.set_epsilon(0.0);
  RngStream rng = make_stream(3, "greedy");
  const DirectionVector d =
      agent.select_directions({Vector::Zero(2), Vector::Zero(1)}, rng);
  CHECK(d[0] == 0);  // head 2 is maximal
}

TEST_CASE("ties break toward the lowest head index") {
  FsqAgent agent = make_agent(1, 2, small_config());
  Vector pattern(3);
  pattern << 0.5, 0.5, 0.2;
  set_constant_outputs(agent.online(), pattern);
  agent.set_epsilon(0.0);
  RngStream rng = make_stream(4, "ties");
  const DirectionVector d =
      agent.select_directions({Vector::Zero(2), Vector::Zero(1)}, rng);
  CHECK(d[0] == -1);  // head 1 wins the tie
}

TEST_CASE("a constant output shift never changes a selection") {
  // plain argmax over random 3-vectors
  RngStream rng = make_stream(5, "shift");
  for (int i = 0; i < 1000; ++i) {
    Vector q(3);
    for (int k = 0; k < 3; ++k) q[k] = rng.uniform(-5, 5);
    const Vector shifted = q.array() - 1.0;
    CHECK(argmax3(q, 0) == argmax3(shifted, 0));
  }

  // and through whole random networks
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AgentConfig cfg = small_config();
    FsqAgent a = make_agent(2, 3, cfg, seed);
    FsqAgent b = make_agent(2, 3, cfg, seed);  // identical parameters
    b.online().params.b2.array() -= 1.0;       // apply the "(Q - 1)" shift
    a.set_epsilon(0.0);
    b.set_epsilon(0.0);
    RngStream ra = make_stream(seed, "in"), rb = make_stream(seed, "in");
    RngStream in_rng = make_stream(seed + 100, "draw");
    for (int i = 0; i < 50; ++i) {
      Vector s(3), act(2);
      for (int k = 0; k < 3; ++k) s[k] = in_rng.uniform(-1, 1);
      for (int k = 0; k < 2; ++k) act[k] = in_rng.uniform(-1, 1);
      CHECK(a.select_directions({s, act}, ra) == b.select_directions({s, act}, rb));
    }
  }
}

TEST_CASE("acting with zero direction executes the unchanged action") {
  FsqAgent agent = make_agent(2, 2, small_config());
  Vector pattern(3);
  pattern << 0.0, 1.0, 0.0;  // hold
  set_constant_outputs(agent.online(), pattern);
  agent.set_epsilon(0.0);
  RngStream rng = make_stream(6, "act");
  Vector a(2);
  a << 0.25, -0.5;
  const ActResult r = agent.act(Vector::Zero(2), a, rng);
  CHECK(r.direction == DirectionVector::Zero(2));
  CHECK(r.executed_action == a);
  CHECK(r.next_action == a);
}

TEST_CASE("acting integrates one lattice step from the origin") {
  FsqAgent agent = make_agent(2, 2, small_config());
  Vector pattern(3);
  pattern << 0.0, 0.0, 1.0;  // increase everywhere
  set_constant_outputs(agent.online(), pattern);
  agent.set_epsilon(0.0);
  RngStream rng = make_stream(7, "act");
  const ActResult r = agent.act(Vector::Zero(2), Vector::Zero(2), rng);
  CHECK(r.executed_action[0] == doctest::Approx(0.75));
  CHECK(r.executed_action[1] == doctest::Approx(0.75));
}

TEST_CASE("paper-literal execution keeps the stale action") {
  AgentConfig cfg = small_config();
  cfg.execute_updated_action = false;
  FsqAgent agent = make_agent(2, 2, cfg);
  Vector pattern(3);
  pattern << 0.0, 0.0, 1.0;
  set_constant_outputs(agent.online(), pattern);
  agent.set_epsilon(0.0);
  RngStream rng = make_stream(8, "act");
  Vector a(2);
  a << 0.25, 0.25;
  const ActResult r = agent.act(Vector::Zero(2), a, rng);
  CHECK(r.executed_action == a);                      // environment sees a_t
  CHECK(r.next_action[0] == doctest::Approx(1.0));    // a_{t+1} still advances
}

TEST_CASE("terminal transitions put the raw reward in every partition") {
  AgentConfig cfg = small_config();
  FsqAgent agent = make_agent(1, 1, cfg);
  const Transition t = make_transition(0, 0, 1.0, 0.5, 0.75, 1, true);
  const TargetBatch targets = agent.build_targets({&t});
  REQUIRE(targets.mask.count() == 1);
  // the masked head for d=+1 is head 3 (row 2)
  CHECK(targets.mask(2, 0));
  CHECK(targets.y(2, 0) == 1.0);
}

TEST_CASE("bootstrap takes gamma times the target partition max at phi_next") {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.99;
  FsqAgent agent = make_agent(1, 1, cfg);
  Vector pattern(3);
  pattern << 1.0, 2.0, 3.0;
  set_constant_outputs(agent.online(), pattern);
  agent.sync_target();
  const Transition t = make_transition(0, 0, 0.0, 0.5, 0.75, 0, false);
  const TargetBatch targets = agent.build_targets({&t});
  CHECK(targets.y(1, 0) == doctest::Approx(0.99 * 3.0).epsilon(1e-12));
}

TEST_CASE("the bootstrap reads the target net, not the online net") {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.5;
  FsqAgent agent = make_agent(1, 1, cfg);
  Vector target_pattern(3);
  target_pattern << 2.0, 2.0, 2.0;
  set_constant_outputs(agent.online(), target_pattern);
  agent.sync_target();
  Vector online_pattern(3);
  online_pattern << 9.0, 9.0, 9.0;  // if this leaked in, y would be 4.5
  set_constant_outputs(agent.online(), online_pattern);
  const Transition t = make_transition(0, 0, 0.0, 0, 0, 0, false);
  CHECK(agent.build_targets({&t}).y(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("the bootstrap is evaluated at phi_next, not phi") {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.9;
  cfg.hidden_units = 2;
  FsqAgent agent = make_agent(1, 1, cfg);
  // exact linear map: head0 = state, head1 = action, head2 = 0 (inputs > 0)
  QNetwork& net = agent.online();
  net.params.w1 = Matrix::Identity(2, 2);
  net.params.b1.setZero();
  net.params.w2 = Matrix::Zero(3, 2);
  net.params.w2(0, 0) = 1.0;
  net.params.w2(1, 1) = 1.0;
  net.params.b2.setZero();
  agent.sync_target();

  const Transition t = make_transition(1.0, 0.75, 0.5, 3.0, 0.25, 0, false);
  // at phi_next = (3, 0.25): partition outputs (3, 0.25, 0), max 3
  CHECK(agent.build_targets({&t}).y(1, 0) == doctest::Approx(0.5 + 0.9 * 3.0));
}

TEST_CASE("a correct value function is a fixed point of the target operator") {
  // constant reward 1 at gamma 0.99: Q = 100 satisfies y = 1 + 0.99 * 100 = Q
  AgentConfig cfg = small_config();
  cfg.gamma = 0.99;
  FsqAgent agent = make_agent(1, 1, cfg);
  set_constant_outputs(agent.online(), Vector::Constant(3, 100.0));
  agent.sync_target();
  const Transition t = make_transition(0, 0, 1.0, 0, 0, 0, false);
  const TargetBatch targets = agent.build_targets({&t});
  CHECK(targets.y(1, 0) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("double Q evaluates the online argmax with the target net") {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.99;
  cfg.use_double_q = true;
  FsqAgent agent = make_agent(1, 1, cfg);
  Vector target_pattern(3);
  target_pattern << 5.0, 9.0, 9.0;
  set_constant_outputs(agent.online(), target_pattern);
  agent.sync_target();
  Vector online_pattern(3);
  online_pattern << 10.0, 0.0, 0.0;  // online argmax is head 1
  set_constant_outputs(agent.online(), online_pattern);

  const Transition t = make_transition(0, 0, 0.0, 0, 0, 0, false);
  // bootstrap value is the target net's head 1: 5, not the plain max 9
  CHECK(agent.build_targets({&t}).y(1, 0) == doctest::Approx(0.99 * 5.0));
}

TEST_CASE("paper-literal indexing puts the target at the target net argmax") {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.9;
  cfg.target_index_mode = TargetIndexMode::paper_literal;
  FsqAgent agent = make_agent(1, 1, cfg);
  Vector pattern(3);
  pattern << 0.0, 0.0, 2.0;  // argmax head 3
  set_constant_outputs(agent.online(), pattern);
  agent.sync_target();
  // stored direction is -1 (head 1), but the mode must ignore it
  const Transition t = make_transition(0, 0, 0.0, 0, 0, -1, false);
  const TargetBatch targets = agent.build_targets({&t});
  CHECK(targets.mask(2, 0));
  CHECK_FALSE(targets.mask(0, 0));
  CHECK(targets.y(2, 0) == doctest::Approx(0.9 * 2.0));
}

TEST_CASE("every transition masks exactly one head per partition") {
  AgentConfig cfg = small_config();
  FsqAgent agent = make_agent(3, 2, cfg);
  RngStream rng = make_stream(9, "mask");
  std::vector<Transition> batch;
  for (int i = 0; i < 16; ++i) {
    Transition t;
    t.phi = {Vector::Zero(2), Vector::Zero(3)};
    t.phi_next = t.phi;
    t.direction = DirectionVector(3);
    for (int j = 0; j < 3; ++j) t.direction[j] = rng.uniform_int(-1, 1);
    t.reward = rng.uniform(-1, 1);
    t.terminal = rng.uniform() < 0.3;
    batch.push_back(t);
  }
  std::vector<const Transition*> ptrs;
  for (const auto& t : batch) ptrs.push_back(&t);
  const TargetBatch targets = agent.build_targets(ptrs);
  for (Index c = 0; c < targets.mask.cols(); ++c) {
    CHECK(targets.mask.col(c).count() == 3);  // m of 3m entries
    for (Index j = 0; j < 3; ++j)
      CHECK(targets.mask.col(c).segment(3 * j, 3).count() == 1);
  }
}

TEST_CASE("learn_step is a no-op until the buffer holds a full batch") {
  AgentConfig cfg = small_config();
  FsqAgent agent = make_agent(1, 1, cfg);
  const QNetwork before = clone_parameters(agent.online());
  RngStream rng = make_stream(10, "learn");
  for (int i = 0; i < cfg.batch_size - 1; ++i) {
    agent.buffer().push(make_transition(0.5, 0.75, 0.5, 0.5, 0.75, 0, false));
    CHECK_FALSE(agent.learn_step(rng).has_value());
  }
  CHECK(agent.online().params.w1 == before.params.w1);
  CHECK(agent.online().params.w2 == before.params.w2);
  CHECK(agent.global_step() == cfg.batch_size - 1);

  agent.buffer().push(make_transition(0.5, 0.75, 0.5, 0.5, 0.75, 0, false));
  CHECK(agent.learn_step(rng).has_value());
  CHECK(agent.online().params.w2 != before.params.w2);
}

TEST_CASE("zero residuals mean zero loss and exactly unchanged parameters") {
  // online already at the fixed point: bias 2, reward 1, gamma 0.5 gives
  // targets y = 1 + 0.5*2 = 2 = prediction, so the gradient is exactly zero
  AgentConfig cfg = small_config();
  cfg.gamma = 0.5;
  cfg.batch_size = 4;
  FsqAgent agent = make_agent(1, 1, cfg);
  set_constant_outputs(agent.online(), Vector::Constant(3, 2.0));
  agent.sync_target();
  for (int i = 0; i < 8; ++i)
    agent.buffer().push(make_transition(0.3, 0.75, 1.0, 0.3, 0.75, 0, false));

  const QNetwork before = clone_parameters(agent.online());
  RngStream rng = make_stream(21, "fix");
  const auto loss = agent.learn_step(rng);
  REQUIRE(loss.has_value());
  CHECK(*loss == 0.0);
  CHECK(agent.online().params.w1 == before.params.w1);
  CHECK(agent.online().params.b1 == before.params.b1);
  CHECK(agent.online().params.w2 == before.params.w2);
  CHECK(agent.online().params.b2 == before.params.b2);
}

TEST_CASE("PER priority aggregates the partition TD errors by mean magnitude") {
  AgentConfig cfg = small_config();
  cfg.batch_size = 1;
  cfg.use_per = true;
  cfg.learning_rate = 1e-12;  // keep the net where we put it
  FsqAgent agent = make_agent(2, 1, cfg);
  set_constant_outputs(agent.online(), Vector::Constant(3, 0.0));
  agent.sync_target();

  // terminal reward 1 against all-zero predictions: |td| = 1 per partition
  Transition t;
  t.phi = {Vector::Constant(1, 0.5), Vector::Zero(2)};
  t.phi_next = t.phi;
  t.direction = DirectionVector::Zero(2);
  t.reward = 1.0;
  t.terminal = true;
  agent.buffer().push(t);

  RngStream rng = make_stream(22, "per");
  REQUIRE(agent.learn_step(rng).has_value());
  // mean(|1|, |1|) + epsilon_priority
  CHECK(agent.buffer().raw_priority_at(0) == doctest::Approx(1.0 + 1e-3));
}

TEST_CASE("a perfect value function passes the oracle comparison untrained") {
  LatticeMdp env(3, 1.0);
  const FiniteMdp mdp = env.augmented_mdp(0.9);
  const auto vi = value_iteration(mdp, 1e-10);
  const int n = env.n_states(), l = env.n_lattice_actions();

  AgentConfig cfg = small_config();
  cfg.hidden_units = n * l;
  RngStream init = make_stream(23, "init");
  auto encoder = [n, l, &env](const Vector& s, const Vector& a) {
    Vector v = Vector::Zero(static_cast<Index>(n) * l);
    v[env.augmented_index(static_cast<int>(std::lround(s[0])),
                          env.lattice_index(a[0]))] = 1.0;
    return v;
  };
  FsqAgent agent(env.descriptor().action_spec, 1, cfg, init, encoder,
                 static_cast<Index>(n) * l);
  // hidden = identity over the one-hot input, output rows = Q* columns
  QNetwork& net = agent.online();
  net.params.w1 = Matrix::Identity(n * l, n * l);
  net.params.b1.setZero();
  net.params.b2.setZero();
  for (Index i = 0; i < n * l; ++i)
    for (Index d = 0; d < 3; ++d) net.params.w2(d, i) = vi.q(i, d);

  Scalar worst = 0;
  Vector s(1), a(1);
  for (int si = 0; si < n; ++si)
    for (int ai = 0; ai < l; ++ai) {
      s[0] = si;
      a[0] = env.lattice_action(ai);
      const Vector q = forward(agent.online(), agent.encode(s, a));
      for (int d = 0; d < 3; ++d)
        worst = std::max(worst, std::abs(q[d] - vi.q(env.augmented_index(si, ai), d)));
    }
  CHECK(worst <= 1e-12);  // trivially inside the 0.05 * reward-span tolerance
}

TEST_CASE("target net equals online net exactly at sync steps and only changes there") {
  AgentConfig cfg = small_config();
  cfg.target_update_interval = 5;
  FsqAgent agent = make_agent(1, 1, cfg);
  RngStream rng = make_stream(11, "sync");
  for (int i = 0; i < 64; ++i)
    agent.buffer().push(
        make_transition(i * 0.01, 0, i % 2 ? 1.0 : -1.0, i * 0.01, 0.75, 1, false));

  QNetwork target_before = clone_parameters(agent.target());
  for (int step = 1; step <= 23; ++step) {
    agent.learn_step(rng);
    if (step % 5 == 0) {
      CHECK(agent.target().params.w1 == agent.online().params.w1);
      CHECK(agent.target().params.w2 == agent.online().params.w2);
      CHECK(agent.target().params.b1 == agent.online().params.b1);
      CHECK(agent.target().params.b2 == agent.online().params.b2);
      target_before = clone_parameters(agent.target());
    } else {
      // constant between syncs, even though the online net moved
      CHECK(agent.target().params.w1 == target_before.params.w1);
      CHECK(agent.target().params.w2 == target_before.params.w2);
      CHECK(agent.online().params.w2 != agent.target().params.w2);
    }
  }
}

TEST_CASE("training is reproducible: same seed, identical episode records") {
  auto run = [] {
    AgentConfig cfg = small_config();
    LatticeMdp env(3, 1.0);
    RngPool rngs(77);
    FsqAgent agent(env.descriptor().action_spec, 1, cfg, rngs.agent);
    return agent.train(env, 5, rngs);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].episode_index == b[i].episode_index);
    CHECK(a[i].steps == b[i].steps);
    CHECK(a[i].undiscounted_return == b[i].undiscounted_return);
    CHECK(a[i].epsilon == b[i].epsilon);
    CHECK(a[i].mean_loss == b[i].mean_loss);
  }
}

TEST_CASE("zero episodes yield an empty record list") {
  AgentConfig cfg = small_config();
  LatticeMdp env(3, 1.0);
  RngPool rngs(1);
  FsqAgent agent(env.descriptor().action_spec, 1, cfg, rngs.agent);
  CHECK(agent.train(env, 0, rngs).empty());
}

TEST_CASE("epsilon follows the schedule during training") {
  AgentConfig cfg = small_config();
  cfg.eps_decay = 0.01;
  LatticeMdp env(3, 1.0);
  RngPool rngs(2);
  FsqAgent agent(env.descriptor().action_spec, 1, cfg, rngs.agent);
  const auto records = agent.train(env, 3, rngs);
  // epsilon recorded at the episode end matches the schedule at that step
  std::int64_t step = 0;
  for (const auto& rec : records) {
    step += rec.steps;
    CHECK(rec.epsilon == doctest::Approx(cfg.epsilon_at(step - 1)));
  }
}

TEST_CASE("a hundred thousand agent steps never leave the action box") {
  FsqAgent agent = make_agent(2, 2, small_config());
  agent.set_epsilon(1.0);
  RngStream rng = make_stream(12, "walk");
  Vector s = Vector::Zero(2);
  Vector a = Vector::Zero(2);
  for (int i = 0; i < 100000; ++i) {
    const ActResult r = agent.act(s, a, rng);
    a = r.next_action;
    REQUIRE(a.cwiseAbs().maxCoeff() <= 1.0);
    REQUIRE(r.executed_action.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("PER and double-Q options train end to end") {
  LatticeMdp env(3, 1.0);
  AgentConfig cfg = small_config();
  cfg.use_per = true;
  cfg.use_double_q = true;
  RngPool rngs(3);
  FsqAgent agent(env.descriptor().action_spec, 1, cfg, rngs.agent);
  const auto records = agent.train(env, 5, rngs);
  CHECK(records.size() == 5);
  CHECK(agent.numeric_abort_count() == 0);
  // replayed transitions got fresh |td|-based priorities
  bool any_refreshed = false;
  for (std::size_t i = 0; i < agent.buffer().size(); ++i)
    any_refreshed |= agent.buffer().raw_priority_at(i) != 1.0;
  CHECK(any_refreshed);
}

TEST_CASE("one-hot FSQ learning matches value iteration on a tiny lattice") {
  LatticeMdp env(2, 1.0);
  const FiniteMdp mdp = env.augmented_mdp(0.9);
  const auto vi = value_iteration(mdp, 1e-10);

  AgentConfig cfg;
  cfg.memory_size = 4000;
  cfg.batch_size = 32;
  cfg.hidden_units = 32;
  cfg.learning_rate = 0.003;
  cfg.gamma = 0.9;
  cfg.target_update_interval = 100;
  cfg.eps_min = 0.3;
  cfg.eps_decay = 0.001;

  RngPool rngs(5);
  const int n = env.n_states(), l = env.n_lattice_actions();
  auto encoder = [n, l, &env](const Vector& s, const Vector& a) {
    Vector v = Vector::Zero(static_cast<Index>(n) * l);
    v[env.augmented_index(static_cast<int>(std::lround(s[0])),
                          env.lattice_index(a[0]))] = 1.0;
    return v;
  };
  FsqAgent agent(env.descriptor().action_spec, 1, cfg, rngs.agent, encoder,
                 static_cast<Index>(n) * l);

  const std::vector<bool> reachable = env.reachable_augmented_states();
  auto deviation = [&] {
    Scalar worst = 0;
    Vector s(1), a(1);
    for (int si = 0; si < n; ++si)
      for (int ai = 0; ai < l; ++ai) {
        if (!reachable[static_cast<std::size_t>(env.augmented_index(si, ai))])
          continue;
        s[0] = si;
        a[0] = env.lattice_action(ai);
        const Vector q = forward(agent.online(), agent.encode(s, a));
        for (int d = 0; d < 3; ++d)
          worst = std::max(worst,
                           std::abs(q[d] - vi.q(env.augmented_index(si, ai), d)));
      }
    return worst;
  };

  Scalar dev = deviation();
  for (int round = 0; round < 40 && dev > 0.1; ++round) {
    agent.train(env, 25, rngs);
    dev = deviation();
  }
  CHECK(dev <= 0.1);
}
