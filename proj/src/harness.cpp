#include "fsq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fsq {

namespace {

std::string format_real(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Learning curves

void write_curve_row(std::ostream& out, const EpisodeRecord& rec) {
  out << rec.episode_index << ',' << rec.steps << ',' << format_real(rec.undiscounted_return)
      << ',' << format_real(rec.epsilon) << ',' << format_real(rec.mean_loss) << '\n';
}

std::vector<EpisodeRecord> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader)
    throw std::runtime_error("curve csv: bad header: " + line);
  std::vector<EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpisodeRecord rec;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    if (!(row >> rec.episode_index >> rec.steps >> rec.undiscounted_return >>
          rec.epsilon >> rec.mean_loss))
      throw std::runtime_error("curve csv: malformed row: " + line);
    records.push_back(rec);
  }
  return records;
}

void RollingMean::push(Scalar value) {
  if (ring_.size() < window_) {
    ring_.push_back(value);
    sum_ += value;
    ++count_;
  } else {
    sum_ -= ring_[next_];
    ring_[next_] = value;
    sum_ += value;
    next_ = (next_ + 1) % window_;
  }
}

void write_curve_svg(std::ostream& out, const std::vector<EpisodeRecord>& records,
                     std::size_t window) {
  const int width = 800, height = 400, margin = 50;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  std::vector<Scalar> means;
  RollingMean roll(window);
  for (const auto& rec : records) {
    roll.push(rec.undiscounted_return);
    means.push_back(roll.mean());
  }
  if (!means.empty()) {
    Scalar lo = *std::min_element(means.begin(), means.end());
    Scalar hi = *std::max_element(means.begin(), means.end());
    if (hi - lo < 1e-9) hi = lo + 1.0;
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < means.size(); ++i) {
      const Scalar x = margin + (width - 2.0 * margin) * static_cast<Scalar>(i) /
                                    std::max<std::size_t>(means.size() - 1, 1);
      const Scalar y = height - margin - (height - 2.0 * margin) * (means[i] - lo) / (hi - lo);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
      out << buf;
    }
    out << "\"/>\n";
    char label[128];
    std::snprintf(label, sizeof(label), "%.3g", hi);
    out << "<text x=\"5\" y=\"" << margin << "\" font-size=\"12\">" << label << "</text>\n";
    std::snprintf(label, sizeof(label), "%.3g", lo);
    out << "<text x=\"5\" y=\"" << height - margin << "\" font-size=\"12\">" << label
        << "</text>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">episode</text>\n";
  out << "<text x=\"15\" y=\"" << height / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 15 " << height / 2
      << ")\" text-anchor=\"middle\">rolling mean return</text>\n";
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Success thresholds

Scalar default_success_threshold(const Environment& env) {
  const std::string& name = env.descriptor().name;
  if (name == "point_reacher") {
    const Scalar opt = PointReacher::mean_optimal_return();
    // "90% of optimal" extended sign-consistently: a 10% relative margin
    // below the optimal mean, which is exactly 0.9*opt for positive opt.
    return opt - 0.1 * std::abs(opt);
  }
  if (name == "mountain_car") return 75.0;  // bang-bang reaches ~90+
  if (name == "lattice_mdp") {
    // optimal play reaches the right edge and stays: T minus the mean
    // distance to it, with 10% slack
    const Scalar t = env.descriptor().max_steps;
    return 0.9 * (t - 1.0);
  }
  throw std::invalid_argument("no success threshold known for env " + name);
}

// ---------------------------------------------------------------------------
// Training entry point

namespace fs = std::filesystem;

void save_agent_checkpoint(const std::string& path, const RunConfig& config,
                           const QNetwork& online, const QNetwork& target) {
  Checkpoint ckpt;
  std::istringstream echo(config_echo(config));
  std::string line;
  while (std::getline(echo, line)) {
    const auto eq = line.find('=');
    ckpt.config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  pack_network(ckpt, "online", online);
  pack_network(ckpt, "target", target);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_checkpoint(out, ckpt);
}

TrainOutcome run_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  fs::create_directories(config.out_dir);

  auto env = make_env(config.env_name, config.delta_a, config.lattice_states);
  RngPool rngs(config.seed);

  TrainOutcome outcome;
  outcome.threshold = config.success_threshold
                          ? *config.success_threshold
                          : default_success_threshold(*env);

  std::ofstream csv(fs::path(config.out_dir) / "curve.csv");
  if (!csv) throw std::runtime_error("cannot write curve.csv in " + config.out_dir);
  csv << kCurveHeader << '\n';

  RollingMean roll(100);
  bool first_mean = true;
  outcome.exit_code = kExitExhausted;

  EpisodeSink sink = [&](const EpisodeRecord& rec) {
    write_curve_row(csv, rec);
    roll.push(rec.undiscounted_return);
    const Scalar mean = roll.mean();
    if (first_mean || mean > outcome.best_rolling_mean) {
      outcome.best_rolling_mean = mean;
      first_mean = false;
    }
    if ((rec.episode_index + 1) % 10 == 0)
      log << "episode " << rec.episode_index << " rolling mean return " << mean
          << " (eps " << rec.epsilon << ")\n";
    if (roll.full() && mean >= outcome.threshold && outcome.success_episode < 0) {
      outcome.success_episode = rec.episode_index;
      outcome.exit_code = kExitSuccess;
    }
  };

  try {
    if (config.algo == Algo::fsq) {
      // make_env already baked config.delta_a into the action spec
      FsqAgent agent(env->descriptor().action_spec, env->descriptor().state_dim,
                     config.agent, rngs.agent);
      outcome.records = agent.train(*env, config.episodes, rngs, sink);
      save_agent_checkpoint((fs::path(config.out_dir) / "checkpoint.ckpt").string(),
                            config, agent.online(), agent.target());
      if (agent.numeric_abort_count() > 0) outcome.exit_code = kExitNumeric;
    } else {
      const DiscreteActionSet actions =
          cartesian_discretize(env->descriptor().action_spec, config.dqn_levels);
      DqnAgent agent(actions, env->descriptor().state_dim, config.agent, rngs.agent);
      outcome.records = agent.train(*env, config.episodes, rngs, sink);
      save_agent_checkpoint((fs::path(config.out_dir) / "checkpoint.ckpt").string(),
                            config, agent.online(), agent.target());
      if (agent.numeric_abort_count() > 0) outcome.exit_code = kExitNumeric;
    }
  } catch (const NumericError& e) {
    log << "numeric abort: " << e.what() << "\n";
    outcome.exit_code = kExitNumeric;
    return outcome;
  }

  std::ofstream svg(fs::path(config.out_dir) / "curve.svg");
  write_curve_svg(svg, outcome.records);

  log << "best rolling mean " << outcome.best_rolling_mean << ", threshold "
      << outcome.threshold << ", "
      << (outcome.exit_code == kExitSuccess ? "reached" : "not reached") << "\n";
  return outcome;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalOutcome run_eval(const std::string& checkpoint_path, const std::string& env_name,
                     int episodes, std::uint64_t seed, std::ostream& log) {
  std::ifstream in(checkpoint_path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + checkpoint_path);
  const Checkpoint ckpt = read_checkpoint(in);
  RunConfig config = config_from_echo(ckpt.config);
  if (!env_name.empty()) config.env_name = env_name;

  auto env = make_env(config.env_name, config.delta_a, config.lattice_states);
  RngPool rngs(seed);

  EvalOutcome outcome;
  const QNetwork online = unpack_network(ckpt, "online");
  const QNetwork target = unpack_network(ckpt, "target");

  if (config.algo == Algo::fsq) {
    const ActionSpaceSpec& spec = env->descriptor().action_spec;
    FsqAgent agent(spec, env->descriptor().state_dim, config.agent, rngs.agent);
    agent.load_parameters(online, target);
    agent.set_epsilon(0.0);
    for (int ep = 0; ep < episodes; ++ep) {
      Vector state = env->reset(rngs.env);
      Vector action = Vector::Zero(spec.dims).cwiseMax(spec.low).cwiseMin(spec.high);
      Scalar ret = 0;
      for (int t = 0; t < env->descriptor().max_steps; ++t) {
        const ActResult a = agent.act(state, action, rngs.agent);
        const StepResult sr = env->step(a.executed_action);
        ret += sr.reward;
        state = sr.state;
        action = a.next_action;
        if (sr.terminal) break;
      }
      outcome.returns.push_back(ret);
      log << "eval episode " << ep << " return " << ret << "\n";
    }
  } else {
    const DiscreteActionSet actions =
        cartesian_discretize(env->descriptor().action_spec, config.dqn_levels);
    DqnAgent agent(actions, env->descriptor().state_dim, config.agent, rngs.agent);
    agent.load_parameters(online, target);
    for (int ep = 0; ep < episodes; ++ep) {
      Vector state = env->reset(rngs.env);
      Scalar ret = 0;
      for (int t = 0; t < env->descriptor().max_steps; ++t) {
        Vector q = forward(agent.online(), agent.encode(state));
        Index best;
        q.maxCoeff(&best);
        const StepResult sr = env->step(agent.actions().actions[static_cast<std::size_t>(best)]);
        ret += sr.reward;
        state = sr.state;
        if (sr.terminal) break;
      }
      outcome.returns.push_back(ret);
      log << "eval episode " << ep << " return " << ret << "\n";
    }
  }

  if (!outcome.returns.empty()) {
    Scalar sum = 0;
    for (Scalar r : outcome.returns) sum += r;
    outcome.mean_return = sum / static_cast<Scalar>(outcome.returns.size());
  }
  log << "mean return over " << outcome.returns.size() << " episodes: "
      << outcome.mean_return << "\n";
  return outcome;
}

// ---------------------------------------------------------------------------
// Discretization benchmark

std::vector<BenchRow> bench_discretization(const std::vector<int>& m_list, int k) {
  if (k < 2) throw std::invalid_argument("bench: k must be >= 2");
  std::vector<BenchRow> rows;
  for (int m : m_list) {
    if (m < 1) throw std::invalid_argument("bench: m must be >= 1");
    BenchRow row;
    row.dims = m;
    row.fsq_heads = 3ull * static_cast<std::uint64_t>(m);
    row.cartesian_actions = std::pow(static_cast<Scalar>(k), static_cast<Scalar>(m));
    row.ratio = row.cartesian_actions / static_cast<Scalar>(row.fsq_heads);
    rows.push_back(row);
  }
  return rows;
}

void print_bench_report(std::ostream& out, const std::vector<BenchRow>& rows, int k) {
  out << "m\tfsq_heads\tcartesian_actions(k=" << k << ")\tratio\n";
  for (const auto& r : rows) {
    out << r.dims << '\t' << r.fsq_heads << '\t';
    if (r.cartesian_actions < 9.2e18)
      out << static_cast<std::uint64_t>(std::llround(r.cartesian_actions));
    else
      out << r.cartesian_actions;
    out << '\t' << r.ratio << '\n';
  }
}

// ---------------------------------------------------------------------------
// Oracle check

OracleCheckOutcome run_oracle_check(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.env_name != "lattice_mdp")
    throw ConfigError("oracle-check requires env=lattice_mdp");
  fs::create_directories(config.out_dir);

  LatticeMdp env(config.lattice_states, config.delta_a);
  RngPool rngs(config.seed);

  const Scalar reward_span = 2.0;  // edge rewards are +1 / -1
  OracleCheckOutcome outcome;
  outcome.tolerance = 0.05 * reward_span;

  const int check_interval = 25;

  if (config.algo == Algo::fsq) {
    const FiniteMdp mdp = env.augmented_mdp(config.agent.gamma);
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);

    const int n = env.n_states();
    const int l = env.n_lattice_actions();
    auto encoder = [n, l, &env](const Vector& s, const Vector& a) {
      Vector v = Vector::Zero(static_cast<Index>(n) * l);
      const int si = static_cast<int>(std::lround(s[0]));
      v[env.augmented_index(si, env.lattice_index(a[0]))] = 1.0;
      return v;
    };
    FsqAgent agent(env.descriptor().action_spec, env.descriptor().state_dim,
                   config.agent, rngs.agent, encoder, static_cast<Index>(n) * l);
    agent.set_planned_steps(static_cast<std::int64_t>(config.episodes) *
                            env.descriptor().max_steps);

    // learned Q vs the oracle over every reachable lattice point; pairs the
    // dynamics can never produce (edges entered while moving away from them)
    // carry no data and are excluded
    const std::vector<bool> reachable = env.reachable_augmented_states();
    auto deviation = [&]() {
      Scalar worst = 0;
      Vector s(1), a(1);
      for (int si = 0; si < n; ++si) {
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
      }
      return worst;
    };

    for (int ep = 0; ep < config.episodes; ep += check_interval) {
      const int chunk = std::min(check_interval, config.episodes - ep);
      agent.train(env, chunk, rngs);
      outcome.episodes_used = ep + chunk;
      outcome.max_deviation = deviation();
      if (outcome.max_deviation <= outcome.tolerance) {
        outcome.exit_code = kExitSuccess;
        break;
      }
    }
    outcome.max_deviation = deviation();
    if (outcome.max_deviation <= outcome.tolerance) outcome.exit_code = kExitSuccess;

    std::ofstream star(fs::path(config.out_dir) / "q_star.csv");
    std::ofstream learned(fs::path(config.out_dir) / "q_learned.csv");
    star << "state,action,reachable,d_minus,d_zero,d_plus\n";
    learned << "state,action,reachable,d_minus,d_zero,d_plus\n";
    Vector s(1), a(1);
    for (int si = 0; si < n; ++si)
      for (int ai = 0; ai < l; ++ai) {
        s[0] = si;
        a[0] = env.lattice_action(ai);
        const Vector q = forward(agent.online(), agent.encode(s, a));
        const int row = env.augmented_index(si, ai);
        const int reach = reachable[static_cast<std::size_t>(row)] ? 1 : 0;
        star << si << ',' << format_real(a[0]) << ',' << reach << ','
             << format_real(vi.q(row, 0)) << ',' << format_real(vi.q(row, 1)) << ','
             << format_real(vi.q(row, 2)) << '\n';
        learned << si << ',' << format_real(a[0]) << ',' << reach << ','
                << format_real(q[0]) << ',' << format_real(q[1]) << ','
                << format_real(q[2]) << '\n';
      }
  } else {
    const DiscreteActionSet actions =
        cartesian_discretize(env.descriptor().action_spec, config.dqn_levels);
    const FiniteMdp mdp = env.plain_mdp(actions.actions, config.agent.gamma);
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);

    const int n = env.n_states();
    auto encoder = [n](const Vector& s) {
      Vector v = Vector::Zero(n);
      v[static_cast<Index>(std::lround(s[0]))] = 1.0;
      return v;
    };
    DqnAgent agent(actions, env.descriptor().state_dim, config.agent, rngs.agent,
                   encoder, n);

    auto deviation = [&]() {
      Scalar worst = 0;
      Vector s(1);
      for (int si = 0; si < n; ++si) {
        s[0] = si;
        const Vector q = forward(agent.online(), agent.encode(s));
        for (Index ai = 0; ai < static_cast<Index>(actions.count()); ++ai)
          worst = std::max(worst, std::abs(q[ai] - vi.q(si, ai)));
      }
      return worst;
    };

    for (int ep = 0; ep < config.episodes; ep += check_interval) {
      const int chunk = std::min(check_interval, config.episodes - ep);
      agent.train(env, chunk, rngs);
      outcome.episodes_used = ep + chunk;
      outcome.max_deviation = deviation();
      if (outcome.max_deviation <= outcome.tolerance) {
        outcome.exit_code = kExitSuccess;
        break;
      }
    }
    outcome.max_deviation = deviation();
    if (outcome.max_deviation <= outcome.tolerance) outcome.exit_code = kExitSuccess;

    std::ofstream star(fs::path(config.out_dir) / "q_star.csv");
    std::ofstream learned(fs::path(config.out_dir) / "q_learned.csv");
    star << "state";
    learned << "state";
    for (std::size_t ai = 0; ai < actions.count(); ++ai) {
      star << ",a" << ai;
      learned << ",a" << ai;
    }
    star << '\n';
    learned << '\n';
    Vector s(1);
    for (int si = 0; si < n; ++si) {
      s[0] = si;
      const Vector q = forward(agent.online(), agent.encode(s));
      star << si;
      learned << si;
      for (Index ai = 0; ai < static_cast<Index>(actions.count()); ++ai) {
        star << ',' << format_real(vi.q(si, ai));
        learned << ',' << format_real(q[ai]);
      }
      star << '\n';
      learned << '\n';
    }
  }

  log << "oracle check: max deviation " << outcome.max_deviation << " vs tolerance "
      << outcome.tolerance << " after " << outcome.episodes_used << " episodes: "
      << (outcome.exit_code == kExitSuccess ? "pass" : "fail") << "\n";
  return outcome;
}

}  // namespace fsq
