#include "fsq/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace fsq {

std::string to_string(Algo a) { return a == Algo::fsq ? "fsq" : "dqn"; }

std::string to_string(TargetIndexMode m) {
  return m == TargetIndexMode::stored_direction ? "stored_direction" : "paper_literal";
}

void RunConfig::validate() const {
  agent.validate();
  if (episodes < 0) throw ConfigError("episodes must be non-negative");
  if (!(delta_a > 0)) throw ConfigError("delta_a must be positive");
  if (dqn_levels < 2) throw ConfigError("dqn_levels must be at least 2");
  if (lattice_states < 2) throw ConfigError("lattice_states must be at least 2");
  if (env_name.empty()) throw ConfigError("env must not be empty");
}

namespace {

Scalar parse_real(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    const Scalar x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'", line);
  }
}

long long parse_int(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'", line);
  }
}

bool parse_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'", line);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value,
               int line) {
  if (key == "env") c.env_name = value;
  else if (key == "algo") {
    if (value == "fsq") c.algo = Algo::fsq;
    else if (value == "dqn") c.algo = Algo::dqn;
    else throw ConfigError("algo must be fsq or dqn, got '" + value + "'", line);
  }
  else if (key == "episodes") c.episodes = static_cast<int>(parse_int(value, key, line));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value, key, line));
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "memory_size") c.agent.memory_size = static_cast<int>(parse_int(value, key, line));
  else if (key == "target_update_interval") c.agent.target_update_interval = static_cast<int>(parse_int(value, key, line));
  else if (key == "batch_size") c.agent.batch_size = static_cast<int>(parse_int(value, key, line));
  else if (key == "learning_rate") c.agent.learning_rate = parse_real(value, key, line);
  else if (key == "gamma") c.agent.gamma = parse_real(value, key, line);
  else if (key == "eps_max") c.agent.eps_max = parse_real(value, key, line);
  else if (key == "eps_min") c.agent.eps_min = parse_real(value, key, line);
  else if (key == "eps_decay") c.agent.eps_decay = parse_real(value, key, line);
  else if (key == "delta_a") c.delta_a = parse_real(value, key, line);
  else if (key == "hidden_units") c.agent.hidden_units = static_cast<int>(parse_int(value, key, line));
  else if (key == "use_per") c.agent.use_per = parse_bool(value, key, line);
  else if (key == "use_double_q") c.agent.use_double_q = parse_bool(value, key, line);
  else if (key == "execute_updated_action") c.agent.execute_updated_action = parse_bool(value, key, line);
  else if (key == "target_index_mode") {
    if (value == "stored_direction") c.agent.target_index_mode = TargetIndexMode::stored_direction;
    else if (value == "paper_literal") c.agent.target_index_mode = TargetIndexMode::paper_literal;
    else throw ConfigError("target_index_mode must be stored_direction or paper_literal", line);
  }
  else if (key == "dqn_levels") c.dqn_levels = static_cast<int>(parse_int(value, key, line));
  else if (key == "lattice_states") c.lattice_states = static_cast<int>(parse_int(value, key, line));
  else if (key == "success_threshold") c.success_threshold = parse_real(value, key, line);
  else throw ConfigError("unknown key '" + key + "'", line);
}

std::string format_real(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key=value, got '" + stripped + "'", line_no);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    apply_key(config, key, value, line_no);
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in);
}

void save_config(std::ostream& out, const RunConfig& c) {
  out << "env=" << c.env_name << "\n";
  out << "algo=" << to_string(c.algo) << "\n";
  out << "episodes=" << c.episodes << "\n";
  out << "seed=" << c.seed << "\n";
  out << "out_dir=" << c.out_dir << "\n";
  out << "memory_size=" << c.agent.memory_size << "\n";
  out << "target_update_interval=" << c.agent.target_update_interval << "\n";
  out << "batch_size=" << c.agent.batch_size << "\n";
  out << "learning_rate=" << format_real(c.agent.learning_rate) << "\n";
  out << "gamma=" << format_real(c.agent.gamma) << "\n";
  out << "eps_max=" << format_real(c.agent.eps_max) << "\n";
  out << "eps_min=" << format_real(c.agent.eps_min) << "\n";
  out << "eps_decay=" << format_real(c.agent.eps_decay) << "\n";
  out << "delta_a=" << format_real(c.delta_a) << "\n";
  out << "hidden_units=" << c.agent.hidden_units << "\n";
  out << "use_per=" << (c.agent.use_per ? "true" : "false") << "\n";
  out << "use_double_q=" << (c.agent.use_double_q ? "true" : "false") << "\n";
  out << "target_index_mode=" << to_string(c.agent.target_index_mode) << "\n";
  out << "execute_updated_action=" << (c.agent.execute_updated_action ? "true" : "false") << "\n";
  out << "dqn_levels=" << c.dqn_levels << "\n";
  out << "lattice_states=" << c.lattice_states << "\n";
  if (c.success_threshold)
    out << "success_threshold=" << format_real(*c.success_threshold) << "\n";
}

std::string config_echo(const RunConfig& config) {
  std::ostringstream out;
  save_config(out, config);
  return out.str();
}

RunConfig config_from_echo(const std::map<std::string, std::string>& kv) {
  RunConfig config;
  for (const auto& [key, value] : kv) apply_key(config, key, value, 0);
  config.validate();
  return config;
}

}  // namespace fsq
