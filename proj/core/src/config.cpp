#include "wocar/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "wocar/error.hpp"

namespace wocar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument("not a finite number");
  return x;
}

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v[0] == '-') throw std::invalid_argument("not a non-negative integer");
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("not an integer");
  return x;
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const int x = std::stoi(v, &used);
  if (used != v.size()) throw std::invalid_argument("not an integer");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<std::size_t> to_widths(const std::string& v) {
  std::vector<std::size_t> out;
  if (v == "none") return out;
  for (const auto& item : split(v, ',')) {
    const auto w = to_u64(item);
    if (w == 0) throw std::invalid_argument("widths must be positive");
    out.push_back(static_cast<std::size_t>(w));
  }
  return out;
}

Activation to_activation(const std::string& v) {
  if (v == "relu") return Activation::relu;
  if (v == "tanh") return Activation::tanh;
  throw std::invalid_argument("expected relu or tanh");
}

KappaShape to_shape(const std::string& v) {
  if (v == "constant") return KappaShape::constant;
  if (v == "linear") return KappaShape::linear;
  if (v == "delayed-exponential") return KappaShape::delayed_exponential;
  throw std::invalid_argument("expected constant, linear or delayed-exponential");
}

AdvSetMode to_adv_mode(const std::string& v) {
  if (v == "auto") return AdvSetMode::automatic;
  if (v == "tabular") return AdvSetMode::tabular;
  if (v == "ibp") return AdvSetMode::ibp;
  throw std::invalid_argument("expected auto, tabular or ibp");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"algo", [](RunConfig& c, const std::string& v) { c.algo = parse_algo(v); }},
      {"env", [](RunConfig& c, const std::string& v) { c.env = v; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},

      {"train.total_steps", [](RunConfig& c, const std::string& v) { c.dqn.total_steps = c.ppo.total_steps = to_u64(v); }},
      {"train.log_every", [](RunConfig& c, const std::string& v) { c.dqn.log_every = c.ppo.log_every = to_u64(v); }},
      {"train.checkpoint_every",
       [](RunConfig& c, const std::string& v) { c.dqn.checkpoint_every = c.ppo.checkpoint_every = to_u64(v); }},
      {"train.lr", [](RunConfig& c, const std::string& v) { c.dqn.adam.lr = c.ppo.policy_adam.lr = to_double(v); }},
      {"train.critic_lr",
       [](RunConfig& c, const std::string& v) { c.dqn.critic_adam.lr = c.ppo.critic_adam.lr = to_double(v); }},
      {"train.value_lr", [](RunConfig& c, const std::string& v) { c.ppo.value_adam.lr = to_double(v); }},
      {"train.kappa_reg", [](RunConfig& c, const std::string& v) { c.dqn.kappa_reg = c.ppo.kappa_reg = to_double(v); }},
      {"train.grad_clip", [](RunConfig& c, const std::string& v) { c.dqn.grad_clip = c.ppo.grad_clip = to_double(v); }},
      {"train.adv_sets", [](RunConfig& c, const std::string& v) { c.dqn.adv_sets = c.ppo.adv_sets = to_adv_mode(v); }},
      {"train.reg_steps",
       [](RunConfig& c, const std::string& v) { c.dqn.reg.inner_steps = c.ppo.reg.inner_steps = to_int(v); }},
      {"train.reg_noise", [](RunConfig& c, const std::string& v) { c.dqn.reg.noise = c.ppo.reg.noise = to_bool(v); }},
      // DQN family
      {"train.batch_size", [](RunConfig& c, const std::string& v) { c.dqn.batch_size = to_u64(v); }},
      {"train.buffer_size", [](RunConfig& c, const std::string& v) { c.dqn.buffer_size = to_u64(v); }},
      {"train.learning_starts", [](RunConfig& c, const std::string& v) { c.dqn.learning_starts = to_u64(v); }},
      {"train.train_every", [](RunConfig& c, const std::string& v) { c.dqn.train_every = to_u64(v); }},
      {"train.tau", [](RunConfig& c, const std::string& v) { c.dqn.tau = to_double(v); }},
      {"train.explore_start", [](RunConfig& c, const std::string& v) { c.dqn.explore.start = to_double(v); }},
      {"train.explore_end", [](RunConfig& c, const std::string& v) { c.dqn.explore.end = to_double(v); }},
      {"train.explore_frac", [](RunConfig& c, const std::string& v) { c.dqn.explore.frac = to_double(v); }},
      // PPO family
      {"train.rollout_steps", [](RunConfig& c, const std::string& v) { c.ppo.rollout_steps = to_u64(v); }},
      {"train.epochs", [](RunConfig& c, const std::string& v) { c.ppo.epochs = to_u64(v); }},
      {"train.minibatch", [](RunConfig& c, const std::string& v) { c.ppo.minibatch = to_u64(v); }},
      {"train.clip", [](RunConfig& c, const std::string& v) { c.ppo.clip = to_double(v); }},
      {"train.gae_lambda", [](RunConfig& c, const std::string& v) { c.ppo.gae_lambda = to_double(v); }},
      {"train.entropy_coef", [](RunConfig& c, const std::string& v) { c.ppo.entropy_coef = to_double(v); }},
      {"train.init_log_std", [](RunConfig& c, const std::string& v) { c.ppo.init_log_std = to_double(v); }},
      {"train.normalize_critic", [](RunConfig& c, const std::string& v) { c.ppo.normalize_critic = to_bool(v); }},
      {"train.normalize_advantages",
       [](RunConfig& c, const std::string& v) { c.ppo.normalize_advantages = to_bool(v); }},
      {"train.min_q_steps", [](RunConfig& c, const std::string& v) { c.ppo.min_q_steps = to_int(v); }},

      {"net.hidden", [](RunConfig& c, const std::string& v) { c.dqn.hidden = c.ppo.hidden = to_widths(v); }},
      {"net.activation",
       [](RunConfig& c, const std::string& v) { c.dqn.activation = c.ppo.activation = to_activation(v); }},

      {"sched.eps_target", [](RunConfig& c, const std::string& v) { c.dqn.eps.target = c.ppo.eps.target = to_double(v); }},
      {"sched.eps_begin",
       [](RunConfig& c, const std::string& v) { c.dqn.eps.begin_frac = c.ppo.eps.begin_frac = to_double(v); }},
      {"sched.eps_end", [](RunConfig& c, const std::string& v) { c.dqn.eps.end_frac = c.ppo.eps.end_frac = to_double(v); }},
      {"sched.kappa_wst_target",
       [](RunConfig& c, const std::string& v) { c.dqn.kappa_wst.target = c.ppo.kappa_wst.target = to_double(v); }},
      {"sched.kappa_wst_shape",
       [](RunConfig& c, const std::string& v) { c.dqn.kappa_wst.shape = c.ppo.kappa_wst.shape = to_shape(v); }},
      {"sched.kappa_wst_delay",
       [](RunConfig& c, const std::string& v) { c.dqn.kappa_wst.delay_frac = c.ppo.kappa_wst.delay_frac = to_double(v); }},
      {"sched.kappa_wst_rate",
       [](RunConfig& c, const std::string& v) { c.dqn.kappa_wst.rate = c.ppo.kappa_wst.rate = to_double(v); }},

      {"eval.attacks",
       [](RunConfig& c, const std::string& v) {
         c.eval.attacks.clear();
         for (const auto& name : split(v, ',')) c.eval.attacks.push_back(parse_attack(name));
       }},
      {"eval.eps", [](RunConfig& c, const std::string& v) { c.eval.eps = to_double(v); }},
      {"eval.episodes", [](RunConfig& c, const std::string& v) { c.eval.episodes = to_u64(v); }},
      {"eval.steps", [](RunConfig& c, const std::string& v) { c.eval.steps = to_int(v); }},
      {"eval.seed", [](RunConfig& c, const std::string& v) { c.eval.seed = to_u64(v); }},
      {"eval.exact", [](RunConfig& c, const std::string& v) { c.eval.exact = to_bool(v); }},
  };
  return table;
}

}  // namespace

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

RunConfig make_run_config(const std::map<std::string, std::string>& entries) {
  RunConfig c;
  c.entries = entries;
  const auto& table = setters();
  for (const auto& [key, value] : entries) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(c, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("bad value '" + value + "' for '" + key + "': " + e.what());
    }
  }
  c.dqn.wocar = c.algo == Algo::wocar_dqn;
  c.ppo.wocar = c.algo == Algo::wocar_ppo;
  try {
    if (is_dqn(c.algo)) {
      validate(c.dqn);
    } else {
      validate(c.ppo);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (c.eval.episodes == 0) throw ConfigError("eval.episodes must be positive");
  if (c.eval.steps < 1) throw ConfigError("eval.steps must be at least 1");
  if (c.eval.attacks.empty()) throw ConfigError("eval.attacks must name at least one attack");
  return c;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!entries.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return entries;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return make_run_config(parse_config_text(ss.str()));
}

void set_key(RunConfig& config, const std::string& key, const std::string& value) {
  auto entries = config.entries;
  entries[key] = value;
  config = make_run_config(entries);
}

std::string to_text(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& [k, v] : config.entries) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace wocar
