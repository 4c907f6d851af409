#include "wocar/agent.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "wocar/error.hpp"

namespace wocar {

std::string algo_name(Algo algo) {
  switch (algo) {
    case Algo::dqn:
      return "dqn";
    case Algo::wocar_dqn:
      return "wocar-dqn";
    case Algo::ppo:
      return "ppo";
    case Algo::wocar_ppo:
      return "wocar-ppo";
  }
  return "dqn";
}

Algo parse_algo(const std::string& name) {
  if (name == "dqn") return Algo::dqn;
  if (name == "wocar-dqn") return Algo::wocar_dqn;
  if (name == "ppo") return Algo::ppo;
  if (name == "wocar-ppo") return Algo::wocar_ppo;
  throw ConfigError("unknown algorithm '" + name + "' (expected dqn, wocar-dqn, ppo, wocar-ppo)");
}

bool is_wocar(Algo algo) { return algo == Algo::wocar_dqn || algo == Algo::wocar_ppo; }
bool is_dqn(Algo algo) { return algo == Algo::dqn || algo == Algo::wocar_dqn; }

std::size_t Agent::greedy_action(std::span<const double> obs) const {
  if (!discrete) throw InvalidArgument("greedy_action: agent has continuous actions");
  return argmax(actor(obs));
}

std::vector<double> Agent::mean_action(std::span<const double> obs) const {
  if (discrete) throw InvalidArgument("mean_action: agent has discrete actions");
  auto a = actor(obs);
  for (std::size_t i = 0; i < a.size() && i < act_low.size(); ++i) a[i] = std::clamp(a[i], act_low[i], act_high[i]);
  return a;
}

DeterministicPolicy extract_tabular_policy(const Network& net, std::size_t n_states) {
  if (net.spec.input_dim() != n_states) throw InvalidArgument("extract_tabular_policy: network input is not one-hot over the states");
  DeterministicPolicy pi;
  pi.action_of.resize(n_states);
  std::vector<double> x(n_states, 0.0);
  for (StateId s = 0; s < n_states; ++s) {
    x[s] = 1.0;
    pi.action_of[s] = argmax(net(x));
    x[s] = 0.0;
  }
  return pi;
}

DeterministicPolicy extract_tabular_policy(const Agent& agent, const TabularEnv& env) {
  if (!agent.discrete) throw InvalidArgument("extract_tabular_policy: agent has continuous actions");
  return extract_tabular_policy(agent.actor, env.mdp().n_states);
}

namespace {

void write_vec(std::ostream& out, const char* key, const std::vector<double>& v) {
  out << key << ' ' << v.size();
  for (double x : v) out << ' ' << x;
  out << '\n';
}

std::vector<double> read_vec(std::istream& in, const std::string& key) {
  std::string k;
  std::size_t n = 0;
  if (!(in >> k >> n) || k != key) throw ParseError(0, "agent checkpoint: expected '" + key + "'");
  std::vector<double> v(n);
  for (double& x : v) {
    if (!(in >> x)) throw ParseError(0, "agent checkpoint: truncated '" + key + "'");
  }
  return v;
}

}  // namespace

void write_agent(std::ostream& out, const Agent& agent) {
  out << std::setprecision(17);
  out << "AGENT " << algo_name(agent.algo) << ' ' << (agent.discrete ? "discrete" : "continuous") << '\n';
  write_vec(out, "logstd", agent.log_std);
  write_vec(out, "actlow", agent.act_low);
  write_vec(out, "acthigh", agent.act_high);
  write_network(out, "actor", agent.actor);
  if (agent.critic) write_network(out, "critic", *agent.critic);
  if (agent.value) write_network(out, "value", *agent.value);
}

Agent read_agent(std::istream& in) {
  std::string tag;
  std::string algo;
  std::string kind;
  if (!(in >> tag >> algo >> kind) || tag != "AGENT") throw ParseError(1, "agent checkpoint: missing AGENT header");
  Agent agent;
  agent.algo = parse_algo(algo);
  if (kind != "discrete" && kind != "continuous") throw ParseError(1, "agent checkpoint: unknown action kind '" + kind + "'");
  agent.discrete = kind == "discrete";
  agent.log_std = read_vec(in, "logstd");
  agent.act_low = read_vec(in, "actlow");
  agent.act_high = read_vec(in, "acthigh");
  in >> std::ws;
  std::string name;
  Network net;
  bool have_actor = false;
  while (read_network(in, name, net)) {
    if (name == "actor") {
      agent.actor = net;
      have_actor = true;
    } else if (name == "critic") {
      agent.critic = net;
    } else if (name == "value") {
      agent.value = net;
    } else {
      throw ParseError(0, "agent checkpoint: unknown network '" + name + "'");
    }
  }
  if (!have_actor) throw ParseError(0, "agent checkpoint: no actor network");
  return agent;
}

void save_agent(const std::string& path, const Agent& agent) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write checkpoint '" + path + "'");
  write_agent(out, agent);
  if (!out) throw InvalidArgument("failed writing checkpoint '" + path + "'");
}

Agent load_agent(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open checkpoint '" + path + "'");
  return read_agent(in);
}

}  // namespace wocar
