#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wocar/env.hpp"
#include "wocar/mdp.hpp"
#include "wocar/net.hpp"

namespace wocar {

enum class Algo { dqn, wocar_dqn, ppo, wocar_ppo };

std::string algo_name(Algo algo);
/// Throws ConfigError for unknown names.
Algo parse_algo(const std::string& name);
bool is_wocar(Algo algo);
bool is_dqn(Algo algo);

/// A trained agent as seen by evaluation and attacks. `actor` is the Q
/// network for DQN agents (acting greedily) and the policy network for PPO
/// agents (softmax logits or Gaussian mean).
struct Agent {
  Algo algo = Algo::dqn;
  bool discrete = true;
  Network actor;
  std::vector<double> log_std;
  std::vector<double> act_low;
  std::vector<double> act_high;
  std::optional<Network> critic;  // worst-attack critic
  std::optional<Network> value;   // PPO state value

  std::size_t greedy_action(std::span<const double> obs) const;
  /// Mean action clipped to the action box.
  std::vector<double> mean_action(std::span<const double> obs) const;
};

/// Greedy action of every state of a tabular env under one-hot observations.
DeterministicPolicy extract_tabular_policy(const Agent& agent, const TabularEnv& env);
DeterministicPolicy extract_tabular_policy(const Network& net, std::size_t n_states);

void write_agent(std::ostream& out, const Agent& agent);
Agent read_agent(std::istream& in);
void save_agent(const std::string& path, const Agent& agent);
Agent load_agent(const std::string& path);

struct MetricsRecord {
  std::uint64_t step = 0;
  std::map<std::string, double> values;
};

/// Called at every log point with the current agent; fills evaluation
/// metrics (returns under attack, exact tabular values) into the record.
using EvalHook = std::function<void(const Agent&, MetricsRecord&)>;
/// Called at every checkpoint interval.
using CheckpointHook = std::function<void(const Agent&, std::uint64_t step)>;

}  // namespace wocar
