#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wocar/agent.hpp"
#include "wocar/attacks.hpp"
#include "wocar/dqn.hpp"
#include "wocar/ppo.hpp"

namespace wocar {

/// Periodic evaluation during training and the final summary.
struct EvalSettings {
  std::vector<AttackKind> attacks{AttackKind::none};
  double eps = -1.0;  // < 0 selects the env budget
  std::size_t episodes = 10;
  int steps = 10;
  std::uint64_t seed = 12345;
  /// Tabular envs: also log the exact natural and worst-case values of the
  /// extracted policy at every log point.
  bool exact = true;
};

/// A run described by flat key=value entries. Keys without a prefix are
/// algo, env, seed and out; the rest use the train., net., sched. and eval.
/// prefixes (see README). Keys that only apply to the other algorithm family
/// are accepted and ignored.
struct RunConfig {
  std::map<std::string, std::string> entries;
  Algo algo = Algo::wocar_dqn;
  std::string env = "gohome";
  std::uint64_t seed = 0;
  std::string out = "run";
  DQNConfig dqn;
  PPOConfig ppo;
  EvalSettings eval;
};

/// Builds and validates a config; throws ConfigError naming the offending
/// key for unknown keys, unparsable values or failed validation.
RunConfig make_run_config(const std::map<std::string, std::string>& entries);

/// Parses the key=value text format. Blank lines and '#' comments are
/// skipped; duplicate keys are an error. ConfigError messages carry the line.
std::map<std::string, std::string> parse_config_text(const std::string& text);

RunConfig load_run_config(const std::string& path);

/// Sets one key and rebuilds the typed fields.
void set_key(RunConfig& config, const std::string& key, const std::string& value);

/// Canonical text of the explicit entries, sorted by key.
std::string to_text(const RunConfig& config);

std::vector<std::string> known_keys();

}  // namespace wocar
