#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wocar/agent.hpp"
#include "wocar/env.hpp"
#include "wocar/losses.hpp"
#include "wocar/net.hpp"
#include "wocar/schedules.hpp"

namespace wocar {

/// How the trainers derive the adversarial action set of a next state.
///   tabular:   exact, by evaluating the policy on every member of B(s)
///              affordable within eps_t (tabular envs only).
///   ibp:       interval bounds over the l_inf ball of radius eps_t around
///              the observation.
///   automatic: tabular on tabular envs, ibp elsewhere.
enum class AdvSetMode { automatic, tabular, ibp };

AdvSetMode resolve(AdvSetMode mode, const Environment& env);

struct DQNConfig {
  bool wocar = true;
  std::uint64_t total_steps = 20000;
  std::vector<std::size_t> hidden{128, 128};
  Activation activation = Activation::relu;
  AdamConfig adam{1e-3};
  AdamConfig critic_adam{1e-3};
  std::size_t batch_size = 32;
  std::size_t buffer_size = 20000;
  std::uint64_t learning_starts = 1000;
  std::uint64_t train_every = 1;
  double tau = 0.005;
  ExplorationSchedule explore;
  EpsSchedule eps{-1.0};  // target < 0 selects the env budget
  KappaSchedule kappa_wst{KappaShape::delayed_exponential, 0.5};
  double kappa_reg = 0.1;
  AdvSetMode adv_sets = AdvSetMode::automatic;
  RegOptions reg;  // eps is overwritten by the schedule
  double grad_clip = 10.0;
  std::uint64_t log_every = 1000;
  std::uint64_t checkpoint_every = 0;  // 0 disables
};

void validate(const DQNConfig& config);

/// Networks and optimizer state. Vanilla DQN leaves q_r and critic empty.
struct DQNState {
  Network q_v;
  Network q_target;
  Network q_r;
  Network critic;
  AdamState adam_v;
  AdamState adam_r;
  AdamState adam_critic;
  std::uint64_t step = 0;
  std::uint64_t updates = 0;
};

struct DQNResult {
  DQNState state;
  Agent agent;
  std::vector<MetricsRecord> metrics;
  /// One entry per gradient update: "q_v", "q_r", "critic", "reg".
  std::map<std::string, std::vector<double>> loss_trace;
  /// Per-sample targets of the last update, for target comparisons.
  std::vector<double> last_vanilla_targets;
  std::vector<double> last_robust_targets;
};

/// Vanilla DQN (config.wocar = false) or WocaR-DQN. Both act epsilon-greedy
/// on the acting network (Q_v resp. Q_r) and share every random stream, so
/// the same seed drives the same exploration, replay draws and env noise.
DQNResult dqn_train(Environment& env, const DQNConfig& config, std::uint64_t seed, const EvalHook& eval = {},
                    const CheckpointHook& checkpoint = {});

/// Robust target y^r = r + gamma * max_a' [k Q_v'(s', a') + (1 - k) Q_crit(s', a')].
std::vector<double> robust_dqn_targets(const Network& q_target, const Network& critic,
                                       std::span<const Transition> batch, double gamma, double kappa_wst);

/// Vanilla target y = r + gamma * max_a' Q_v'(s', a').
std::vector<double> vanilla_dqn_targets(const Network& q_target, std::span<const Transition> batch, double gamma);

/// Expected worst-case estimate of the critic at the start distribution:
/// sum_s d0(s) min_{a in A_adv(s)} critic(s, a), with A_adv from `actor`
/// over B(s) at budget eps.
double critic_start_estimate(const Network& critic, const Network& actor, const TabularEnv& env, double eps);

}  // namespace wocar
