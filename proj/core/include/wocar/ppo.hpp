#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wocar/agent.hpp"
#include "wocar/dqn.hpp"
#include "wocar/env.hpp"
#include "wocar/losses.hpp"
#include "wocar/net.hpp"
#include "wocar/schedules.hpp"

namespace wocar {

struct PPOConfig {
  bool wocar = true;
  std::uint64_t total_steps = 100000;
  std::size_t rollout_steps = 1024;
  std::size_t epochs = 4;
  std::size_t minibatch = 64;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::tanh;
  AdamConfig policy_adam{3e-4};
  AdamConfig value_adam{1e-3};
  AdamConfig critic_adam{1e-3};
  double clip = 0.2;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double init_log_std = -0.5;
  bool normalize_advantages = true;
  /// Standardize the critic values added to the advantages per minibatch.
  bool normalize_critic = true;
  EpsSchedule eps{-1.0};  // target < 0 selects the env budget
  KappaSchedule kappa_wst{KappaShape::linear, 0.8};
  double kappa_reg = 0.1;
  AdvSetMode adv_sets = AdvSetMode::automatic;
  RegOptions reg;
  int min_q_steps = 50;
  double grad_clip = 10.0;
  /// Largest probability ratio tolerated before the run aborts.
  double ratio_limit = 1e6;
  std::uint64_t log_every = 10000;
  std::uint64_t checkpoint_every = 0;
};

void validate(const PPOConfig& config);

struct PPOState {
  Network policy;
  std::vector<double> log_std;
  Network value;
  Network critic;
  AdamState adam_policy;  // over policy params followed by log_std
  AdamState adam_value;
  AdamState adam_critic;
  std::uint64_t step = 0;
  std::uint64_t iterations = 0;
};

struct PPOResult {
  PPOState state;
  Agent agent;
  std::vector<MetricsRecord> metrics;
  /// One entry per minibatch update: "policy", "value", "critic", "reg".
  std::map<std::string, std::vector<double>> loss_trace;
};

/// Vanilla PPO (config.wocar = false) or WocaR-PPO, discrete or Gaussian.
PPOResult ppo_train(Environment& env, const PPOConfig& config, std::uint64_t seed, const EvalHook& eval = {},
                    const CheckpointHook& checkpoint = {});

/// Clipped surrogate for one sample, as a loss: -min(rho A, clip(rho) A).
/// Also returns d loss / d log pi(a|s).
struct ClipTerm {
  double loss = 0.0;
  double dlogp = 0.0;
  bool clipped = false;
};
ClipTerm ppo_clip_term(double ratio, double advantage, double clip);

/// Generalized advantage estimates. `episode_end[t]` cuts the recursion;
/// `next_values[t]` is 0 for terminal transitions and V(s_{t+1}) otherwise.
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const double> next_values, std::span<const std::uint8_t> episode_end,
                                   double gamma, double lambda);

}  // namespace wocar
