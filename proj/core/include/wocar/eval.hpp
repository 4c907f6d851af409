#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wocar/agent.hpp"
#include "wocar/attacks.hpp"
#include "wocar/env.hpp"

namespace wocar {

struct EvalReport {
  AttackSpec attack;
  std::size_t episodes = 0;
  std::vector<double> returns;             // undiscounted, in episode order
  std::vector<double> discounted_returns;  // with the env's gamma
  double mean = 0.0;
  double stddev = 0.0;
  double discounted_mean = 0.0;
  double discounted_stddev = 0.0;
};

/// Mean and population standard deviation, computed on a sorted copy so the
/// result does not depend on episode order.
void summarize(std::span<const double> values, double& mean, double& stddev);

/// Runs `episodes` episodes of the agent's deterministic policy (greedy or
/// mean action), perturbing each observation before the agent sees it. The
/// environment always advances from the true state. Episode i draws its env
/// and attack randomness from streams derived from (seed, i), so reports are
/// reproducible and independent of `threads`.
///
/// Tabular envs resolve gradient attacks to the best member of B(s) within
/// the budget (see tabular_attack). Throws InvalidArgument when the attack
/// does not apply to the env (tabular-bruteforce on a non-tabular env,
/// minbest on continuous actions).
EvalReport evaluate(const Agent& agent, const Environment& env, const AttackSpec& attack, std::size_t episodes,
                    std::uint64_t seed, unsigned threads = 1);

/// Worker count from WOCAR_THREADS (unset or invalid: 1), capped by `wanted`.
unsigned thread_budget(unsigned wanted);

}  // namespace wocar
