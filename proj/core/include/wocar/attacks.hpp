#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wocar/env.hpp"
#include "wocar/net.hpp"
#include "wocar/worst_attack.hpp"

namespace wocar {

enum class AttackKind { none, random, maxdiff, minbest, pgd, tabular_bruteforce };

std::string attack_name(AttackKind kind);
/// Accepts none, random, maxdiff, minbest, pgd, tabular-bruteforce; throws
/// ConfigError otherwise.
AttackKind parse_attack(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double eps = 0.0;
  int steps = 10;
  std::uint64_t seed = 0;
};

void validate(const AttackSpec& spec);

/// The network an attack differentiates through. For discrete victims the
/// outputs are treated as logits (Q values for DQN agents); for continuous
/// victims they are the action mean.
struct Victim {
  const Network* net = nullptr;
  bool discrete = true;
};

/// Objective maximized by attack_pgd: cross-entropy of the perturbed output
/// against the clean greedy action (discrete) or the squared distance of the
/// perturbed mean from the clean mean (continuous).
double pgd_objective(const Victim& victim, std::span<const double> clean, std::span<const double> perturbed);

/// Objective maximized by attack_maxdiff: KL for discrete victims, squared
/// distance of means for continuous ones.
double maxdiff_objective(const Victim& victim, std::span<const double> clean, std::span<const double> perturbed);

/// Clamps x into the l_inf ball of radius eps around s.
void project_linf(std::span<double> x, std::span<const double> s, double eps);
bool within_linf(std::span<const double> x, std::span<const double> s, double eps);

/// Uniform draw from the l_inf ball.
std::vector<double> attack_random(std::span<const double> s, double eps, std::mt19937_64& rng);

/// `steps` projected signed-gradient ascent steps of size 2 eps / steps on
/// pgd_objective, returning the best iterate. Discrete victims start at s;
/// continuous victims start at a uniform point of the ball (the objective is
/// flat at s).
std::vector<double> attack_pgd(const Victim& victim, std::span<const double> s, double eps, int steps,
                               std::mt19937_64& rng);

/// Ascent on maxdiff_objective from a uniform point of the ball with a fixed
/// step of eps / 4, so a longer run extends a shorter one.
std::vector<double> attack_maxdiff(const Victim& victim, std::span<const double> s, double eps, int steps,
                                   std::mt19937_64& rng);

/// One FGSM step lowering the log-probability of the clean greedy action.
/// Discrete victims only.
std::vector<double> attack_minbest(const Victim& victim, std::span<const double> s, double eps);

/// Optimal deterministic observation attacker of a tabular policy. Uses
/// enumeration when the number of maps is within `cap`, attacker policy
/// iteration otherwise; both are exact.
AttackerMap attack_tabular_bruteforce(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                      const TabularPerturbation& perturb, std::uint64_t cap = 1000000);

/// Tabular analogue of the gradient attacks: the member of B(s) within
/// budget eps that maximizes the attack's objective (random picks uniformly).
StateId tabular_attack(AttackKind kind, const Victim& victim, const TabularEnv& env, StateId s, double eps,
                       std::mt19937_64& rng);

}  // namespace wocar
