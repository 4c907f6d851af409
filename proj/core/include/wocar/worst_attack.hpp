#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wocar/mdp.hpp"

namespace wocar {

/// Dense state x action table.
struct QTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> values;

  QTable() = default;
  QTable(std::size_t states, std::size_t actions, double fill = 0.0)
      : n_states(states), n_actions(actions), values(states * actions, fill) {}

  double& operator()(StateId s, ActionId a) { return values[s * n_actions + a]; }
  double operator()(StateId s, ActionId a) const { return values[s * n_actions + a]; }
};

using ValueTable = std::vector<double>;

/// Deterministic observation attacker: state s is shown as perturb_to[s].
struct AttackerMap {
  std::vector<StateId> perturb_to;

  StateId operator()(StateId s) const { return perturb_to[s]; }
  static AttackerMap identity(std::size_t n_states);
};

double sup_norm_diff(const QTable& a, const QTable& b);

/// Actions the attacker can make `policy` take at s: {pi(o) : o in B(s)},
/// sorted ascending and deduplicated.
std::vector<ActionId> adv_action_set(const DeterministicPolicy& policy,
                                     const TabularPerturbation& perturb, StateId s);

/// One application of the worst-attack Bellman operator:
///   out[s][a] = R(s,a) + gamma * sum_s' P(s'|s,a) min_{a' in A_adv(s')} q[s'][a']
/// Terminal successors contribute nothing.
QTable worst_attack_backup(const QTable& q, const TabularMDP& mdp, const DeterministicPolicy& policy,
                           const TabularPerturbation& perturb);

struct FixedPointOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100000;
};

struct FixedPointResult {
  QTable q;
  std::size_t iterations = 0;
  double last_delta = 0.0;
};

/// Jacobi iteration of `worst_attack_backup` from the zero table until the
/// sup-norm step is <= tol. Throws NumericalError after max_iter sweeps.
FixedPointResult worst_attack_iterate(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                      const TabularPerturbation& perturb,
                                      FixedPointOptions options = {});

QTable worst_attack_fixed_point(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                const TabularPerturbation& perturb, FixedPointOptions options = {});

/// V(s) = min_{a in A_adv(s)} q_worst[s][a].
ValueTable worst_attack_state_value(const QTable& q_worst, const DeterministicPolicy& policy,
                                    const TabularPerturbation& perturb);

/// Worst action per state (lowest index among ties).
std::vector<ActionId> worst_attack_actions(const QTable& q_worst, const DeterministicPolicy& policy,
                                           const TabularPerturbation& perturb);

/// Exact Q^pi by a dense linear solve of the policy evaluation equations.
QTable policy_evaluation(const TabularMDP& mdp, const DeterministicPolicy& policy);

/// Exact V of the stationary policy s -> pi(h(s)).
ValueTable evaluate_attacked(const TabularMDP& mdp, const DeterministicPolicy& policy,
                             const AttackerMap& attacker);

struct WorstValue {
  ValueTable value;
  AttackerMap attacker;
};

/// Enumerates every attacker map and evaluates each by a linear solve.
/// Terminal states are pinned to the identity since their choice has no
/// effect. Throws InvalidArgument naming the product size when the number of
/// maps exceeds `cap`.
WorstValue brute_force_worst_value(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                   const TabularPerturbation& perturb, std::uint64_t cap = 1000000);

/// Number of attacker maps brute_force_worst_value would enumerate, saturated
/// at UINT64_MAX.
std::uint64_t attacker_count(const TabularMDP& mdp, const TabularPerturbation& perturb);

/// Optimal attacker found by policy iteration on the attacker's own MDP
/// (states S, actions B(s), costs R(s, pi(o))). Exact like the enumeration
/// but polynomial, so it handles instances where enumeration is refused.
WorstValue attacker_policy_iteration(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                     const TabularPerturbation& perturb);

/// Exact worst case by whichever exact method fits: enumeration when the
/// number of maps is within `cap`, attacker policy iteration otherwise.
WorstValue exact_worst_value(const TabularMDP& mdp, const DeterministicPolicy& policy,
                             const TabularPerturbation& perturb, std::uint64_t cap = 1000000);

/// Expected value under the initial distribution.
double expected_start_value(const TabularMDP& mdp, const ValueTable& v);

/// Greedy policy of a Q table, ties to the lowest action.
DeterministicPolicy greedy_policy(const QTable& q);

/// Optimal Q* by value iteration (used for natural-optimum comparisons).
QTable optimal_q(const TabularMDP& mdp, double tol = 1e-12, std::size_t max_iter = 1000000);

}  // namespace wocar
