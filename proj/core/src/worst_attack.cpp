#include "wocar/worst_attack.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wocar/error.hpp"

namespace wocar {

namespace {

void check_shapes(const TabularMDP& mdp, const DeterministicPolicy& policy,
                  const TabularPerturbation& perturb) {
  validate(policy, mdp);
  validate(perturb, mdp.n_states);
}

/// Solves V = r_pi + gamma P_pi V with terminal rows pinned to zero.
ValueTable solve_stationary(const TabularMDP& mdp, const std::vector<ActionId>& acting) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (StateId s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    const ActionId act = acting[s];
    const auto si = static_cast<Eigen::Index>(s);
    b(si) = mdp.r(s, act);
    const auto probs = mdp.row(s, act);
    for (StateId k = 0; k < mdp.n_states; ++k) {
      if (mdp.is_terminal(k)) continue;
      a(si, static_cast<Eigen::Index>(k)) -= mdp.gamma * probs[k];
    }
  }
  const Eigen::VectorXd v = a.partialPivLu().solve(b);
  return ValueTable(v.data(), v.data() + n);
}

double continuation(const TabularMDP& mdp, StateId s, ActionId a, const ValueTable& v) {
  double acc = 0.0;
  const auto probs = mdp.row(s, a);
  for (StateId k = 0; k < mdp.n_states; ++k) {
    if (probs[k] == 0.0 || mdp.is_terminal(k)) continue;
    acc += probs[k] * v[k];
  }
  return acc;
}

}  // namespace

AttackerMap AttackerMap::identity(std::size_t n_states) {
  AttackerMap h;
  h.perturb_to.resize(n_states);
  for (StateId s = 0; s < n_states; ++s) h.perturb_to[s] = s;
  return h;
}

double sup_norm_diff(const QTable& a, const QTable& b) {
  if (a.values.size() != b.values.size()) throw InvalidArgument("sup_norm_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

std::vector<ActionId> adv_action_set(const DeterministicPolicy& policy,
                                     const TabularPerturbation& perturb, StateId s) {
  std::vector<ActionId> out;
  out.reserve(perturb.admissible[s].size());
  for (StateId o : perturb.admissible[s]) out.push_back(policy(o));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ValueTable worst_attack_state_value(const QTable& q_worst, const DeterministicPolicy& policy,
                                    const TabularPerturbation& perturb) {
  ValueTable v(q_worst.n_states);
  for (StateId s = 0; s < q_worst.n_states; ++s) {
    double m = std::numeric_limits<double>::infinity();
    for (StateId o : perturb.admissible[s]) m = std::min(m, q_worst(s, policy(o)));
    v[s] = m;
  }
  return v;
}

std::vector<ActionId> worst_attack_actions(const QTable& q_worst, const DeterministicPolicy& policy,
                                           const TabularPerturbation& perturb) {
  std::vector<ActionId> out(q_worst.n_states);
  for (StateId s = 0; s < q_worst.n_states; ++s) {
    const auto actions = adv_action_set(policy, perturb, s);
    ActionId best = actions.front();
    for (ActionId a : actions) {
      if (q_worst(s, a) < q_worst(s, best)) best = a;
    }
    out[s] = best;
  }
  return out;
}

QTable worst_attack_backup(const QTable& q, const TabularMDP& mdp, const DeterministicPolicy& policy,
                           const TabularPerturbation& perturb) {
  if (q.n_states != mdp.n_states || q.n_actions != mdp.n_actions) {
    throw InvalidArgument("worst_attack_backup: Q table shape does not match the MDP");
  }
  check_shapes(mdp, policy, perturb);
  ValueTable next_value = worst_attack_state_value(q, policy, perturb);
  QTable out(mdp.n_states, mdp.n_actions);
  for (StateId s = 0; s < mdp.n_states; ++s) {
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      out(s, a) = mdp.r(s, a) + mdp.gamma * continuation(mdp, s, a, next_value);
    }
  }
  return out;
}

FixedPointResult worst_attack_iterate(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                      const TabularPerturbation& perturb, FixedPointOptions options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("worst_attack_fixed_point: tol must be positive");
  FixedPointResult result;
  result.q = QTable(mdp.n_states, mdp.n_actions);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    QTable next = worst_attack_backup(result.q, mdp, policy, perturb);
    result.last_delta = sup_norm_diff(next, result.q);
    result.q = std::move(next);
    result.iterations = it;
    if (result.last_delta <= options.tol) return result;
  }
  throw NumericalError("worst-attack iteration did not reach tol " + std::to_string(options.tol) +
                       " within " + std::to_string(options.max_iter) + " sweeps (last step " +
                       std::to_string(result.last_delta) + ")");
}

QTable worst_attack_fixed_point(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                const TabularPerturbation& perturb, FixedPointOptions options) {
  return worst_attack_iterate(mdp, policy, perturb, options).q;
}

QTable policy_evaluation(const TabularMDP& mdp, const DeterministicPolicy& policy) {
  validate(policy, mdp);
  const ValueTable v = solve_stationary(mdp, policy.action_of);
  QTable q(mdp.n_states, mdp.n_actions);
  for (StateId s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      q(s, a) = mdp.r(s, a) + mdp.gamma * continuation(mdp, s, a, v);
    }
  }
  return q;
}

ValueTable evaluate_attacked(const TabularMDP& mdp, const DeterministicPolicy& policy,
                             const AttackerMap& attacker) {
  std::vector<ActionId> acting(mdp.n_states);
  for (StateId s = 0; s < mdp.n_states; ++s) acting[s] = policy(attacker(s));
  return solve_stationary(mdp, acting);
}

std::uint64_t attacker_count(const TabularMDP& mdp, const TabularPerturbation& perturb) {
  std::uint64_t total = 1;
  for (StateId s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    const std::uint64_t k = perturb.admissible[s].size();
    if (total > std::numeric_limits<std::uint64_t>::max() / k) return std::numeric_limits<std::uint64_t>::max();
    total *= k;
  }
  return total;
}

WorstValue brute_force_worst_value(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                   const TabularPerturbation& perturb, std::uint64_t cap) {
  check_shapes(mdp, policy, perturb);
  const std::uint64_t count = attacker_count(mdp, perturb);
  if (count > cap) {
    throw InvalidArgument("brute-force enumeration refused: " +
                          (count == std::numeric_limits<std::uint64_t>::max() ? std::string("more than 2^64")
                                                                              : std::to_string(count)) +
                          " attacker maps exceed the cap of " + std::to_string(cap));
  }

  std::vector<StateId> live;
  for (StateId s = 0; s < mdp.n_states; ++s) {
    if (!mdp.is_terminal(s)) live.push_back(s);
  }
  std::vector<std::size_t> digit(live.size(), 0);
  AttackerMap h = AttackerMap::identity(mdp.n_states);

  WorstValue best;
  best.value.assign(mdp.n_states, std::numeric_limits<double>::infinity());
  ValueTable pointwise(mdp.n_states, std::numeric_limits<double>::infinity());
  double best_total = std::numeric_limits<double>::infinity();

  while (true) {
    for (std::size_t i = 0; i < live.size(); ++i) h.perturb_to[live[i]] = perturb.admissible[live[i]][digit[i]];
    const ValueTable v = evaluate_attacked(mdp, policy, h);
    double total = 0.0;
    for (StateId s = 0; s < mdp.n_states; ++s) {
      pointwise[s] = std::min(pointwise[s], v[s]);
      total += v[s];
    }
    // The optimal map is pointwise minimal, hence also minimal in sum; keep
    // the first one attaining the smallest total.
    if (total < best_total) {
      best_total = total;
      best.attacker = h;
    }
    std::size_t i = 0;
    while (i < live.size() && ++digit[i] == perturb.admissible[live[i]].size()) digit[i++] = 0;
    if (i == live.size()) break;
  }
  best.value = pointwise;
  return best;
}

WorstValue attacker_policy_iteration(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                     const TabularPerturbation& perturb) {
  check_shapes(mdp, policy, perturb);
  WorstValue out;
  out.attacker = AttackerMap::identity(mdp.n_states);
  // Improvement must be strict by more than rounding noise, otherwise
  // policy iteration can cycle between equal-valued maps.
  const double slack = 1e-12;
  for (std::size_t round = 0; round < 10000; ++round) {
    out.value = evaluate_attacked(mdp, policy, out.attacker);
    bool changed = false;
    for (StateId s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) continue;
      const StateId current = out.attacker(s);
      auto score = [&](StateId o) {
        const ActionId a = policy(o);
        return mdp.r(s, a) + mdp.gamma * continuation(mdp, s, a, out.value);
      };
      const double current_score = score(current);
      StateId best = current;
      double best_score = current_score;
      for (StateId o : perturb.admissible[s]) {
        const double sc = score(o);
        if (sc < best_score - slack * (1.0 + std::abs(best_score))) {
          best = o;
          best_score = sc;
        }
      }
      if (best != current) {
        out.attacker.perturb_to[s] = best;
        changed = true;
      }
    }
    if (!changed) return out;
  }
  throw NumericalError("attacker policy iteration did not terminate");
}

double expected_start_value(const TabularMDP& mdp, const ValueTable& v) {
  double acc = 0.0;
  for (StateId s = 0; s < mdp.n_states; ++s) acc += mdp.initial_dist[s] * v[s];
  return acc;
}

DeterministicPolicy greedy_policy(const QTable& q) {
  DeterministicPolicy pi;
  pi.action_of.resize(q.n_states);
  for (StateId s = 0; s < q.n_states; ++s) {
    ActionId best = 0;
    for (ActionId a = 1; a < q.n_actions; ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    pi.action_of[s] = best;
  }
  return pi;
}

QTable optimal_q(const TabularMDP& mdp, double tol, std::size_t max_iter) {
  QTable q(mdp.n_states, mdp.n_actions);
  ValueTable v(mdp.n_states, 0.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    QTable next(mdp.n_states, mdp.n_actions);
    for (StateId s = 0; s < mdp.n_states; ++s) {
      for (ActionId a = 0; a < mdp.n_actions; ++a) {
        next(s, a) = mdp.r(s, a) + mdp.gamma * continuation(mdp, s, a, v);
      }
    }
    const double delta = sup_norm_diff(next, q);
    q = std::move(next);
    for (StateId s = 0; s < mdp.n_states; ++s) {
      double m = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < mdp.n_actions; ++a) m = std::max(m, q(s, a));
      v[s] = m;
    }
    if (delta <= tol) return q;
  }
  throw NumericalError("value iteration did not converge");
}

WorstValue exact_worst_value(const TabularMDP& mdp, const DeterministicPolicy& policy,
                             const TabularPerturbation& perturb, std::uint64_t cap) {
  if (attacker_count(mdp, perturb) <= cap) return brute_force_worst_value(mdp, policy, perturb, cap);
  return attacker_policy_iteration(mdp, policy, perturb);
}

}  // namespace wocar
