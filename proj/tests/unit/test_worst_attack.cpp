#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wocar/error.hpp"
#include "wocar/mdp.hpp"
#include "wocar/worst_attack.hpp"

using namespace wocar;

namespace {

DeterministicPolicy random_policy(const TabularMDP& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<ActionId> pick(0, m.n_actions - 1);
  DeterministicPolicy pi;
  for (StateId s = 0; s < m.n_states; ++s) pi.action_of.push_back(pick(rng));
  return pi;
}

// A random instance with a couple of absorbing terminal states.
TabularMDP random_with_terminals(std::size_t n, std::size_t a, double gamma, std::uint64_t seed) {
  TabularMDP m = random_mdp(n, a, gamma, seed);
  if (n > 2) {
    m.terminal[n - 1] = 1;
    if (seed % 2) m.terminal[0] = 1;
    m.normalize_terminals();
  }
  return m;
}

}  // namespace

TEST_CASE("two-state chain worst-case values") {
  const Chain2 c = chain2();
  const QTable q = worst_attack_fixed_point(c.mdp, c.policy, c.perturb);
  CHECK(q(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(q(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(q(1, 0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(q(1, 1) == doctest::Approx(1.0).epsilon(1e-9));
  const ValueTable v = worst_attack_state_value(q, c.policy, c.perturb);
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(v[1] == doctest::Approx(2.0).epsilon(1e-9));
  const QTable qpi = policy_evaluation(c.mdp, c.policy);
  CHECK(qpi(0, 1) == doctest::Approx(1.0));
  CHECK(qpi(1, 0) == doctest::Approx(2.0));
  CHECK(adv_action_set(c.policy, c.perturb, 0) == std::vector<ActionId>{0, 1});
  CHECK(adv_action_set(c.policy, c.perturb, 1) == std::vector<ActionId>{0});
  const WorstValue w = brute_force_worst_value(c.mdp, c.policy, c.perturb);
  CHECK(w.attacker(0) == 1);
  CHECK(w.attacker(1) == 1);
  CHECK(w.value[0] == doctest::Approx(0.0));
}

TEST_CASE("zero discount gives the reward table") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TabularMDP m = random_mdp(4, 3, 0.0, seed);
    const auto pi = random_policy(m, seed);
    const QTable q = worst_attack_fixed_point(m, pi, random_perturbation(m, 3, seed));
    for (std::size_t i = 0; i < q.values.size(); ++i) CHECK(q.values[i] == doctest::Approx(m.reward[i]).epsilon(1e-12));
  }
}

TEST_CASE("identity perturbation gives the policy's own Q") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TabularMDP m = random_with_terminals(5, 3, 0.9, seed);
    const auto pi = random_policy(m, seed + 100);
    const QTable q = worst_attack_fixed_point(m, pi, TabularPerturbation::identity(m.n_states));
    const QTable qpi = policy_evaluation(m, pi);
    CHECK(oracle::rel_error(q.values, qpi.values) <= 1e-8);
  }
}

TEST_CASE("policy evaluation agrees with value iteration") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TabularMDP m = random_with_terminals(6, 2, 0.95, seed);
    const auto pi = random_policy(m, seed);
    const QTable q = policy_evaluation(m, pi);
    const auto v = oracle::iterate_policy_value(m, pi.action_of);
    for (StateId s = 0; s < m.n_states; ++s) CHECK(q(s, pi(s)) == doctest::Approx(v[s]).epsilon(1e-9));
  }
}

TEST_CASE("fixed point equals the pointwise worst over attacker maps") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 2 + seed % 4;
    const TabularMDP m = random_with_terminals(n, 2 + seed % 2, 0.5 + 0.4 * static_cast<double>(seed % 3) / 2.0, seed);
    const auto pi = random_policy(m, seed * 7);
    const TabularPerturbation pert = random_perturbation(m, 3, seed * 13);
    const QTable q = worst_attack_fixed_point(m, pi, pert);
    const ValueTable v = worst_attack_state_value(q, pi, pert);
    const auto oracle_v = oracle::enumerate_worst_value(m, pi, pert);
    CHECK(oracle::rel_error(v, oracle_v) <= 1e-8);

    const WorstValue brute = brute_force_worst_value(m, pi, pert);
    CHECK(oracle::rel_error(brute.value, oracle_v) <= 1e-8);
    const WorstValue pi_iter = attacker_policy_iteration(m, pi, pert);
    CHECK(oracle::rel_error(pi_iter.value, oracle_v) <= 1e-8);
    // the attacker read off the fixed point realises the bound
    AttackerMap greedy;
    const auto worst_a = worst_attack_actions(q, pi, pert);
    for (StateId s = 0; s < n; ++s) {
      StateId pick = s;
      for (StateId o : pert.admissible[s])
        if (pi(o) == worst_a[s]) {
          pick = o;
          break;
        }
      greedy.perturb_to.push_back(pick);
    }
    CHECK(oracle::rel_error(evaluate_attacked(m, pi, greedy), oracle_v) <= 1e-8);
  }
}

TEST_CASE("worst case never exceeds the natural value and shrinks with larger sets") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const TabularMDP m = random_with_terminals(6, 3, 0.9, seed);
    const auto pi = random_policy(m, seed);
    const TabularPerturbation small = random_perturbation(m, 3, seed);
    // superset: add one extra member everywhere
    TabularPerturbation big = small;
    for (StateId s = 0; s < m.n_states; ++s) {
      const StateId extra = (s + 1 + seed) % m.n_states;
      if (!big.contains(s, extra)) big.admissible[s].push_back(extra);
      std::sort(big.admissible[s].begin(), big.admissible[s].end());
    }
    const auto vpi = oracle::iterate_policy_value(m, pi.action_of);
    const ValueTable vs = worst_attack_state_value(worst_attack_fixed_point(m, pi, small), pi, small);
    const ValueTable vb = worst_attack_state_value(worst_attack_fixed_point(m, pi, big), pi, big);
    for (StateId s = 0; s < m.n_states; ++s) {
      CHECK(vs[s] <= vpi[s] + 1e-9);
      CHECK(vb[s] <= vs[s] + 1e-9);
    }
  }
}

TEST_CASE("backup is a gamma contraction and iteration count is bounded") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const double gamma = 0.3 + 0.6 * static_cast<double>(seed % 4) / 3.0;
    const TabularMDP m = random_with_terminals(5, 3, gamma, seed);
    const auto pi = random_policy(m, seed);
    const TabularPerturbation pert = random_perturbation(m, 4, seed);
    QTable a(5, 3), b(5, 3);
    for (double& x : a.values) x = g(rng);
    for (double& x : b.values) x = g(rng);
    const double before = sup_norm_diff(a, b);
    const double after = sup_norm_diff(worst_attack_backup(a, m, pi, pert), worst_attack_backup(b, m, pi, pert));
    CHECK(after <= gamma * before + 1e-12);

    FixedPointOptions opt;
    opt.tol = 1e-10;
    const FixedPointResult r = worst_attack_iterate(m, pi, pert, opt);
    double rmax = 0.0;
    for (double x : m.reward) rmax = std::max(rmax, std::abs(x));
    const double bound = std::ceil(std::log(opt.tol / rmax) / std::log(gamma)) + 1.0;
    CHECK(static_cast<double>(r.iterations) <= bound);
    CHECK(r.last_delta <= opt.tol);
  }
}

TEST_CASE("iteration limit raises a numerical error") {
  const TabularMDP m = random_mdp(4, 2, 0.99, 1);
  const auto pi = random_policy(m, 1);
  FixedPointOptions opt;
  opt.max_iter = 3;
  CHECK_THROWS_AS(worst_attack_iterate(m, pi, TabularPerturbation::identity(4), opt), NumericalError);
  opt.tol = 0.0;
  CHECK_THROWS_AS(worst_attack_iterate(m, pi, TabularPerturbation::identity(4), opt), InvalidArgument);
}

TEST_CASE("enumeration cap and fallback") {
  const TabularMDP m = random_mdp(12, 2, 0.9, 4);
  const auto pi = random_policy(m, 4);
  TabularPerturbation full;
  full.budget = 1.0;
  for (StateId s = 0; s < 12; ++s) {
    full.admissible.emplace_back();
    for (StateId o = 0; o < 12; ++o) full.admissible.back().push_back(o);
  }
  CHECK(attacker_count(m, full) == 8916100448256ULL);  // 12^12
  CHECK_THROWS_AS(brute_force_worst_value(m, pi, full), InvalidArgument);
  const WorstValue w = exact_worst_value(m, pi, full);
  const QTable q = worst_attack_fixed_point(m, pi, full);
  CHECK(oracle::rel_error(w.value, worst_attack_state_value(q, pi, full)) <= 1e-8);
}

TEST_CASE("gohome worst case under one-cell perturbations") {
  const GridWorld w = build_gohome(gohome_5x5());
  const QTable qstar = optimal_q(w.mdp);
  const DeterministicPolicy pi = greedy_policy(qstar);
  const WorstValue exact = exact_worst_value(w.mdp, pi, w.perturb);
  const QTable q = worst_attack_fixed_point(w.mdp, pi, w.perturb);
  const ValueTable v = worst_attack_state_value(q, pi, w.perturb);
  CHECK(oracle::rel_error(v, exact.value) <= 1e-8);
  const StateId start = w.state_of(w.spec.start);
  const auto vpi = oracle::iterate_policy_value(w.mdp, pi.action_of);
  CHECK(vpi[start] == doctest::Approx(7.285).epsilon(1e-3));
  CHECK(v[start] == doctest::Approx(-8.516).epsilon(1e-3));
}
