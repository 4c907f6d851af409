#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wocar/agent.hpp"
#include "wocar/attacks.hpp"
#include "wocar/env.hpp"
#include "wocar/error.hpp"
#include "wocar/eval.hpp"
#include "wocar/worst_attack.hpp"

using namespace wocar;

namespace {

Network random_net(const NetSpec& spec, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ParamVector p(spec.param_count());
  for (double& x : p) x = g(rng);
  return Network(spec, p);
}

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Agent table_agent(const TabularMDP& m) {
  Agent a;
  a.algo = Algo::dqn;
  a.discrete = true;
  a.actor = oracle::table_net(optimal_q(m));
  return a;
}

}  // namespace

TEST_CASE("zero budget leaves observations untouched") {
  std::mt19937_64 rng(1);
  const Network d = random_net(mlp_spec(3, {6}, 4), rng);
  const Network c = random_net(mlp_spec(3, {6}, 2, Activation::tanh, OutputHead::gaussian_mean), rng);
  const std::vector<double> s{0.3, -0.7, 0.1};
  CHECK(attack_random(s, 0.0, rng) == s);
  for (const Victim& v : {Victim{&d, true}, Victim{&c, false}}) {
    CHECK(attack_pgd(v, s, 0.0, 10, rng) == s);
    CHECK(attack_maxdiff(v, s, 0.0, 10, rng) == s);
  }
  CHECK(attack_minbest(Victim{&d, true}, s, 0.0) == s);
  CHECK_THROWS_AS(attack_minbest(Victim{&c, false}, s, 0.1), InvalidArgument);
}

TEST_CASE("every attack respects the budget") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const Network d = random_net(mlp_spec(4, {8}, 3), rng);
    const Network c = random_net(mlp_spec(4, {8}, 2, Activation::tanh, OutputHead::gaussian_mean), rng);
    const auto s = rand_vec(4, rng);
    const double eps = 0.01 + 0.5 * (k % 7) / 7.0;
    CHECK(within_linf(attack_random(s, eps, rng), s, eps));
    CHECK(within_linf(attack_minbest(Victim{&d, true}, s, eps), s, eps));
    for (const Victim& v : {Victim{&d, true}, Victim{&c, false}}) {
      CHECK(within_linf(attack_pgd(v, s, eps, 10, rng), s, eps));
      CHECK(within_linf(attack_maxdiff(v, s, eps, 10, rng), s, eps));
    }
  }
}

TEST_CASE("random attack coordinates are uniform") {
  std::mt19937_64 rng(3);
  const std::vector<double> s{0.5, -1.0};
  const double eps = 0.2;
  const int n = 10000;
  for (std::size_t dim = 0; dim < 2; ++dim) {
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) u[i] = (attack_random(s, eps, rng)[dim] - (s[dim] - eps)) / (2 * eps);
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i)
      ks = std::max({ks, std::abs((i + 1.0) / n - u[i]), std::abs(u[i] - static_cast<double>(i) / n)});
    // Kolmogorov-Smirnov critical value at the 0.001 level
    CHECK(ks < 1.95 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("linear two-action victim: gradient attacks land on the sign corner") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Network lin = random_net(mlp_spec(3, {}, 2), rng);
    const auto s = rand_vec(3, rng);
    const double eps = 0.1;
    const std::size_t g = argmax(lin(s));
    std::vector<double> corner(3);
    for (std::size_t i = 0; i < 3; ++i) {
      const double w = lin.params[(1 - g) * 3 + i] - lin.params[g * 3 + i];
      corner[i] = s[i] + eps * (w > 0 ? 1.0 : -1.0);
    }
    const Victim v{&lin, true};
    CHECK(oracle::rel_error(attack_minbest(v, s, eps), corner) <= 1e-12);
    CHECK(oracle::rel_error(attack_pgd(v, s, eps, 10, rng), corner) <= 1e-12);
  }
}

TEST_CASE("attack objectives improve on the clean input") {
  std::mt19937_64 rng(5);
  int lowered = 0;
  for (int k = 0; k < 100; ++k) {
    const Network d = random_net(mlp_spec(3, {8}, 3), rng);
    const Network c = random_net(mlp_spec(3, {8}, 2, Activation::tanh, OutputHead::gaussian_mean), rng);
    const auto s = rand_vec(3, rng);
    for (const Victim& v : {Victim{&d, true}, Victim{&c, false}}) {
      const auto x = attack_pgd(v, s, 0.2, 10, rng);
      CHECK(pgd_objective(v, s, x) >= pgd_objective(v, s, s));
    }
    const auto clean = softmax(d(s));
    const std::size_t g = argmax(clean);
    if (softmax(d(attack_minbest(Victim{&d, true}, s, 0.2)))[g] <= clean[g]) ++lowered;
  }
  CHECK(lowered >= 95);
}

TEST_CASE("maxdiff") {
  std::mt19937_64 rng(6);
  const Network flat(mlp_spec(2, {4}, 3), ParamVector(mlp_spec(2, {4}, 3).param_count(), 0.0));
  const std::vector<double> s{0.1, 0.2};
  CHECK(maxdiff_objective(Victim{&flat, true}, s, attack_maxdiff(Victim{&flat, true}, s, 0.3, 10, rng)) == 0.0);

  // the best objective never drops as steps are added
  const int steps[4] = {1, 5, 10, 20};
  for (int k = 0; k < 100; ++k) {
    const Network d = random_net(mlp_spec(2, {8}, 3), rng);
    const auto x0 = rand_vec(2, rng);
    const Victim v{&d, true};
    double prev = 0.0;
    for (int j = 0; j < 4; ++j) {
      std::mt19937_64 start(k);
      const double obj = maxdiff_objective(v, x0, attack_maxdiff(v, x0, 0.3, steps[j], start));
      CHECK(obj >= prev);
      prev = obj;
    }
  }
}

TEST_CASE("tabular brute-force attacker") {
  const Chain2 c = chain2();
  CHECK(attack_tabular_bruteforce(c.mdp, c.policy, c.perturb).perturb_to[0] == 1);
  const TabularMDP m = random_mdp(5, 2, 0.9, 3);
  DeterministicPolicy pi{{0, 1, 1, 0, 1}};
  CHECK(attack_tabular_bruteforce(m, pi, TabularPerturbation::identity(5)).perturb_to ==
        AttackerMap::identity(5).perturb_to);
}

TEST_CASE("evaluation under the exact attacker matches the worst-case value") {
  auto env = make_env("gohome-slip");
  const TabularEnv& tab = *env->as_tabular();
  const Agent agent = table_agent(tab.mdp());
  const DeterministicPolicy pi = extract_tabular_policy(agent, tab);
  const QTable q = worst_attack_fixed_point(tab.mdp(), pi, tab.perturbation());
  const double worst = expected_start_value(tab.mdp(), worst_attack_state_value(q, pi, tab.perturbation()));

  const AttackSpec brute{AttackKind::tabular_bruteforce, 1.0, 10, 7};
  const EvalReport r = evaluate(agent, *env, brute, 2000, 11);
  CHECK(r.episodes == 2000);
  CHECK(r.returns.size() == 2000);
  const double se = r.discounted_stddev / std::sqrt(2000.0);
  CHECK(std::abs(r.discounted_mean - worst) <= 3.0 * se + 1e-9);

  // no other attack does better than the exact attacker
  for (AttackKind k : {AttackKind::none, AttackKind::random, AttackKind::pgd, AttackKind::maxdiff, AttackKind::minbest}) {
    const EvalReport o = evaluate(agent, *env, AttackSpec{k, 1.0, 10, 7}, 2000, 11);
    const double se2 = o.discounted_stddev / std::sqrt(2000.0);
    CHECK(r.discounted_mean <= o.discounted_mean + 3.0 * (se + se2));
  }
}

TEST_CASE("evaluation determinism and degenerate attacks") {
  auto env = make_env("gohome-slip");
  const Agent agent = table_agent(env->as_tabular()->mdp());
  const EvalReport a = evaluate(agent, *env, AttackSpec{}, 50, 3);
  const EvalReport b = evaluate(agent, *env, AttackSpec{}, 50, 3);
  CHECK(a.returns == b.returns);
  const EvalReport z = evaluate(agent, *env, AttackSpec{AttackKind::pgd, 0.0, 10, 1}, 50, 3);
  CHECK(z.returns == a.returns);
  const EvalReport t = evaluate(agent, *env, AttackSpec{AttackKind::random, 1.0, 10, 1}, 50, 3, 3);
  const EvalReport t1 = evaluate(agent, *env, AttackSpec{AttackKind::random, 1.0, 10, 1}, 50, 3, 1);
  CHECK(t.returns == t1.returns);
  CHECK(t.mean == t1.mean);

  auto pm = make_env("point-mass");
  Agent cont;
  cont.algo = Algo::ppo;
  cont.discrete = false;
  cont.actor = Network(mlp_spec(pm->obs_dim(), {8}, pm->act_dim(), Activation::tanh, OutputHead::gaussian_mean), 1);
  cont.log_std.assign(pm->act_dim(), -0.5);
  cont.act_low = pm->act_low();
  cont.act_high = pm->act_high();
  const EvalReport p1 = evaluate(cont, *pm, AttackSpec{AttackKind::pgd, 0.1, 10, 2}, 8, 4, 1);
  const EvalReport p2 = evaluate(cont, *pm, AttackSpec{AttackKind::pgd, 0.1, 10, 2}, 8, 4, 4);
  CHECK(p1.returns == p2.returns);
  CHECK_THROWS_AS(evaluate(cont, *pm, AttackSpec{AttackKind::tabular_bruteforce, 0.1, 10, 0}, 2, 1), InvalidArgument);
  CHECK_THROWS_AS(evaluate(cont, *pm, AttackSpec{AttackKind::minbest, 0.1, 10, 0}, 2, 1), InvalidArgument);
  CHECK_THROWS_AS(parse_attack("fgsm"), ConfigError);
  CHECK(parse_attack(attack_name(AttackKind::tabular_bruteforce)) == AttackKind::tabular_bruteforce);
}

TEST_CASE("summary statistics are order independent") {
  std::vector<double> v{3.0, 1.0, 2.0, 10.0};
  double m1, s1, m2, s2;
  summarize(v, m1, s1);
  std::reverse(v.begin(), v.end());
  summarize(v, m2, s2);
  CHECK(m1 == m2);
  CHECK(s1 == s2);
  CHECK(m1 == doctest::Approx(4.0));
  CHECK(s1 == doctest::Approx(std::sqrt((1.0 + 9.0 + 4.0 + 36.0) / 4.0)));
}
