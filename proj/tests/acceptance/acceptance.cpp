// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "wocar/bounds.hpp"
#include "wocar/config.hpp"
#include "wocar/dqn.hpp"
#include "wocar/env.hpp"
#include "wocar/eval.hpp"
#include "wocar/experiment.hpp"
#include "wocar/losses.hpp"
#include "wocar/mdp.hpp"
#include "wocar/ppo.hpp"
#include "wocar/worst_attack.hpp"

using namespace wocar;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

DeterministicPolicy random_policy(const TabularMDP& m, std::mt19937_64& rng) {
  std::uniform_int_distribution<ActionId> pick(0, m.n_actions - 1);
  DeterministicPolicy pi;
  for (StateId s = 0; s < m.n_states; ++s) pi.action_of.push_back(pick(rng));
  return pi;
}

TabularMDP random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> ns(1, 6), na(1, 4);
  std::uniform_real_distribution<double> g(0.0, 0.99);
  const std::size_t n = ns(rng);
  TabularMDP m = random_mdp(n, na(rng), g(rng), rng());
  if (n > 2 && rng() % 2) {
    m.terminal[rng() % n] = 1;
    m.normalize_terminals();
  }
  return m;
}

Network random_net(const NetSpec& spec, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ParamVector p(spec.param_count());
  for (double& x : p) x = g(rng);
  return Network(spec, p);
}

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<double> sample_ball(std::span<const double> c, double eps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-eps, eps);
  std::vector<double> x(c.begin(), c.end());
  // a quarter of the draws sit on corners, where interval bounds are tight
  const bool corner = rng() % 4 == 0;
  for (double& v : x) v += corner ? (rng() % 2 ? eps : -eps) : u(rng);
  return x;
}

// --- 1 ---------------------------------------------------------------------

Verdict contraction() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 10.0);
  double worst_slack = -1e300;
  for (int k = 0; k < 200; ++k) {
    const TabularMDP m = random_instance(rng);
    const auto pi = random_policy(m, rng);
    const TabularPerturbation pert = random_perturbation(m, 1 + rng() % m.n_states, rng());
    QTable a(m.n_states, m.n_actions), b(m.n_states, m.n_actions);
    for (double& x : a.values) x = g(rng);
    for (double& x : b.values) x = g(rng);
    const double lhs = sup_norm_diff(worst_attack_backup(a, m, pi, pert), worst_attack_backup(b, m, pi, pert));
    worst_slack = std::max(worst_slack, lhs - m.gamma * sup_norm_diff(a, b));
  }
  const double t = seconds_since(t0);
  return {worst_slack <= 1e-9 && t < 10.0,
          "200 instances, max(lhs - gamma*rhs) = " + fmt("%.3g", worst_slack) + ", " + fmt("%.2f s", t)};
}

// --- 2 ---------------------------------------------------------------------

Verdict oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  double worst_err = 0.0;
  int done = 0;
  while (done < 50) {
    const TabularMDP m = random_instance(rng);
    const TabularPerturbation pert = random_perturbation(m, 1 + rng() % 4, rng());
    double product = 1.0;
    for (const auto& set : pert.admissible) product *= static_cast<double>(set.size());
    if (product > 10000.0) continue;
    const auto pi = random_policy(m, rng);
    const QTable q = worst_attack_fixed_point(m, pi, pert);
    const ValueTable v = worst_attack_state_value(q, pi, pert);
    worst_err = std::max(worst_err, oracle::rel_error(v, oracle::enumerate_worst_value(m, pi, pert)));
    ++done;
  }
  const Chain2 c = chain2();
  const QTable q = worst_attack_fixed_point(c.mdp, c.policy, c.perturb);
  const ValueTable v = worst_attack_state_value(q, c.policy, c.perturb);
  const std::vector<double> expect_q{0, 1, 2, 1}, expect_v{0, 2};
  const double chain_err = std::max(oracle::rel_error(q.values, expect_q), oracle::rel_error(v, expect_v));
  const double t = seconds_since(t0);
  return {worst_err <= 1e-6 && chain_err <= 1e-6 && t < 60.0,
          "50 instances, max error " + fmt("%.3g", worst_err) + ", two-state chain error " + fmt("%.3g", chain_err) +
              ", " + fmt("%.2f s", t)};
}

// --- 3 ---------------------------------------------------------------------

Verdict reductions() {
  std::mt19937_64 rng(303);
  double id_err = 0.0;
  bool exact_reward = true;
  for (int k = 0; k < 100; ++k) {
    const TabularMDP m = random_instance(rng);
    const auto pi = random_policy(m, rng);
    const QTable q = worst_attack_fixed_point(m, pi, TabularPerturbation::identity(m.n_states));
    id_err = std::max(id_err, oracle::rel_error(q.values, policy_evaluation(m, pi).values));

    TabularMDP z = m;
    z.gamma = 0.0;
    const QTable q0 = worst_attack_fixed_point(z, pi, random_perturbation(z, 3, rng()));
    exact_reward = exact_reward && q0.values == z.reward;
  }
  return {id_err <= 1e-8 && exact_reward,
          "identity error " + fmt("%.3g", id_err) + ", gamma=0 " + (exact_reward ? "exact" : "NOT exact")};
}

// --- 4 ---------------------------------------------------------------------

Verdict budget_monotonicity() {
  std::mt19937_64 rng(404);
  double worst = -1e300;
  for (int k = 0; k < 50; ++k) {
    const TabularMDP m = random_instance(rng);
    const auto pi = random_policy(m, rng);
    const TabularPerturbation small = random_perturbation(m, 2, rng());
    TabularPerturbation big = small;
    for (StateId s = 0; s < m.n_states; ++s) {
      for (StateId o = 0; o < m.n_states; ++o)
        if (!big.contains(s, o) && rng() % 2) big.admissible[s].push_back(o);
      std::sort(big.admissible[s].begin(), big.admissible[s].end());
    }
    const ValueTable vs = worst_attack_state_value(worst_attack_fixed_point(m, pi, small), pi, small);
    const ValueTable vb = worst_attack_state_value(worst_attack_fixed_point(m, pi, big), pi, big);
    for (StateId s = 0; s < m.n_states; ++s) worst = std::max(worst, vb[s] - vs[s]);
  }
  return {worst <= 1e-9, "50 nested pairs, max increase " + fmt("%.3g", worst)};
}

// --- 5 ---------------------------------------------------------------------

Verdict ibp_soundness() {
  std::mt19937_64 rng(505);
  std::size_t violations = 0, collapse_fail = 0, widen_fail = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t in = 1 + rng() % 4;
    std::vector<std::size_t> hidden;
    const std::size_t depth = rng() % 3;
    for (std::size_t l = 0; l < depth; ++l) hidden.push_back(2 + rng() % 12);
    const Network net =
        random_net(mlp_spec(in, hidden, 1 + rng() % 4, k % 2 ? Activation::tanh : Activation::relu), rng);
    const auto c = rand_vec(in, rng);
    const double eps = 0.01 + 0.3 * static_cast<double>(k % 10) / 10.0;
    const IntervalBounds b = ibp_bounds(net.spec, net.params, c, eps);
    for (int i = 0; i < 10000; ++i)
      if (!b.contains(net(sample_ball(c, eps, rng)))) ++violations;
    const IntervalBounds z = ibp_bounds(net.spec, net.params, c, 0.0);
    const auto y = net(c);
    if (oracle::rel_error(z.lower, y) > 1e-12 || oracle::rel_error(z.upper, y) > 1e-12) ++collapse_fail;
    const IntervalBounds w = ibp_bounds(net.spec, net.params, c, 2.0 * eps);
    for (std::size_t i = 0; i < b.size(); ++i)
      if (w.lower[i] > b.lower[i] || w.upper[i] < b.upper[i]) ++widen_fail;
  }
  return {violations == 0 && collapse_fail == 0 && widen_fail == 0,
          "100 nets x 10^4 samples: " + std::to_string(violations) + " violations, " + std::to_string(collapse_fail) +
              " collapse failures, " + std::to_string(widen_fail) + " widening failures"};
}

// --- 6 ---------------------------------------------------------------------

Verdict adv_superset() {
  std::mt19937_64 rng(606);
  std::size_t misses = 0, escapes = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t in = 2 + rng() % 3;
    const Network d = random_net(mlp_spec(in, {8}, 2 + rng() % 4), rng);
    const auto s = rand_vec(in, rng);
    const double eps = 0.02 + 0.02 * (k % 10);
    const DiscreteAdvSet set = adv_set_discrete(d.spec, d.params, s, eps);
    const std::set<std::size_t> allowed(set.begin(), set.end());
    for (int i = 0; i < 1000; ++i)
      if (!allowed.count(argmax(d(sample_ball(s, eps, rng))))) ++misses;

    const Network c = random_net(mlp_spec(in, {8}, 2, Activation::tanh, OutputHead::gaussian_mean), rng);
    const ContinuousAdvBox box = adv_box_continuous(c.spec, c.params, s, eps);
    for (int i = 0; i < 1000; ++i)
      if (!box.contains(c(sample_ball(s, eps, rng)))) ++escapes;
  }
  return {misses == 0 && escapes == 0, "100 discrete + 100 continuous victims x 1000 samples: " +
                                           std::to_string(misses) + " argmax misses, " + std::to_string(escapes) +
                                           " mean escapes"};
}

// --- 7 ---------------------------------------------------------------------

Verdict gradients() {
  std::mt19937_64 rng(707);
  double worst = 0.0;
  int skipped = 0;
  auto track = [&](std::span<const double> g, std::span<const double> fd) {
    worst = std::max(worst, oracle::rel_error(g, fd));
  };
  for (int k = 0; k < 100; ++k) {
    const std::size_t obs = 2 + rng() % 2, na = 2 + rng() % 2;
    const Activation act = Activation::tanh;

    // network gradients, both activations; relu draws near a kink are redrawn
    for (Activation a : {Activation::relu, Activation::tanh}) {
      for (int attempt = 0;; ++attempt) {
        const Network net = random_net(mlp_spec(obs, {5, 4}, na, a), rng, 0.8);
        const auto x = rand_vec(obs, rng);
        const auto u = rand_vec(na, rng);
        bool kink = false;
        const ForwardTrace tr = trace_forward(net.spec, net.params, x);
        if (a == Activation::relu)
          for (std::size_t l = 0; l + 1 < tr.pre.size(); ++l)
            for (double z : tr.pre[l]) kink = kink || std::abs(z) < 1e-3;
        if (kink && attempt < 20) {
          ++skipped;
          continue;
        }
        auto dot_out = [&](const Network& n, const std::vector<double>& in) {
          const auto y = n(in);
          return std::inner_product(y.begin(), y.end(), u.begin(), 0.0);
        };
        track(grad_params(net.spec, net.params, x, u),
              oracle::fd_gradient([&](const std::vector<double>& p) { return dot_out(Network(net.spec, p), x); },
                                  net.params));
        track(grad_input(net.spec, net.params, x, u),
              oracle::fd_gradient([&](const std::vector<double>& z) { return dot_out(net, z); }, x));
        break;
      }
    }

    std::vector<Transition> batch(4);
    for (auto& t : batch) {
      t.obs = rand_vec(obs, rng);
      t.next_obs = rand_vec(obs, rng);
      t.action = rng() % na;
      t.action_vec = rand_vec(2, rng);
      t.reward = rand_vec(1, rng)[0];
      t.done = rng() % 3 == 0;
    }

    // estimation loss, discrete and continuous (targets are constants)
    const Network critic = random_net(mlp_spec(obs, {6}, na, act), rng, 0.8);
    std::vector<DiscreteAdvSet> sets(batch.size(), DiscreteAdvSet{0, na - 1});
    const LossResult est = est_loss_discrete(critic, batch, 0.9, sets);
    const auto y = worst_targets_discrete(critic, batch, 0.9, sets);
    track(est.grad, oracle::fd_gradient(
                        [&](const std::vector<double>& p) {
                          return td_regression_discrete(Network(critic.spec, p), batch, y).loss;
                        },
                        critic.params));
    const Network qc = random_net(mlp_spec(obs + 2, {6}, 1, act), rng, 0.8);
    std::vector<ContinuousAdvBox> boxes(batch.size(), ContinuousAdvBox{{-0.3, -0.1}, {0.2, 0.5}});
    const LossResult estc = est_loss_continuous(qc, batch, 0.9, boxes);
    const auto yc = worst_targets_continuous(qc, batch, 0.9, boxes);
    track(estc.grad, oracle::fd_gradient(
                         [&](const std::vector<double>& p) {
                           return td_regression_continuous(Network(qc.spec, p), batch, yc).loss;
                         },
                         qc.params));

    // worst-attack policy loss
    std::vector<std::vector<double>> states;
    for (const auto& t : batch) states.push_back(t.obs);
    const Network pol = random_net(mlp_spec(obs, {5}, na, act), rng, 0.8);
    const LossResult wst = wst_policy_loss_discrete(pol, critic, states);
    track(wst.grad, oracle::fd_gradient(
                        [&](const std::vector<double>& p) {
                          return wst_policy_loss_discrete(Network(pol.spec, p), critic, states).loss;
                        },
                        pol.params));
    const Network mu = random_net(mlp_spec(obs, {5}, 2, act, OutputHead::gaussian_mean), rng, 0.8);
    const LossResult wstc = wst_policy_loss_continuous(mu, qc, states);
    track(wstc.grad, oracle::fd_gradient(
                         [&](const std::vector<double>& p) {
                           return wst_policy_loss_continuous(Network(mu.spec, p), qc, states).loss;
                         },
                         mu.params));

    // weighted regularizer, maximizers held fixed
    const std::vector<double> w = normalize_weights(rand_vec(batch.size(), rng, 0.0, 2.0));
    RegOptions opt;
    opt.eps = 0.1;
    const PolicyDistance dist = k % 2 ? PolicyDistance::kl : PolicyDistance::sq_l2;
    const RegResult reg = reg_loss(pol, dist, states, w, opt, rng);
    std::vector<std::vector<std::vector<double>>> cands;
    for (const auto& m : reg.maximizers) cands.push_back({m});
    auto reg_at = [&](const std::vector<double>& p) {
      return reg_loss_enumerated(Network(pol.spec, p), dist, states, cands, w).loss;
    };
    track(reg.grad, oracle::fd_gradient(reg_at, pol.params));

    // combined objective: a regression stand-in for the RL term plus both terms
    const LossWeights lw{0.3 + 0.1 * (k % 5), 0.1 * (k % 4)};
    const auto ty = rand_vec(batch.size(), rng);
    const LossResult rl = td_regression_discrete(pol, batch, ty);
    std::vector<double> combined(pol.params.size());
    for (std::size_t i = 0; i < combined.size(); ++i)
      combined[i] = rl.grad[i] + lw.kappa_wst * wst.grad[i] + lw.kappa_reg * reg.grad[i];
    track(combined, oracle::fd_gradient(
                        [&](const std::vector<double>& p) {
                          const Network n(pol.spec, p);
                          return combined_policy_loss(td_regression_discrete(n, batch, ty).loss,
                                                      wst_policy_loss_discrete(n, critic, states).loss, reg_at(p), lw);
                        },
                        pol.params));
  }
  return {worst < 1e-4, "100 configurations, max relative error " + fmt("%.3g", worst) + " (" +
                            std::to_string(skipped) + " relu draws near a kink redrawn)"};
}

// --- 8 ---------------------------------------------------------------------

Verdict kappa_reductions() {
  bool ppo_identical = true;
  double dqn_err = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const char* name : {"chain2", "gohome", "point-mass"}) {
      auto env = make_env(name);
      PPOConfig cfg;
      cfg.total_steps = 2048;
      cfg.rollout_steps = 512;
      cfg.hidden = {16};
      cfg.log_every = 1024;
      cfg.kappa_wst = {KappaShape::constant, 0.0};
      cfg.kappa_reg = 0.0;
      PPOConfig van = cfg;
      van.wocar = false;
      const PPOResult w = ppo_train(*env, cfg, seed);
      const PPOResult v = ppo_train(*env, van, seed);
      ppo_identical = ppo_identical && w.state.policy.params == v.state.policy.params &&
                      w.state.log_std == v.state.log_std && w.state.value.params == v.state.value.params &&
                      w.loss_trace.at("policy") == v.loss_trace.at("policy") &&
                      w.loss_trace.at("value") == v.loss_trace.at("value");
    }
    for (const char* name : {"chain2", "gohome"}) {
      auto env = make_env(name);
      DQNConfig cfg;
      cfg.total_steps = 3000;
      cfg.learning_starts = 200;
      cfg.hidden = {32};
      cfg.log_every = 1000;
      cfg.kappa_wst = {KappaShape::constant, 1.0};
      cfg.kappa_reg = 0.0;
      DQNConfig van = cfg;
      van.wocar = false;
      const DQNResult w = dqn_train(*env, cfg, seed);
      const DQNResult v = dqn_train(*env, van, seed);
      dqn_err = std::max(dqn_err, oracle::rel_error(w.last_robust_targets, v.last_vanilla_targets));
      const auto& a = w.loss_trace.at("q_r");
      const auto& b = v.loss_trace.at("q_v");
      dqn_err = a.size() == b.size() ? std::max(dqn_err, oracle::rel_error(a, b)) : 1e300;
    }
  }
  return {ppo_identical && dqn_err <= 1e-9, std::string("PPO ") + (ppo_identical ? "bit-identical" : "DIFFERS") +
                                                " on 3 envs x 3 seeds, DQN robust-vs-vanilla max error " +
                                                fmt("%.3g", dqn_err)};
}

// --- 9, 11 -------------------------------------------------------------------

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct GoHomeRuns {
  std::vector<RunOutcome> wocar, vanilla;
  std::vector<double> seconds;
};

GoHomeRuns gohome_runs(const std::string& source, const fs::path& out) {
  GoHomeRuns r;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const char* algo : {"wocar-dqn", "dqn"}) {
      RunConfig c = load_run_config(source + "/configs/gohome_dqn.cfg");
      set_key(c, "algo", algo);
      set_key(c, "seed", std::to_string(seed));
      set_key(c, "out", (out / "gohome" / algo / ("seed_" + std::to_string(seed))).string());
      const auto t0 = std::chrono::steady_clock::now();
      RunOutcome o = run_experiment(c);
      const double t = seconds_since(t0);
      if (std::string(algo) == "dqn") {
        r.vanilla.push_back(std::move(o));
        r.seconds.back() += t;
      } else {
        r.wocar.push_back(std::move(o));
        r.seconds.push_back(t);
      }
    }
  }
  return r;
}

Verdict gohome_robustness(const GoHomeRuns& r) {
  int wins = 0;
  std::string per;
  double slowest = 0.0;
  for (std::size_t i = 0; i < r.wocar.size(); ++i) {
    const RunSummary& w = r.wocar[i].summary;
    const RunSummary& v = r.vanilla[i].summary;
    const bool robust = *w.exact_worst > *v.exact_worst;
    const bool natural = std::abs(*w.exact_natural - *v.exact_natural) <= 0.2 * std::abs(*v.exact_natural);
    wins += robust && natural;
    char buf[160];
    std::snprintf(buf, sizeof buf, " [seed %zu: worst %.3f vs %.3f, natural %.3f vs %.3f]", i + 1, *w.exact_worst,
                  *v.exact_worst, *w.exact_natural, *v.exact_natural);
    per += buf;
    slowest = std::max(slowest, r.seconds[i]);
  }
  return {wins >= 4 && slowest < 300.0,
          std::to_string(wins) + "/5 seeds robust with natural within 20%, slowest seed " + fmt("%.0f s", slowest) + per};
}

Verdict critic_tracking(const GoHomeRuns& r) {
  double lowest = 1.0;
  std::string per;
  for (std::size_t i = 0; i < r.wocar.size(); ++i) {
    std::vector<double> est, truth;
    for (const auto& m : r.wocar[i].metrics) {
      // records before the first update carry no critic statistics
      if (!m.values.count("critic_mean_q")) continue;
      est.push_back(m.values.at("critic_worst_start"));
      truth.push_back(m.values.at("worst_train_eps_return"));
    }
    const double rho = est.size() >= 3 ? spearman(est, truth) : -1.0;
    lowest = std::min(lowest, rho);
    per += " " + fmt("%.3f", rho);
  }
  return {lowest >= 0.7, "Spearman per seed:" + per};
}

// --- 10 ----------------------------------------------------------------------

Verdict tradeoff(const std::string& source, const fs::path& out) {
  const RunConfig base = load_run_config(source + "/configs/gohome_ppo.cfg");
  const std::vector<std::string> values{"0", "0.4", "0.8"};
  const auto rows = run_sweep(base, "sched.kappa_wst_target", values, {1, 2, 3, 4, 5},
                              (out / "kappa_sweep").string(), thread_budget(15));
  bool ok = true;
  std::string per;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      ok = ok && rows[i].median_worst >= rows[i - 1].median_worst &&
           rows[i].median_natural <= rows[i - 1].median_natural;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, " [kappa %s: natural %.3f, worst %.3f]", rows[i].value.c_str(),
                  rows[i].median_natural, rows[i].median_worst);
    per += buf;
  }
  return {ok, "medians over 5 seeds:" + per};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance_runs";
  std::string source = WOCAR_SOURCE_DIR;
  std::vector<int> only;
  app.add_option("--out", out, "Directory for training runs");
  app.add_option("--source", source, "Source tree holding configs/");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Verdict()>& run) {
    if (!wanted(n)) return;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s criterion %2d (%s): %s\n", v.pass ? "PASS" : "FAIL", n, name, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "contraction", contraction);
  report(2, "oracle equivalence", oracle_equivalence);
  report(3, "reductions", reductions);
  report(4, "budget monotonicity", budget_monotonicity);
  report(5, "IBP soundness", ibp_soundness);
  report(6, "admissible superset", adv_superset);
  report(7, "gradients", gradients);
  report(8, "degenerate kappa", kappa_reductions);

  if (wanted(9) || wanted(11)) {
    GoHomeRuns runs;
    std::string error;
    try {
      runs = gohome_runs(source, out);
    } catch (const std::exception& e) {
      error = e.what();
    }
    auto guarded = [&](const std::function<Verdict()>& f) {
      return [&, f]() { return error.empty() ? f() : Verdict{false, "error: " + error}; };
    };
    report(9, "go-home robustness", guarded([&] { return gohome_robustness(runs); }));
    report(11, "critic tracking", guarded([&] { return critic_tracking(runs); }));
  }
  report(10, "kappa trade-off", [&] { return tradeoff(source, out); });
  return failures == 0 ? 0 : 1;
}
