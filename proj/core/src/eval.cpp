#include "wocar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "wocar/error.hpp"
#include "wocar/rng.hpp"

namespace wocar {

void summarize(std::span<const double> values, double& mean, double& stddev) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  mean = 0.0;
  stddev = 0.0;
  if (v.empty()) return;
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  stddev = std::sqrt(ss / static_cast<double>(v.size()));
}

unsigned thread_budget(unsigned wanted) {
  unsigned cap = 1;
  if (const char* env = std::getenv("WOCAR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = static_cast<unsigned>(v);
  }
  return std::max(1u, std::min(cap, wanted));
}

namespace {

struct EpisodeResult {
  double ret = 0.0;
  double discounted = 0.0;
};

class Runner {
 public:
  Runner(const Agent& agent, const Environment& env, const AttackSpec& attack)
      : agent_(agent), env_(env), attack_(attack), victim_{&agent.actor, agent.discrete} {
    validate(attack);
    if (agent.discrete != env.discrete()) throw InvalidArgument("evaluate: agent and environment disagree on the action type");
    tab_ = env.as_tabular();
    if (attack.kind == AttackKind::tabular_bruteforce) {
      if (!tab_) throw InvalidArgument("evaluate: tabular-bruteforce needs a tabular environment, got '" + env.name() + "'");
      const auto policy = extract_tabular_policy(agent, *tab_);
      attacker_ = attack_tabular_bruteforce(tab_->mdp(), policy, tab_->perturbation().restricted(attack.eps));
    }
    if (attack.kind == AttackKind::minbest && !agent.discrete) {
      throw InvalidArgument("evaluate: minbest needs discrete actions");
    }
  }

  EpisodeResult run(std::uint64_t seed, std::size_t episode) const {
    auto env = env_.clone();
    auto env_rng = make_stream(seed, 2 * episode);
    auto atk_rng = make_stream(seed, 2 * episode + 1);
    const TabularEnv* tab = env->as_tabular();
    std::vector<double> obs = env->reset(env_rng);
    EpisodeResult r;
    double discount = 1.0;
    for (int t = 0; t < env->max_steps(); ++t) {
      const std::vector<double> seen = perturb(obs, tab, atk_rng);
      EnvStep step = agent_.discrete ? env->step(agent_.greedy_action(seen), env_rng)
                                     : env->step(agent_.mean_action(seen), env_rng);
      r.ret += step.reward;
      r.discounted += discount * step.reward;
      discount *= env->gamma();
      if (step.done) break;
      obs = std::move(step.obs);
    }
    return r;
  }

 private:
  std::vector<double> perturb(const std::vector<double>& obs, const TabularEnv* tab, std::mt19937_64& rng) const {
    if (attack_.kind == AttackKind::none || attack_.eps == 0.0) return obs;
    if (tab) {
      const StateId s = tab->state();
      StateId o = attack_.kind == AttackKind::tabular_bruteforce ? attacker_(s)
                                                                 : tabular_attack(attack_.kind, victim_, *tab, s, attack_.eps, rng);
      const auto& set = tab->perturbation().admissible[s];
      const auto it = std::find(set.begin(), set.end(), o);
      if (it == set.end() || tab->perturbation().cost(s, static_cast<std::size_t>(it - set.begin())) > attack_.eps) {
        throw NumericalError("evaluate: attack left the admissible set");
      }
      return tab->observation(o);
    }
    std::vector<double> x;
    switch (attack_.kind) {
      case AttackKind::random:
        x = attack_random(obs, attack_.eps, rng);
        break;
      case AttackKind::pgd:
        x = attack_pgd(victim_, obs, attack_.eps, attack_.steps, rng);
        break;
      case AttackKind::maxdiff:
        x = attack_maxdiff(victim_, obs, attack_.eps, attack_.steps, rng);
        break;
      case AttackKind::minbest:
        x = attack_minbest(victim_, obs, attack_.eps);
        break;
      default:
        x = obs;
    }
    if (!within_linf(x, obs, attack_.eps)) throw NumericalError("evaluate: attack left the l_inf ball");
    return x;
  }

  const Agent& agent_;
  const Environment& env_;
  AttackSpec attack_;
  Victim victim_;
  const TabularEnv* tab_ = nullptr;
  AttackerMap attacker_;
};

}  // namespace

EvalReport evaluate(const Agent& agent, const Environment& env, const AttackSpec& attack, std::size_t episodes,
                    std::uint64_t seed, unsigned threads) {
  if (episodes == 0) throw InvalidArgument("evaluate: episodes must be positive");
  const Runner runner(agent, env, attack);
  std::vector<EpisodeResult> results(episodes);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(episodes)));
  if (workers == 1) {
    for (std::size_t i = 0; i < episodes; ++i) results[i] = runner.run(seed, i);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < episodes; i += workers) results[i] = runner.run(seed, i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }
  EvalReport report;
  report.attack = attack;
  report.episodes = episodes;
  for (const auto& r : results) {
    report.returns.push_back(r.ret);
    report.discounted_returns.push_back(r.discounted);
  }
  summarize(report.returns, report.mean, report.stddev);
  summarize(report.discounted_returns, report.discounted_mean, report.discounted_stddev);
  return report;
}

}  // namespace wocar
