#include "wocar/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "wocar/error.hpp"
#include "wocar/losses.hpp"

namespace wocar {

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::none:
      return "none";
    case AttackKind::random:
      return "random";
    case AttackKind::maxdiff:
      return "maxdiff";
    case AttackKind::minbest:
      return "minbest";
    case AttackKind::pgd:
      return "pgd";
    case AttackKind::tabular_bruteforce:
      return "tabular-bruteforce";
  }
  return "none";
}

AttackKind parse_attack(const std::string& name) {
  for (AttackKind k : {AttackKind::none, AttackKind::random, AttackKind::maxdiff, AttackKind::minbest, AttackKind::pgd,
                       AttackKind::tabular_bruteforce}) {
    if (attack_name(k) == name) return k;
  }
  throw ConfigError("unknown attack '" + name + "' (expected none, random, maxdiff, minbest, pgd, tabular-bruteforce)");
}

void validate(const AttackSpec& spec) {
  if (!(spec.eps >= 0.0) || !std::isfinite(spec.eps)) throw InvalidArgument("attack: eps must be finite and non-negative");
  if ((spec.kind == AttackKind::pgd || spec.kind == AttackKind::maxdiff) && spec.steps < 1) {
    throw InvalidArgument("attack: steps must be at least 1");
  }
}

namespace {

void require_victim(const Victim& v) {
  if (v.net == nullptr) throw InvalidArgument("attack: no victim network");
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

using Upstream = std::function<std::vector<double>(const std::vector<double>& perturbed_out)>;
using Objective = std::function<double(std::span<const double> perturbed_in)>;

std::vector<double> ascend(const Victim& victim, std::span<const double> s, std::vector<double> x, double eps,
                           int steps, double step, const Objective& objective, const Upstream& upstream) {
  const Network& net = *victim.net;
  std::vector<double> best = x;
  double best_val = objective(x);
  std::vector<double> g(x.size());
  for (int k = 0; k < steps; ++k) {
    const auto trace = trace_forward(net.spec, net.params, x);
    const auto up = upstream(trace.output());
    std::fill(g.begin(), g.end(), 0.0);
    backward(net.spec, net.params, trace, up, {}, g);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * sign(g[i]);
    project_linf(x, s, eps);
    const double v = objective(x);
    if (v > best_val) {
      best_val = v;
      best = x;
    }
  }
  return best;
}

}  // namespace

void project_linf(std::span<double> x, std::span<const double> s, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], s[i] - eps, s[i] + eps);
}

bool within_linf(std::span<const double> x, std::span<const double> s, double eps) {
  if (x.size() != s.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= s[i] - eps && x[i] <= s[i] + eps)) return false;
  }
  return true;
}

double pgd_objective(const Victim& victim, std::span<const double> clean, std::span<const double> perturbed) {
  require_victim(victim);
  const auto out_c = (*victim.net)(clean);
  const auto out_p = (*victim.net)(perturbed);
  if (!victim.discrete) return sq_dist(out_c, out_p);
  const auto p = softmax(out_p);
  return -std::log(std::max(p[argmax(out_c)], 1e-300));
}

double maxdiff_objective(const Victim& victim, std::span<const double> clean, std::span<const double> perturbed) {
  require_victim(victim);
  return policy_distance(victim.discrete ? PolicyDistance::kl : PolicyDistance::sq_l2, (*victim.net)(clean),
                         (*victim.net)(perturbed));
}

std::vector<double> attack_random(std::span<const double> s, double eps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(s.begin(), s.end());
  if (eps == 0.0) return x;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s[i] + eps * u(rng);
  project_linf(x, s, eps);
  return x;
}

std::vector<double> attack_pgd(const Victim& victim, std::span<const double> s, double eps, int steps,
                               std::mt19937_64& rng) {
  require_victim(victim);
  if (steps < 1) throw InvalidArgument("attack_pgd: steps must be at least 1");
  if (eps == 0.0) return {s.begin(), s.end()};
  const auto clean = (*victim.net)(s);
  std::vector<double> start = victim.discrete ? std::vector<double>(s.begin(), s.end()) : attack_random(s, eps, rng);
  const std::size_t target = victim.discrete ? argmax(clean) : 0;
  return ascend(
      victim, s, std::move(start), eps, steps, 2.0 * eps / static_cast<double>(steps), [&](std::span<const double> x) { return pgd_objective(victim, s, x); },
      [&](const std::vector<double>& out) {
        std::vector<double> up(out.size());
        if (victim.discrete) {
          const auto p = softmax(out);
          for (std::size_t i = 0; i < out.size(); ++i) up[i] = p[i] - (i == target ? 1.0 : 0.0);
        } else {
          for (std::size_t i = 0; i < out.size(); ++i) up[i] = 2.0 * (out[i] - clean[i]);
        }
        return up;
      });
}

std::vector<double> attack_maxdiff(const Victim& victim, std::span<const double> s, double eps, int steps,
                                   std::mt19937_64& rng) {
  require_victim(victim);
  if (steps < 1) throw InvalidArgument("attack_maxdiff: steps must be at least 1");
  if (eps == 0.0) return {s.begin(), s.end()};
  const auto clean = (*victim.net)(s);
  const auto p_clean = softmax(clean);
  return ascend(
      victim, s, attack_random(s, eps, rng), eps, steps, eps / 4.0,
      [&](std::span<const double> x) { return maxdiff_objective(victim, s, x); },
      [&](const std::vector<double>& out) {
        std::vector<double> up(out.size());
        if (victim.discrete) {
          const auto q = softmax(out);
          for (std::size_t i = 0; i < out.size(); ++i) up[i] = q[i] - p_clean[i];
        } else {
          for (std::size_t i = 0; i < out.size(); ++i) up[i] = 2.0 * (out[i] - clean[i]);
        }
        return up;
      });
}

std::vector<double> attack_minbest(const Victim& victim, std::span<const double> s, double eps) {
  require_victim(victim);
  if (!victim.discrete) throw InvalidArgument("attack_minbest: needs a discrete-action victim");
  std::vector<double> x(s.begin(), s.end());
  if (eps == 0.0) return x;
  const Network& net = *victim.net;
  const auto trace = trace_forward(net.spec, net.params, s);
  const auto p = softmax(trace.output());
  const std::size_t best = argmax(trace.output());
  std::vector<double> up(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) up[i] = (i == best ? 1.0 : 0.0) - p[i];
  std::vector<double> g(s.size(), 0.0);
  backward(net.spec, net.params, trace, up, {}, g);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s[i] - eps * sign(g[i]);
  project_linf(x, s, eps);
  return x;
}

AttackerMap attack_tabular_bruteforce(const TabularMDP& mdp, const DeterministicPolicy& policy,
                                      const TabularPerturbation& perturb, std::uint64_t cap) {
  return exact_worst_value(mdp, policy, perturb, cap).attacker;
}

StateId tabular_attack(AttackKind kind, const Victim& victim, const TabularEnv& env, StateId s, double eps,
                       std::mt19937_64& rng) {
  const auto& set = env.perturbation().admissible.at(s);
  std::vector<StateId> members;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (env.perturbation().cost(s, i) <= eps) members.push_back(set[i]);
  }
  if (kind == AttackKind::none || members.size() == 1) return s;
  if (kind == AttackKind::random) {
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    return members[pick(rng)];
  }
  if (kind == AttackKind::tabular_bruteforce) {
    throw InvalidArgument("tabular_attack: the brute-force attacker needs the whole policy, use attack_tabular_bruteforce");
  }
  require_victim(victim);
  const auto clean = env.observation(s);
  const auto out_c = (*victim.net)(clean);
  const std::size_t greedy = argmax(out_c);
  StateId best = s;
  double best_val = -std::numeric_limits<double>::infinity();
  for (StateId o : members) {
    const auto x = env.observation(o);
    double v = 0.0;
    if (kind == AttackKind::pgd) {
      v = pgd_objective(victim, clean, x);
    } else if (kind == AttackKind::maxdiff) {
      v = maxdiff_objective(victim, clean, x);
    } else {
      v = -softmax((*victim.net)(x))[greedy];
    }
    if (v > best_val) {
      best_val = v;
      best = o;
    }
  }
  return best;
}

}  // namespace wocar
