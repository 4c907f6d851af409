#include "wocar/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "wocar/bounds.hpp"
#include "wocar/error.hpp"
#include "wocar/rng.hpp"

namespace wocar {

namespace {

enum Stream : std::uint64_t { kEnv = 1, kAct = 2, kShuffle = 3, kReg = 4, kInit = 5 };

void check_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite ") + what + " at step " + std::to_string(step));
  }
}

struct Running {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  bool any() const { return n > 0; }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

struct Rollout {
  std::vector<Transition> steps;
  std::vector<double> logp;
  std::vector<double> values;
  std::vector<double> next_values;
  std::vector<std::uint8_t> episode_end;
  std::vector<double> advantages;
  std::vector<double> returns;
};

void standardize(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var) + 1e-8;
  for (double& x : v) x = (x - mean) / sd;
}

}  // namespace

void validate(const PPOConfig& c) {
  if (c.total_steps < 1) throw InvalidArgument("ppo: total_steps must be at least 1");
  if (c.rollout_steps < 1 || c.epochs < 1 || c.minibatch < 1) {
    throw InvalidArgument("ppo: rollout_steps, epochs and minibatch must be positive");
  }
  if (!(c.clip > 0.0 && c.clip < 1.0)) throw InvalidArgument("ppo: clip must lie in (0, 1)");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) throw InvalidArgument("ppo: gae_lambda must lie in [0, 1]");
  if (!(c.entropy_coef >= 0.0) || !(c.kappa_reg >= 0.0)) throw InvalidArgument("ppo: coefficients must be non-negative");
  if (c.log_every < 1) throw InvalidArgument("ppo: log_every must be positive");
  if (c.min_q_steps < 1) throw InvalidArgument("ppo: min_q_steps must be at least 1");
  if (c.eps.target >= 0.0) validate(c.eps);
  validate(c.kappa_wst);
}

ClipTerm ppo_clip_term(double ratio, double advantage, double clip) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  const double plain = ratio * advantage;
  const double capped = clipped_ratio * advantage;
  ClipTerm out;
  if (plain <= capped) {
    out.loss = -plain;
    out.dlogp = -plain;  // d(rho A)/d log pi = rho A
  } else {
    out.loss = -capped;
    out.clipped = true;
  }
  return out;
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const double> next_values, std::span<const std::uint8_t> episode_end,
                                   double gamma, double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_values[k] - values[k];
    running = delta + (episode_end[k] ? 0.0 : gamma * lambda * running);
    adv[k] = running;
  }
  return adv;
}

PPOResult ppo_train(Environment& env, const PPOConfig& cfg, std::uint64_t seed, const EvalHook& eval,
                    const CheckpointHook& checkpoint) {
  validate(cfg);
  const bool discrete = env.discrete();
  const AdvSetMode adv_mode = resolve(cfg.adv_sets, env);
  const TabularEnv* tab = env.as_tabular();
  const std::vector<double> act_low = env.act_low();
  const std::vector<double> act_high = env.act_high();
  const std::size_t obs_dim = env.obs_dim();
  const std::size_t out_dim = discrete ? env.n_actions() : env.act_dim();
  const double gamma = env.gamma();

  auto env_rng = make_stream(seed, kEnv);
  auto act_rng = make_stream(seed, kAct);
  auto shuffle_rng = make_stream(seed, kShuffle);
  auto reg_rng = make_stream(seed, kReg);
  auto init_rng = make_stream(seed, kInit);

  EpsSchedule eps_sched = cfg.eps;
  if (eps_sched.target < 0.0) eps_sched.target = env.budget();

  PPOResult result;
  PPOState& st = result.state;
  const NetSpec pspec = mlp_spec(obs_dim, cfg.hidden, out_dim, cfg.activation,
                                 discrete ? OutputHead::softmax_logits : OutputHead::gaussian_mean);
  const NetSpec vspec = mlp_spec(obs_dim, cfg.hidden, 1, cfg.activation, OutputHead::linear);
  const NetSpec cspec = discrete ? mlp_spec(obs_dim, cfg.hidden, out_dim, cfg.activation, OutputHead::linear)
                                 : mlp_spec(obs_dim + out_dim, cfg.hidden, 1, cfg.activation, OutputHead::linear);
  const std::uint64_t p_seed = init_rng();
  const std::uint64_t v_seed = init_rng();
  const std::uint64_t c_seed = init_rng();
  st.policy = Network(pspec, p_seed);
  if (!discrete) st.log_std.assign(out_dim, cfg.init_log_std);
  st.value = Network(vspec, v_seed);
  st.adam_policy = AdamState(pspec.param_count() + st.log_std.size());
  st.adam_value = AdamState(vspec.param_count());
  if (cfg.wocar) {
    st.critic = Network(cspec, c_seed);
    st.adam_critic = AdamState(cspec.param_count());
  }

  auto make_agent = [&]() {
    Agent a;
    a.algo = cfg.wocar ? Algo::wocar_ppo : Algo::ppo;
    a.discrete = discrete;
    a.actor = st.policy;
    a.log_std = st.log_std;
    a.act_low = act_low;
    a.act_high = act_high;
    a.value = st.value;
    if (cfg.wocar) a.critic = st.critic;
    return a;
  };

  auto log_prob = [&](const std::vector<double>& out, const Transition& tr) {
    if (discrete) return std::log(softmax(out)[tr.action]);
    return gaussian_log_prob(out, st.log_std, tr.action_vec);
  };

  // Worst-case critic value of (s, a) for the policy term.
  auto critic_sa = [&](const Transition& tr) {
    if (discrete) return st.critic(tr.obs)[tr.action];
    return q_value(st.critic.spec, st.critic.params, tr.obs, tr.action_vec);
  };

  auto discrete_set = [&](std::span<const double> s, double eps_t) -> DiscreteAdvSet {
    if (adv_mode == AdvSetMode::tabular) {
      return adv_set_enumerated(st.policy.spec, st.policy.params, tab->candidates(tab->state_of(s), eps_t));
    }
    return adv_set_discrete(st.policy.spec, st.policy.params, s, eps_t);
  };

  auto box_at = [&](std::span<const double> s, double eps_t) {
    return adv_box_continuous(st.policy.spec, st.policy.params, s, eps_t, std::span<const double>(act_low),
                              std::span<const double>(act_high));
  };

  Running l_pol, l_val, l_crit, l_reg, ep_returns, entropy_avg, clip_frac;
  auto& trace_pol = result.loss_trace["policy"];
  auto& trace_val = result.loss_trace["value"];
  auto& trace_crit = result.loss_trace["critic"];
  auto& trace_reg = result.loss_trace["reg"];

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> obs = env.reset(env_rng);
  double ep_return = 0.0;
  int ep_len = 0;
  std::uint64_t steps_done = 0;
  std::uint64_t next_log = cfg.log_every;
  std::uint64_t next_ckpt = cfg.checkpoint_every;

  while (steps_done < cfg.total_steps) {
    // --- collect -----------------------------------------------------------
    const std::size_t n = static_cast<std::size_t>(
        std::min<std::uint64_t>(cfg.rollout_steps, cfg.total_steps - steps_done));
    Rollout ro;
    ro.steps.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto out = st.policy(obs);
      Transition tr;
      tr.obs = obs;
      EnvStep next;
      if (discrete) {
        const auto p = softmax(out);
        std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
        tr.action = pick(act_rng);
        next = env.step(tr.action, env_rng);
      } else {
        tr.action_vec.resize(out_dim);
        for (std::size_t i = 0; i < out_dim; ++i) tr.action_vec[i] = out[i] + std::exp(st.log_std[i]) * gauss(act_rng);
        next = env.step(tr.action_vec, env_rng);
      }
      ro.logp.push_back(log_prob(out, tr));
      ro.values.push_back(st.value(obs)[0]);
      tr.reward = next.reward;
      tr.done = next.done;
      tr.next_obs = next.obs;
      ep_return += next.reward;
      ++ep_len;
      const bool truncated = !next.done && ep_len >= env.max_steps();
      ro.next_values.push_back(next.done ? 0.0 : st.value(next.obs)[0]);
      ro.episode_end.push_back(next.done || truncated ? 1 : 0);
      ro.steps.push_back(std::move(tr));
      if (next.done || truncated) {
        ep_returns.add(ep_return);
        ep_return = 0.0;
        ep_len = 0;
        obs = env.reset(env_rng);
      } else {
        obs = std::move(next.obs);
      }
    }
    const std::uint64_t t_iter = steps_done;
    steps_done += n;

    std::vector<double> rewards(n);
    for (std::size_t k = 0; k < n; ++k) rewards[k] = ro.steps[k].reward;
    ro.advantages = gae_advantages(rewards, ro.values, ro.next_values, ro.episode_end, gamma, cfg.gae_lambda);
    ro.returns.resize(n);
    for (std::size_t k = 0; k < n; ++k) ro.returns[k] = ro.advantages[k] + ro.values[k];
    if (cfg.normalize_advantages) standardize(ro.advantages);

    const double eps_t = eps_sched(t_iter, cfg.total_steps);
    const double kappa_t = cfg.kappa_wst(t_iter, cfg.total_steps);
    const bool use_wst = cfg.wocar && kappa_t > 0.0;
    const bool use_reg = cfg.wocar && cfg.kappa_reg > 0.0 && eps_t > 0.0;

    // --- optimize ----------------------------------------------------------
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t start = 0; start < n; start += cfg.minibatch) {
        const std::size_t end = std::min(n, start + cfg.minibatch);
        const std::size_t m = end - start;
        const double inv_m = 1.0 / static_cast<double>(m);
        std::vector<Transition> mb;
        mb.reserve(m);
        for (std::size_t j = start; j < end; ++j) mb.push_back(ro.steps[order[j]]);

        // value regression
        {
          GradVector g(st.value.spec.param_count(), 0.0);
          double loss = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            const std::size_t k = order[start + j];
            const auto trace = trace_forward(st.value.spec, st.value.params, mb[j].obs);
            const double err = trace.output()[0] - ro.returns[k];
            loss += err * err * inv_m;
            const double up = 2.0 * err * inv_m;
            backward(st.value.spec, st.value.params, trace, std::span<const double>(&up, 1), g, {});
          }
          check_finite(loss, "value loss", steps_done);
          l_val.add(loss);
          trace_val.push_back(loss);
          if (cfg.grad_clip > 0.0) clip_global_norm(g, cfg.grad_clip);
          adam_step(st.value.params, g, st.adam_value, cfg.value_adam);
        }

        // worst-attack critic
        if (cfg.wocar) {
          LossResult lc;
          if (discrete) {
            std::vector<DiscreteAdvSet> sets(m);
            for (std::size_t j = 0; j < m; ++j) {
              if (!mb[j].done) sets[j] = discrete_set(mb[j].next_obs, eps_t);
            }
            lc = est_loss_discrete(st.critic, mb, gamma, sets);
          } else {
            std::vector<ContinuousAdvBox> boxes(m);
            for (std::size_t j = 0; j < m; ++j) {
              if (!mb[j].done) boxes[j] = box_at(mb[j].next_obs, eps_t);
            }
            lc = est_loss_continuous(st.critic, mb, gamma, boxes, cfg.min_q_steps);
          }
          check_finite(lc.loss, "worst-attack critic loss", steps_done);
          l_crit.add(lc.loss);
          trace_crit.push_back(lc.loss);
          if (cfg.grad_clip > 0.0) clip_global_norm(lc.grad, cfg.grad_clip);
          adam_step(st.critic.params, lc.grad, st.adam_critic, cfg.critic_adam);
        }

        // policy
        std::vector<double> adv(m);
        for (std::size_t j = 0; j < m; ++j) adv[j] = ro.advantages[order[start + j]];
        if (use_wst) {
          std::vector<double> qc(m);
          for (std::size_t j = 0; j < m; ++j) qc[j] = critic_sa(mb[j]);
          if (cfg.normalize_critic) standardize(qc);
          for (std::size_t j = 0; j < m; ++j) adv[j] += kappa_t * qc[j];
        }

        const std::size_t np = st.policy.spec.param_count();
        GradVector g(np + st.log_std.size(), 0.0);
        std::span<double> g_net(g.data(), np);
        double loss = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t k = order[start + j];
          const auto trace = trace_forward(st.policy.spec, st.policy.params, mb[j].obs);
          const auto& out = trace.output();
          const double logp = log_prob(out, mb[j]);
          const double ratio = std::exp(logp - ro.logp[k]);
          if (!std::isfinite(ratio) || ratio > cfg.ratio_limit) {
            throw NumericalError("ppo: probability ratio diverged (" + std::to_string(ratio) + ") at step " +
                                 std::to_string(steps_done));
          }
          const ClipTerm term = ppo_clip_term(ratio, adv[j], cfg.clip);
          clip_frac.add(term.clipped ? 1.0 : 0.0);
          loss += term.loss * inv_m;
          std::vector<double> up(out.size(), 0.0);
          const double dl = term.dlogp * inv_m;
          if (discrete) {
            const auto p = softmax(out);
            double h = 0.0;
            for (double pi : p) h -= pi > 0.0 ? pi * std::log(pi) : 0.0;
            entropy_avg.add(h);
            loss -= cfg.entropy_coef * h * inv_m;
            for (std::size_t i = 0; i < out.size(); ++i) {
              const double onehot = i == mb[j].action ? 1.0 : 0.0;
              up[i] = dl * (onehot - p[i]);
              const double logpi = p[i] > 0.0 ? std::log(p[i]) : 0.0;
              up[i] += cfg.entropy_coef * inv_m * p[i] * (logpi + h);
            }
          } else {
            double h = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) {
              const double sd = std::exp(st.log_std[i]);
              const double z = (mb[j].action_vec[i] - out[i]) / sd;
              up[i] = dl * z / sd;
              g[np + i] += dl * (z * z - 1.0) - cfg.entropy_coef * inv_m;
              h += st.log_std[i] + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
            }
            entropy_avg.add(h);
            loss -= cfg.entropy_coef * h * inv_m;
          }
          backward(st.policy.spec, st.policy.params, trace, up, g_net, {});
        }

        double reg_value = 0.0;
        if (use_reg) {
          std::vector<std::vector<double>> states(m);
          std::vector<double> w(m);
          for (std::size_t j = 0; j < m; ++j) {
            states[j] = mb[j].obs;
            const double v_s = st.value(mb[j].obs)[0];
            if (discrete) {
              w[j] = state_importance_ppo(v_s, st.critic, mb[j].obs, discrete_set(mb[j].obs, eps_t));
            } else {
              w[j] = state_importance_ppo(v_s, st.critic, mb[j].obs, box_at(mb[j].obs, eps_t), cfg.min_q_steps);
            }
          }
          w = normalize_weights(w);
          const PolicyDistance dist = discrete ? PolicyDistance::kl : PolicyDistance::sq_l2;
          RegResult reg;
          if (adv_mode == AdvSetMode::tabular) {
            std::vector<std::vector<std::vector<double>>> cands(m);
            for (std::size_t j = 0; j < m; ++j) cands[j] = tab->candidates(tab->state_of(states[j]), eps_t);
            reg = reg_loss_enumerated(st.policy, dist, states, cands, w);
          } else {
            RegOptions opts = cfg.reg;
            opts.eps = eps_t;
            reg = reg_loss(st.policy, dist, states, w, opts, reg_rng);
          }
          check_finite(reg.loss, "regularizer", steps_done);
          reg_value = reg.loss;
          loss += cfg.kappa_reg * reg.loss;
          for (std::size_t i = 0; i < np; ++i) g[i] += cfg.kappa_reg * reg.grad[i];
        }
        if (cfg.wocar) {
          l_reg.add(reg_value);
          trace_reg.push_back(reg_value);
        }

        check_finite(loss, "policy loss", steps_done);
        l_pol.add(loss);
        trace_pol.push_back(loss);
        if (cfg.grad_clip > 0.0) clip_global_norm(g, cfg.grad_clip);
        std::vector<double> theta(st.policy.params);
        theta.insert(theta.end(), st.log_std.begin(), st.log_std.end());
        adam_step(theta, g, st.adam_policy, cfg.policy_adam);
        std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(np), st.policy.params.begin());
        std::copy(theta.begin() + static_cast<std::ptrdiff_t>(np), theta.end(), st.log_std.begin());
      }
    }
    ++st.iterations;
    st.step = steps_done;

    const bool last = steps_done >= cfg.total_steps;
    if (steps_done >= next_log || last) {
      while (next_log <= steps_done) next_log += cfg.log_every;
      MetricsRecord rec;
      rec.step = steps_done;
      if (ep_returns.any()) rec.values["train_return"] = ep_returns.mean();
      if (l_pol.any()) rec.values["loss_policy"] = l_pol.mean();
      if (l_val.any()) rec.values["loss_value"] = l_val.mean();
      if (entropy_avg.any()) rec.values["entropy"] = entropy_avg.mean();
      if (clip_frac.any()) rec.values["clip_fraction"] = clip_frac.mean();
      if (cfg.wocar) {
        rec.values["eps"] = eps_t;
        rec.values["kappa_wst"] = kappa_t;
        if (l_crit.any()) rec.values["loss_critic"] = l_crit.mean();
        if (l_reg.any()) rec.values["loss_reg"] = l_reg.mean();
        if (tab) rec.values["critic_worst_start"] = critic_start_estimate(st.critic, st.policy, *tab, eps_t);
      }
      const Agent agent = make_agent();
      if (eval) eval(agent, rec);
      result.metrics.push_back(std::move(rec));
      l_pol = l_val = l_crit = l_reg = ep_returns = entropy_avg = clip_frac = Running{};
    }
    if (checkpoint && cfg.checkpoint_every > 0 && (steps_done >= next_ckpt || last)) {
      while (next_ckpt <= steps_done) next_ckpt += cfg.checkpoint_every;
      checkpoint(make_agent(), steps_done);
    }
  }
  result.agent = make_agent();
  return result;
}

}  // namespace wocar
