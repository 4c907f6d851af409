#include "wocar/dqn.hpp"

#include <cmath>
#include <limits>

#include "wocar/bounds.hpp"
#include "wocar/error.hpp"
#include "wocar/replay.hpp"
#include "wocar/rng.hpp"

namespace wocar {

namespace {

enum Stream : std::uint64_t { kEnv = 1, kExplore = 2, kReplay = 3, kReg = 4, kInit = 5 };

void check_finite(double v, const char* what, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("non-finite ") + what + " at step " + std::to_string(step));
  }
}

void soft_update(Network& target, const Network& source, double tau) {
  for (std::size_t i = 0; i < target.params.size(); ++i) {
    target.params[i] = tau * source.params[i] + (1.0 - tau) * target.params[i];
  }
}

void apply(Network& net, GradVector& grad, AdamState& adam, const AdamConfig& cfg, double clip) {
  if (clip > 0.0) clip_global_norm(grad, clip);
  adam_step(net.params, grad, adam, cfg);
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

}  // namespace

AdvSetMode resolve(AdvSetMode mode, const Environment& env) {
  if (mode == AdvSetMode::automatic) return env.as_tabular() ? AdvSetMode::tabular : AdvSetMode::ibp;
  if (mode == AdvSetMode::tabular && !env.as_tabular()) {
    throw InvalidArgument("tabular adversarial sets need a tabular environment, got '" + env.name() + "'");
  }
  return mode;
}

void validate(const DQNConfig& c) {
  if (c.total_steps < 1) throw InvalidArgument("dqn: total_steps must be at least 1");
  if (c.batch_size < 1 || c.buffer_size < 1) throw InvalidArgument("dqn: batch and buffer sizes must be positive");
  if (c.train_every < 1 || c.log_every < 1) throw InvalidArgument("dqn: train_every and log_every must be positive");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw InvalidArgument("dqn: tau must lie in (0, 1]");
  if (!(c.kappa_reg >= 0.0)) throw InvalidArgument("dqn: kappa_reg must be non-negative");
  if (c.eps.target >= 0.0) validate(c.eps);
  validate(c.kappa_wst);
  if (c.kappa_wst.target > 1.0) throw InvalidArgument("dqn: kappa_wst target must not exceed 1");
}

std::vector<double> vanilla_dqn_targets(const Network& q_target, std::span<const Transition> batch, double gamma) {
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i].reward;
    if (batch[i].done) continue;
    const auto q = q_target(batch[i].next_obs);
    y[i] += gamma * q[argmax(q)];
  }
  return y;
}

std::vector<double> robust_dqn_targets(const Network& q_target, const Network& critic,
                                       std::span<const Transition> batch, double gamma, double kappa_wst) {
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i].reward;
    if (batch[i].done) continue;
    const auto qv = q_target(batch[i].next_obs);
    const auto qc = critic(batch[i].next_obs);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < qv.size(); ++a) best = std::max(best, kappa_wst * qv[a] + (1.0 - kappa_wst) * qc[a]);
    y[i] += gamma * best;
  }
  return y;
}

double critic_start_estimate(const Network& critic, const Network& actor, const TabularEnv& env, double eps) {
  const auto& mdp = env.mdp();
  double total = 0.0;
  for (StateId s = 0; s < mdp.n_states; ++s) {
    if (mdp.initial_dist[s] == 0.0) continue;
    const auto set = adv_set_enumerated(actor.spec, actor.params, env.candidates(s, eps));
    const auto q = critic(env.observation(s));
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t a : set) m = std::min(m, q[a]);
    total += mdp.initial_dist[s] * m;
  }
  return total;
}

DQNResult dqn_train(Environment& env, const DQNConfig& cfg, std::uint64_t seed, const EvalHook& eval,
                    const CheckpointHook& checkpoint) {
  validate(cfg);
  if (!env.discrete()) throw InvalidArgument("dqn: environment '" + env.name() + "' has continuous actions");
  const TabularEnv* tab = env.as_tabular();
  const AdvSetMode adv_mode = resolve(cfg.adv_sets, env);

  auto env_rng = make_stream(seed, kEnv);
  auto explore_rng = make_stream(seed, kExplore);
  auto replay_rng = make_stream(seed, kReplay);
  auto reg_rng = make_stream(seed, kReg);
  auto init_rng = make_stream(seed, kInit);

  const double gamma = env.gamma();
  const std::size_t n_actions = env.n_actions();
  const NetSpec spec = mlp_spec(env.obs_dim(), cfg.hidden, n_actions, cfg.activation, OutputHead::linear);
  const std::uint64_t q_seed = init_rng();
  const std::uint64_t critic_seed = init_rng();
  EpsSchedule eps_sched = cfg.eps;
  if (eps_sched.target < 0.0) eps_sched.target = env.budget();

  DQNResult result;
  DQNState& st = result.state;
  st.q_v = Network(spec, q_seed);
  st.q_target = st.q_v;
  st.adam_v = AdamState(spec.param_count());
  if (cfg.wocar) {
    st.q_r = st.q_v;
    st.critic = Network(spec, critic_seed);
    st.adam_r = AdamState(spec.param_count());
    st.adam_critic = AdamState(spec.param_count());
  }

  auto make_agent = [&]() {
    Agent a;
    a.algo = cfg.wocar ? Algo::wocar_dqn : Algo::dqn;
    a.discrete = true;
    a.actor = cfg.wocar ? st.q_r : st.q_v;
    if (cfg.wocar) a.critic = st.critic;
    return a;
  };

  auto sets_for = [&](const Transition& tr, double eps_t) -> DiscreteAdvSet {
    const Network& pi = st.q_r;
    if (adv_mode == AdvSetMode::tabular) {
      return adv_set_enumerated(pi.spec, pi.params, tab->candidates(tab->state_of(tr.next_obs), eps_t));
    }
    return adv_set_discrete(pi.spec, pi.params, tr.next_obs, eps_t);
  };

  ReplayBuffer buffer(cfg.buffer_size);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> random_action(0, n_actions - 1);

  Running l_v, l_r, l_c, l_reg, ep_returns, critic_q;
  auto& trace_v = result.loss_trace["q_v"];
  auto& trace_r = result.loss_trace["q_r"];
  auto& trace_c = result.loss_trace["critic"];
  auto& trace_reg = result.loss_trace["reg"];

  std::vector<double> obs = env.reset(env_rng);
  double ep_return = 0.0;
  int ep_len = 0;

  for (std::uint64_t t = 0; t < cfg.total_steps; ++t) {
    st.step = t;
    const Network& acting = cfg.wocar ? st.q_r : st.q_v;
    const double beta = cfg.explore(t, cfg.total_steps);
    const double u = coin(explore_rng);
    const std::size_t r_action = random_action(explore_rng);
    const std::size_t action = u < beta ? r_action : argmax(acting(obs));

    EnvStep next = env.step(action, env_rng);
    ep_return += next.reward;
    ++ep_len;
    buffer.push(Transition{obs, action, {}, next.reward, next.obs, next.done});
    if (next.done || ep_len >= env.max_steps()) {
      ep_returns.add(ep_return);
      ep_return = 0.0;
      ep_len = 0;
      obs = env.reset(env_rng);
    } else {
      obs = std::move(next.obs);
    }

    if (t >= cfg.learning_starts && t % cfg.train_every == 0) {
      const auto batch = buffer.sample(cfg.batch_size, replay_rng);
      const auto y_v = vanilla_dqn_targets(st.q_target, batch, gamma);
      LossResult lv = td_regression_discrete(st.q_v, batch, y_v);
      check_finite(lv.loss, "vanilla Q loss", t);
      l_v.add(lv.loss);
      trace_v.push_back(lv.loss);

      if (cfg.wocar) {
        const double eps_t = eps_sched(t, cfg.total_steps);
        const double kappa_t = cfg.kappa_wst(t, cfg.total_steps);

        std::vector<DiscreteAdvSet> sets(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          if (!batch[i].done) sets[i] = sets_for(batch[i], eps_t);
        }
        for (const Transition& tr : batch) critic_q.add(st.critic(tr.obs)[tr.action]);
        LossResult lc = est_loss_discrete(st.critic, batch, gamma, sets);
        check_finite(lc.loss, "worst-attack critic loss", t);
        l_c.add(lc.loss);
        trace_c.push_back(lc.loss);
        apply(st.critic, lc.grad, st.adam_critic, cfg.critic_adam, cfg.grad_clip);

        const auto y_r = robust_dqn_targets(st.q_target, st.critic, batch, gamma, kappa_t);
        LossResult lr = td_regression_discrete(st.q_r, batch, y_r);
        check_finite(lr.loss, "robust Q loss", t);
        l_r.add(lr.loss);
        trace_r.push_back(lr.loss);
        result.last_vanilla_targets = y_v;
        result.last_robust_targets = y_r;

        double reg_value = 0.0;
        if (cfg.kappa_reg > 0.0 && eps_t > 0.0) {
          std::vector<std::vector<double>> states(batch.size());
          std::vector<double> w(batch.size());
          for (std::size_t i = 0; i < batch.size(); ++i) {
            states[i] = batch[i].obs;
            w[i] = state_importance(st.q_v(batch[i].obs));
          }
          w = normalize_weights(w);
          RegResult reg;
          if (adv_mode == AdvSetMode::tabular) {
            std::vector<std::vector<std::vector<double>>> cands(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) cands[i] = tab->candidates(tab->state_of(states[i]), eps_t);
            reg = reg_loss_enumerated(st.q_r, PolicyDistance::kl, states, cands, w);
          } else {
            RegOptions ro = cfg.reg;
            ro.eps = eps_t;
            reg = reg_loss(st.q_r, PolicyDistance::kl, states, w, ro, reg_rng);
          }
          check_finite(reg.loss, "regularizer", t);
          reg_value = reg.loss;
          for (std::size_t k = 0; k < lr.grad.size(); ++k) lr.grad[k] += cfg.kappa_reg * reg.grad[k];
        }
        l_reg.add(reg_value);
        trace_reg.push_back(reg_value);
        apply(st.q_r, lr.grad, st.adam_r, cfg.adam, cfg.grad_clip);
      } else {
        result.last_vanilla_targets = y_v;
      }

      apply(st.q_v, lv.grad, st.adam_v, cfg.adam, cfg.grad_clip);
      soft_update(st.q_target, st.q_v, cfg.tau);
      ++st.updates;
    }

    const std::uint64_t done_steps = t + 1;
    const bool last = done_steps == cfg.total_steps;
    if (done_steps % cfg.log_every == 0 || last) {
      MetricsRecord rec;
      rec.step = done_steps;
      rec.values["explore"] = beta;
      if (ep_returns.any()) rec.values["train_return"] = ep_returns.mean();
      if (l_v.any()) rec.values["loss_q_v"] = l_v.mean();
      if (cfg.wocar) {
        const double eps_t = eps_sched(t, cfg.total_steps);
        rec.values["eps"] = eps_t;
        rec.values["kappa_wst"] = cfg.kappa_wst(t, cfg.total_steps);
        if (l_r.any()) rec.values["loss_q_r"] = l_r.mean();
        if (l_c.any()) rec.values["loss_critic"] = l_c.mean();
        if (critic_q.any()) rec.values["critic_mean_q"] = critic_q.mean();
        if (l_reg.any()) rec.values["loss_reg"] = l_reg.mean();
        if (tab) rec.values["critic_worst_start"] = critic_start_estimate(st.critic, st.q_r, *tab, eps_t);
      }
      const Agent agent = make_agent();
      if (eval) eval(agent, rec);
      result.metrics.push_back(std::move(rec));
      l_v = l_r = l_c = l_reg = ep_returns = critic_q = Running{};
    }
    if (checkpoint && cfg.checkpoint_every > 0 && (done_steps % cfg.checkpoint_every == 0 || last)) {
      checkpoint(make_agent(), done_steps);
    }
  }
  st.step = cfg.total_steps;
  result.agent = make_agent();
  return result;
}

}  // namespace wocar
