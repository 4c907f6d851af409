#include "wocar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wocar/error.hpp"

namespace wocar {

namespace {

void require_batch(std::size_t n, const char* who) {
  if (n == 0) throw InvalidArgument(std::string(who) + ": empty batch");
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end());
  x.insert(x.end(), b.begin(), b.end());
  return x;
}

}  // namespace

void validate(const LossWeights& w) {
  if (!(w.kappa_wst >= 0.0) || !(w.kappa_reg >= 0.0) || !std::isfinite(w.kappa_wst) ||
      !std::isfinite(w.kappa_reg)) {
    throw InvalidArgument("loss weights must be finite and non-negative");
  }
}

// ---------------------------------------------------------------------------

std::vector<double> worst_targets_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                                           std::span<const DiscreteAdvSet> next_sets) {
  if (next_sets.size() != batch.size()) throw InvalidArgument("worst targets: one admissible set per transition");
  std::vector<double> y(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto& tr = batch[t];
    y[t] = tr.reward;
    if (tr.done) continue;
    if (next_sets[t].empty()) throw InvalidArgument("worst targets: empty admissible set");
    const auto q_next = critic(tr.next_obs);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t a : next_sets[t]) m = std::min(m, q_next.at(a));
    y[t] += gamma * m;
  }
  return y;
}

LossResult td_regression_discrete(const Network& critic, std::span<const Transition> batch,
                                  std::span<const double> targets) {
  require_batch(batch.size(), "td regression");
  LossResult out;
  out.grad.assign(critic.spec.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(critic.spec.output_dim(), 0.0);
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto trace = trace_forward(critic.spec, critic.params, batch[t].obs);
    const std::size_t a = batch[t].action;
    if (a >= critic.spec.output_dim()) throw InvalidArgument("td regression: action index out of range");
    const double err = targets[t] - trace.output()[a];
    out.loss += err * err * inv_n;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    upstream[a] = -2.0 * err * inv_n;
    backward(critic.spec, critic.params, trace, upstream, out.grad, {});
  }
  return out;
}

LossResult est_loss_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                             std::span<const DiscreteAdvSet> next_sets) {
  require_batch(batch.size(), "est_loss");
  const auto y = worst_targets_discrete(critic, batch, gamma, next_sets);
  return td_regression_discrete(critic, batch, y);
}

LossResult est_loss_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                             const Network& policy, double eps) {
  require_batch(batch.size(), "est_loss");
  std::vector<DiscreteAdvSet> sets(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    if (!batch[t].done) sets[t] = adv_set_discrete(policy.spec, policy.params, batch[t].next_obs, eps);
  }
  return est_loss_discrete(critic, batch, gamma, sets);
}

std::vector<double> worst_targets_continuous(const Network& critic, std::span<const Transition> batch,
                                             double gamma, std::span<const ContinuousAdvBox> next_boxes,
                                             int min_steps) {
  if (next_boxes.size() != batch.size()) throw InvalidArgument("worst targets: one action box per transition");
  std::vector<double> y(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    y[t] = batch[t].reward;
    if (batch[t].done) continue;
    y[t] += gamma * min_q_over_box(critic.spec, critic.params, batch[t].next_obs, next_boxes[t], min_steps).value;
  }
  return y;
}

LossResult td_regression_continuous(const Network& critic, std::span<const Transition> batch,
                                    std::span<const double> targets) {
  require_batch(batch.size(), "td regression");
  LossResult out;
  out.grad.assign(critic.spec.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto x = concat(batch[t].obs, batch[t].action_vec);
    const auto trace = trace_forward(critic.spec, critic.params, x);
    const double err = targets[t] - trace.output()[0];
    out.loss += err * err * inv_n;
    const double up = -2.0 * err * inv_n;
    backward(critic.spec, critic.params, trace, std::span<const double>(&up, 1), out.grad, {});
  }
  return out;
}

LossResult est_loss_continuous(const Network& critic, std::span<const Transition> batch, double gamma,
                               std::span<const ContinuousAdvBox> next_boxes, int min_steps) {
  require_batch(batch.size(), "est_loss");
  const auto y = worst_targets_continuous(critic, batch, gamma, next_boxes, min_steps);
  return td_regression_continuous(critic, batch, y);
}

// ---------------------------------------------------------------------------

LossResult wst_policy_loss_discrete(const Network& policy, const Network& critic,
                                    std::span<const std::vector<double>> states) {
  require_batch(states.size(), "wst_policy_loss");
  if (policy.spec.output_dim() != critic.spec.output_dim()) {
    throw InvalidArgument("wst_policy_loss: policy and critic disagree on the action count");
  }
  LossResult out;
  out.grad.assign(policy.spec.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(states.size());
  const std::size_t n_actions = policy.spec.output_dim();
  std::vector<double> upstream(n_actions);
  for (const auto& s : states) {
    const auto trace = trace_forward(policy.spec, policy.params, s);
    const auto p = softmax(trace.output());
    const auto q = critic(s);
    double expected = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) expected += p[a] * q[a];
    out.loss -= expected * inv_n;
    // d/dz sum_a p_a q_a = p * (q - E_p[q])
    for (std::size_t a = 0; a < n_actions; ++a) upstream[a] = -inv_n * p[a] * (q[a] - expected);
    backward(policy.spec, policy.params, trace, upstream, out.grad, {});
  }
  return out;
}

LossResult wst_policy_loss_continuous(const Network& policy, const Network& critic,
                                      std::span<const std::vector<double>> states) {
  require_batch(states.size(), "wst_policy_loss");
  const std::size_t da = policy.spec.output_dim();
  LossResult out;
  out.grad.assign(policy.spec.param_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(states.size());
  const double one = 1.0;
  for (const auto& s : states) {
    const auto ptrace = trace_forward(policy.spec, policy.params, s);
    const auto x = concat(s, ptrace.output());
    const auto qtrace = trace_forward(critic.spec, critic.params, x);
    out.loss -= qtrace.output()[0] * inv_n;
    std::vector<double> gx(x.size(), 0.0);
    backward(critic.spec, critic.params, qtrace, std::span<const double>(&one, 1), {}, gx);
    std::vector<double> upstream(gx.end() - static_cast<std::ptrdiff_t>(da), gx.end());
    for (double& u : upstream) u *= -inv_n;
    backward(policy.spec, policy.params, ptrace, upstream, out.grad, {});
  }
  return out;
}

// ---------------------------------------------------------------------------

double state_importance(std::span<const double> q_per_action) {
  if (q_per_action.empty()) throw InvalidArgument("state_importance: no action values");
  const auto [lo, hi] = std::minmax_element(q_per_action.begin(), q_per_action.end());
  return *hi - *lo;
}

double state_importance_ppo(double v_s, const Network& critic, std::span<const double> s,
                            const DiscreteAdvSet& actions) {
  if (actions.empty()) throw InvalidArgument("state_importance_ppo: empty action set");
  const auto q = critic(s);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t a : actions) m = std::min(m, q.at(a));
  return v_s - m;
}

double state_importance_ppo(double v_s, const Network& critic, std::span<const double> s,
                            const ContinuousAdvBox& box, int min_steps) {
  return v_s - min_q_over_box(critic.spec, critic.params, s, box, min_steps).value;
}

std::vector<double> normalize_weights(std::span<const double> w) {
  std::vector<double> out(w.begin(), w.end());
  double m = 0.0;
  for (double& x : out) {
    x = std::max(x, 0.0);
    m = std::max(m, x);
  }
  for (double& x : out) x = m > 0.0 ? x / m : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

double policy_distance(PolicyDistance dist, std::span<const double> out_a, std::span<const double> out_b) {
  if (dist == PolicyDistance::sq_l2) {
    double d = 0.0;
    for (std::size_t i = 0; i < out_a.size(); ++i) d += (out_a[i] - out_b[i]) * (out_a[i] - out_b[i]);
    return d;
  }
  const auto p = softmax(out_a);
  const auto q = softmax(out_b);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

namespace {

/// Gradients of Dist(f(s), f(x)) with respect to the two network outputs.
void distance_grads(PolicyDistance dist, std::span<const double> out_s, std::span<const double> out_x,
                    std::vector<double>& g_s, std::vector<double>& g_x) {
  const std::size_t k = out_s.size();
  g_s.assign(k, 0.0);
  g_x.assign(k, 0.0);
  if (dist == PolicyDistance::sq_l2) {
    for (std::size_t i = 0; i < k; ++i) {
      g_s[i] = 2.0 * (out_s[i] - out_x[i]);
      g_x[i] = -g_s[i];
    }
    return;
  }
  const auto p = softmax(out_s);
  const auto q = softmax(out_x);
  std::vector<double> ell(k, 0.0);
  double kl = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ell[i] = p[i] > 0.0 ? std::log(p[i]) - std::log(q[i]) : 0.0;
    kl += p[i] * ell[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    g_s[i] = p[i] * (ell[i] - kl);
    g_x[i] = q[i] - p[i];
  }
}

/// Adds w * d/dtheta Dist(f(s), f(x)) into grad.
void accumulate_distance_grad(const Network& policy, PolicyDistance dist, std::span<const double> s,
                              std::span<const double> x, double w, GradVector& grad) {
  const auto ts = trace_forward(policy.spec, policy.params, s);
  const auto tx = trace_forward(policy.spec, policy.params, x);
  std::vector<double> g_s;
  std::vector<double> g_x;
  distance_grads(dist, ts.output(), tx.output(), g_s, g_x);
  backward(policy.spec, policy.params, ts, g_s, grad, {}, w);
  backward(policy.spec, policy.params, tx, g_x, grad, {}, w);
}

}  // namespace

RegResult reg_loss(const Network& policy, PolicyDistance dist, std::span<const std::vector<double>> states,
                   std::span<const double> weights, const RegOptions& options, std::mt19937_64& rng,
                   const std::vector<std::vector<double>>* warm_start) {
  require_batch(states.size(), "reg_loss");
  if (weights.size() != states.size()) throw InvalidArgument("reg_loss: one weight per state");
  if (!(options.eps >= 0.0)) throw InvalidArgument("reg_loss: eps must be non-negative");
  if (warm_start && warm_start->size() != states.size()) throw InvalidArgument("reg_loss: warm start size mismatch");

  const double eps = options.eps;
  const double step = options.step_size > 0.0 ? options.step_size : eps / 4.0;
  const double inv_n = 1.0 / static_cast<double>(states.size());
  RegResult out;
  out.grad.assign(policy.spec.param_count(), 0.0);
  out.maximizers.resize(states.size());
  out.per_state.assign(states.size(), 0.0);

  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> g_s;
  std::vector<double> g_x;

  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto& s = states[t];
    auto& best_x = out.maximizers[t];
    best_x = s;
    if (eps == 0.0) continue;

    const auto out_s = policy(s);
    std::vector<double> x(s.size());
    if (warm_start) {
      const auto& w0 = (*warm_start)[t];
      for (std::size_t i = 0; i < s.size(); ++i) x[i] = std::clamp(w0[i], s[i] - eps, s[i] + eps);
    } else {
      for (std::size_t i = 0; i < s.size(); ++i) x[i] = s[i] + eps * uni(rng);
    }
    double best = policy_distance(dist, out_s, policy(x));
    best_x = x;
    std::vector<double> gin(s.size());
    for (int k = 0; k < options.inner_steps; ++k) {
      const auto tx = trace_forward(policy.spec, policy.params, x);
      distance_grads(dist, out_s, tx.output(), g_s, g_x);
      std::fill(gin.begin(), gin.end(), 0.0);
      backward(policy.spec, policy.params, tx, g_x, {}, gin);
      for (std::size_t i = 0; i < s.size(); ++i) {
        double move = step * (gin[i] > 0.0 ? 1.0 : (gin[i] < 0.0 ? -1.0 : 0.0));
        if (options.noise) move += options.noise_scale * step * gauss(rng);
        x[i] = std::clamp(x[i] + move, s[i] - eps, s[i] + eps);
      }
      const double d = policy_distance(dist, out_s, policy(x));
      if (d > best) {
        best = d;
        best_x = x;
      }
    }
    out.per_state[t] = best;
    out.loss += weights[t] * best * inv_n;
    if (weights[t] != 0.0) accumulate_distance_grad(policy, dist, s, best_x, weights[t] * inv_n, out.grad);
  }
  return out;
}

RegResult reg_loss_enumerated(const Network& policy, PolicyDistance dist,
                              std::span<const std::vector<double>> states,
                              std::span<const std::vector<std::vector<double>>> candidates,
                              std::span<const double> weights) {
  require_batch(states.size(), "reg_loss");
  if (weights.size() != states.size() || candidates.size() != states.size()) {
    throw InvalidArgument("reg_loss: one weight and one candidate list per state");
  }
  const double inv_n = 1.0 / static_cast<double>(states.size());
  RegResult out;
  out.grad.assign(policy.spec.param_count(), 0.0);
  out.maximizers.resize(states.size());
  out.per_state.assign(states.size(), 0.0);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto out_s = policy(states[t]);
    double best = 0.0;
    out.maximizers[t] = states[t];
    for (const auto& x : candidates[t]) {
      const double d = policy_distance(dist, out_s, policy(x));
      if (d > best) {
        best = d;
        out.maximizers[t] = x;
      }
    }
    out.per_state[t] = best;
    out.loss += weights[t] * best * inv_n;
    if (weights[t] != 0.0 && best > 0.0) {
      accumulate_distance_grad(policy, dist, states[t], out.maximizers[t], weights[t] * inv_n, out.grad);
    }
  }
  return out;
}

double combined_policy_loss(double l_rl, double l_wst, double l_reg, const LossWeights& weights) {
  return l_rl + weights.kappa_wst * l_wst + weights.kappa_reg * l_reg;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sd = std::exp(log_std[i]);
    const double z = (action[i] - mean[i]) / sd;
    lp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

double categorical_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace wocar
