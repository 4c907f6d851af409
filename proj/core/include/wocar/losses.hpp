#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "wocar/bounds.hpp"
#include "wocar/net.hpp"

namespace wocar {

/// One environment step as seen by the learner (observations, not states).
struct Transition {
  std::vector<double> obs;
  std::size_t action = 0;           // discrete action index
  std::vector<double> action_vec;   // continuous action
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

struct LossWeights {
  double kappa_wst = 0.0;
  double kappa_reg = 0.0;
};

void validate(const LossWeights& w);

struct LossResult {
  double loss = 0.0;
  GradVector grad;
};

// --- worst-attack estimation loss -----------------------------------------

/// Bootstrapped targets r + gamma * min_{a in next_sets[t]} Q(s', a), zero
/// continuation on done. Targets are constants for the gradient.
std::vector<double> worst_targets_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                                           std::span<const DiscreteAdvSet> next_sets);

/// Mean squared TD error of a discrete critic (s -> |A| values) against
/// `worst_targets_discrete`, with its parameter gradient.
LossResult est_loss_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                             std::span<const DiscreteAdvSet> next_sets);

/// Same, deriving each admissible set from `policy` by IBP at radius eps.
LossResult est_loss_discrete(const Network& critic, std::span<const Transition> batch, double gamma,
                             const Network& policy, double eps);

/// Targets for a state-action critic ([s, a] -> 1): the next-state minimum
/// is searched over each box with min_q_over_box.
std::vector<double> worst_targets_continuous(const Network& critic, std::span<const Transition> batch,
                                             double gamma, std::span<const ContinuousAdvBox> next_boxes,
                                             int min_steps = 50);

LossResult est_loss_continuous(const Network& critic, std::span<const Transition> batch, double gamma,
                               std::span<const ContinuousAdvBox> next_boxes, int min_steps = 50);

/// Regression of a critic onto fixed targets: (1/N) sum (y_t - Q(s_t, a_t))^2.
LossResult td_regression_discrete(const Network& critic, std::span<const Transition> batch,
                                  std::span<const double> targets);
LossResult td_regression_continuous(const Network& critic, std::span<const Transition> batch,
                                    std::span<const double> targets);

// --- worst-attack policy loss ---------------------------------------------

/// -(1/N) sum_t sum_a pi(a|s_t) Q(s_t, a) for a softmax policy; gradient with
/// respect to the policy parameters only.
LossResult wst_policy_loss_discrete(const Network& policy, const Network& critic,
                                    std::span<const std::vector<double>> states);

/// -(1/N) sum_t Q(s_t, mu(s_t)), differentiated through the action argument.
LossResult wst_policy_loss_continuous(const Network& policy, const Network& critic,
                                      std::span<const std::vector<double>> states);

// --- state importance -----------------------------------------------------

/// max_a Q(s, a) - min_a Q(s, a).
double state_importance(std::span<const double> q_per_action);

/// v_s - min_{a in actions} Q(s, a) for a discrete critic.
double state_importance_ppo(double v_s, const Network& critic, std::span<const double> s,
                            const DiscreteAdvSet& actions);

/// v_s - min over the box of Q(s, .) for a state-action critic.
double state_importance_ppo(double v_s, const Network& critic, std::span<const double> s,
                            const ContinuousAdvBox& box, int min_steps = 50);

/// Divides by the batch maximum; negative entries clamp to zero and an
/// all-zero batch stays zero.
std::vector<double> normalize_weights(std::span<const double> w);

// --- weighted smoothness regularizer --------------------------------------

enum class PolicyDistance { kl, sq_l2 };

/// Distance between the policy outputs at two inputs, from network outputs:
/// KL(softmax(a) || softmax(b)) or ||a - b||^2.
double policy_distance(PolicyDistance dist, std::span<const double> out_a, std::span<const double> out_b);

struct RegOptions {
  double eps = 0.0;
  int inner_steps = 10;
  double step_size = 0.0;  // <= 0 selects eps / 4
  bool noise = false;
  double noise_scale = 0.5;  // std of Langevin noise relative to the step size
};

struct RegResult {
  double loss = 0.0;
  GradVector grad;
  std::vector<std::vector<double>> maximizers;
  std::vector<double> per_state;  // unweighted inner maxima
};

/// (1/N) sum_t w_t max_{|x - s_t|_inf <= eps} Dist(pi(s_t), pi(x)). The inner
/// maximum is projected signed-gradient ascent from a random point of the
/// ball (or `warm_start`), keeping the best iterate. The gradient treats the
/// maximizers as constants.
RegResult reg_loss(const Network& policy, PolicyDistance dist, std::span<const std::vector<double>> states,
                   std::span<const double> weights, const RegOptions& options, std::mt19937_64& rng,
                   const std::vector<std::vector<double>>* warm_start = nullptr);

/// Variant whose inner maximum runs over an explicit candidate list per state.
RegResult reg_loss_enumerated(const Network& policy, PolicyDistance dist,
                              std::span<const std::vector<double>> states,
                              std::span<const std::vector<std::vector<double>>> candidates,
                              std::span<const double> weights);

/// L_rl + kappa_wst * L_wst + kappa_reg * L_reg.
double combined_policy_loss(double l_rl, double l_wst, double l_reg, const LossWeights& weights);

// --- distributions ----------------------------------------------------------

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

double categorical_entropy(std::span<const double> probs);

}  // namespace wocar
