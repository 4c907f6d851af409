#pragma once

// Reference implementations used as test oracles. They share no code with
// the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "wocar/mdp.hpp"
#include "wocar/net.hpp"
#include "wocar/worst_attack.hpp"

namespace oracle {

using wocar::ActionId;
using wocar::StateId;

/// V of the stationary policy s -> action_of[s] by plain value iteration.
inline std::vector<double> iterate_policy_value(const wocar::TabularMDP& m, const std::vector<ActionId>& action_of,
                                                double tol = 1e-13) {
  std::vector<double> v(m.n_states, 0.0), next(m.n_states, 0.0);
  for (int it = 0; it < 1000000; ++it) {
    double delta = 0.0;
    for (StateId s = 0; s < m.n_states; ++s) {
      if (m.terminal[s]) {
        next[s] = 0.0;
        continue;
      }
      const ActionId a = action_of[s];
      double x = m.reward[s * m.n_actions + a];
      for (StateId n = 0; n < m.n_states; ++n) {
        const double p = m.transition[(s * m.n_actions + a) * m.n_states + n];
        if (p != 0.0 && !m.terminal[n]) x += m.gamma * p * v[n];
      }
      next[s] = x;
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (delta <= tol) break;
  }
  return v;
}

/// Pointwise minimum of the attacked value over every attacker map, each
/// evaluated by value iteration.
inline std::vector<double> enumerate_worst_value(const wocar::TabularMDP& m, const wocar::DeterministicPolicy& pi,
                                                 const wocar::TabularPerturbation& pert) {
  const std::size_t n = m.n_states;
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  while (true) {
    std::vector<ActionId> composite(n);
    for (StateId s = 0; s < n; ++s) composite[s] = pi.action_of[pert.admissible[s][idx[s]]];
    const auto v = iterate_policy_value(m, composite);
    for (StateId s = 0; s < n; ++s) best[s] = std::min(best[s], v[s]);
    StateId k = 0;
    while (k < n && ++idx[k] == pert.admissible[k].size()) idx[k++] = 0;
    if (k == n) break;
  }
  return best;
}

/// Straight-line MLP forward pass.
inline std::vector<double> forward(const wocar::NetSpec& spec, std::span<const double> p, std::vector<double> x) {
  std::size_t off = 0;
  const auto& w = spec.layer_widths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::size_t in = w[l], out = w[l + 1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += p[off + o * in + i] * x[i];
      y[o] = acc;
    }
    off += in * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += p[off + o];
    off += out;
    if (l + 2 < w.size()) {
      for (double& v : y) v = spec.activation == wocar::Activation::relu ? std::max(0.0, v) : std::tanh(v);
    }
    x = std::move(y);
  }
  return x;
}

/// Central differences of a scalar function.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1, |b|_inf).
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

/// Linear network whose output at one-hot(s) is the row q(s, .).
inline wocar::Network table_net(const wocar::QTable& q) {
  wocar::NetSpec spec = wocar::mlp_spec(q.n_states, {}, q.n_actions);
  std::vector<double> p(spec.param_count(), 0.0);
  for (StateId s = 0; s < q.n_states; ++s)
    for (ActionId a = 0; a < q.n_actions; ++a) p[a * q.n_states + s] = q(s, a);
  return wocar::Network(spec, p);
}

inline std::vector<double> one_hot(std::size_t n, std::size_t i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace oracle
