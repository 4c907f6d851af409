#include "wocar/point_mass.hpp"

#include <algorithm>
#include <cmath>

#include "wocar/error.hpp"

namespace wocar {

void validate(const ContinuousEnvSpec& spec) {
  if (spec.obs_dim == 0 || spec.act_dim == 0) throw InvalidArgument("continuous env: dimensions must be positive");
  if (spec.act_low.size() != spec.act_dim || spec.act_high.size() != spec.act_dim) {
    throw InvalidArgument("continuous env: action bounds must have act_dim entries");
  }
  for (std::size_t i = 0; i < spec.act_dim; ++i) {
    if (!(spec.act_low[i] < spec.act_high[i])) throw InvalidArgument("continuous env: act_low must be below act_high");
  }
  if (spec.horizon < 1) throw InvalidArgument("continuous env: horizon must be at least 1");
  if (!(spec.eps >= 0.0)) throw InvalidArgument("continuous env: eps must be non-negative");
}

ContinuousEnvSpec point_mass_spec() { return ContinuousEnvSpec{}; }

PointMassState point_mass_reset(const PointMassParams& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-params.start_radius, params.start_radius);
  PointMassState s;
  s.x = u(rng);
  s.y = u(rng);
  return s;
}

PointMassStep point_mass_step(const PointMassParams& params, const ContinuousEnvSpec& spec,
                              PointMassState& state, std::span<const double> action) {
  if (action.size() != 2) throw InvalidArgument("point-mass: action must be 2-dimensional");
  const double ax = std::clamp(action[0], spec.act_low[0], spec.act_high[0]);
  const double ay = std::clamp(action[1], spec.act_low[1], spec.act_high[1]);
  state.vx += params.dt * (ax - params.damping * state.vx);
  state.vy += params.dt * (ay - params.damping * state.vy);
  state.x += params.dt * state.vx;
  state.y += params.dt * state.vy;
  PointMassStep out;
  out.reward = -std::hypot(state.x, state.y) - 0.01 * (ax * ax + ay * ay);
  if (std::abs(state.x) > params.arena || std::abs(state.y) > params.arena) {
    out.left_arena = true;
    out.reward += params.exit_penalty;
  }
  return out;
}

}  // namespace wocar
