#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wocar {

struct ContinuousEnvSpec {
  std::size_t obs_dim = 4;
  std::size_t act_dim = 2;
  std::vector<double> act_low{-1.0, -1.0};
  std::vector<double> act_high{1.0, 1.0};
  std::string dynamics = "point-mass";
  int horizon = 100;
  double eps = 0.1;
};

void validate(const ContinuousEnvSpec& spec);

/// Planar point mass: observation (x, y, vx, vy), action is a force in
/// [-1, 1]^2. Reward -|p| - 0.01 |a|^2 per step; the episode ends at the
/// horizon or when the mass leaves the [-2, 2]^2 arena.
struct PointMassParams {
  double dt = 0.1;
  double damping = 0.1;
  double start_radius = 1.0;
  double arena = 2.0;
  double exit_penalty = -10.0;
};

struct PointMassState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  std::vector<double> observation() const { return {x, y, vx, vy}; }
};

PointMassState point_mass_reset(const PointMassParams& params, std::mt19937_64& rng);

struct PointMassStep {
  double reward = 0.0;
  bool left_arena = false;
};

/// Advances one semi-implicit Euler step. The action is clipped to the box
/// before it is applied.
PointMassStep point_mass_step(const PointMassParams& params, const ContinuousEnvSpec& spec,
                              PointMassState& state, std::span<const double> action);

ContinuousEnvSpec point_mass_spec();

}  // namespace wocar
