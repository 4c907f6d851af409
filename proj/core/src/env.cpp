#include "wocar/env.hpp"

#include <algorithm>

#include "wocar/error.hpp"
#include "wocar/net.hpp"

namespace wocar {

EnvStep Environment::step(std::size_t, std::mt19937_64&) {
  throw InvalidArgument(name() + ": environment takes continuous actions");
}

EnvStep Environment::step(std::span<const double>, std::mt19937_64&) {
  throw InvalidArgument(name() + ": environment takes discrete actions");
}

TabularEnv::TabularEnv(std::string name, TabularMDP mdp, TabularPerturbation perturb, int max_steps)
    : name_(std::move(name)), mdp_(std::move(mdp)), perturb_(std::move(perturb)), max_steps_(max_steps) {
  validate(mdp_);
  validate(perturb_, mdp_.n_states);
  if (max_steps_ < 1) throw InvalidArgument("tabular env: max_steps must be at least 1");
}

std::vector<double> TabularEnv::observation(StateId s) const {
  std::vector<double> o(mdp_.n_states, 0.0);
  o.at(s) = 1.0;
  return o;
}

StateId TabularEnv::state_of(std::span<const double> obs) const { return argmax(obs); }

std::vector<std::vector<double>> TabularEnv::candidates(StateId s, double eps) const {
  std::vector<std::vector<double>> out;
  const auto& set = perturb_.admissible.at(s);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (perturb_.cost(s, i) <= eps) out.push_back(observation(set[i]));
  }
  return out;
}

std::vector<double> TabularEnv::reset(std::mt19937_64& rng) {
  state_ = sample_initial(mdp_, rng);
  return observation(state_);
}

EnvStep TabularEnv::step(std::size_t action, std::mt19937_64& rng) {
  const StepOutcome o = wocar::step(mdp_, state_, action, rng);
  state_ = o.next_state;
  return {observation(state_), o.reward, o.done};
}

PointMassEnv::PointMassEnv(ContinuousEnvSpec spec, PointMassParams params)
    : spec_(std::move(spec)), params_(params) {
  validate(spec_);
  if (spec_.obs_dim != 4 || spec_.act_dim != 2) throw InvalidArgument("point-mass: expects obs_dim 4 and act_dim 2");
}

std::vector<double> PointMassEnv::reset(std::mt19937_64& rng) {
  state_ = point_mass_reset(params_, rng);
  t_ = 0;
  return state_.observation();
}

EnvStep PointMassEnv::step(std::span<const double> action, std::mt19937_64&) {
  const PointMassStep r = point_mass_step(params_, spec_, state_, action);
  ++t_;
  return {state_.observation(), r.reward, r.left_arena};
}

std::unique_ptr<Environment> make_env(const std::string& name) {
  if (name == "gohome" || name == "gohome-slip") {
    GoHomeSpec spec = gohome_5x5();
    if (name == "gohome-slip") spec.slip = 0.1;
    GridWorld g = build_gohome(spec);
    return std::make_unique<TabularEnv>(name, std::move(g.mdp), std::move(g.perturb));
  }
  if (name == "chain2") {
    Chain2 c = chain2();
    return std::make_unique<TabularEnv>(name, std::move(c.mdp), std::move(c.perturb), 50);
  }
  if (name == "point-mass") return std::make_unique<PointMassEnv>();
  if (name.rfind("file:", 0) == 0) {
    auto [mdp, perturb] = load_mdp(name.substr(5));
    return std::make_unique<TabularEnv>(name, std::move(mdp), std::move(perturb));
  }
  throw ConfigError("unknown environment '" + name + "'");
}

std::vector<std::string> env_names() { return {"gohome", "gohome-slip", "chain2", "point-mass", "file:<path>"}; }

}  // namespace wocar
