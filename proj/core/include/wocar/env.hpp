#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wocar/mdp.hpp"
#include "wocar/point_mass.hpp"

namespace wocar {

struct EnvStep {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
};

class TabularEnv;

/// Episodic environment with vector observations. Instances are stateful;
/// use clone() to get an independent copy for another worker.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual bool discrete() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t n_actions() const { return 0; }
  virtual std::size_t act_dim() const { return 0; }
  virtual std::vector<double> act_low() const { return {}; }
  virtual std::vector<double> act_high() const { return {}; }
  virtual double gamma() const = 0;
  virtual int max_steps() const = 0;
  /// Default perturbation budget of the environment.
  virtual double budget() const = 0;

  virtual std::vector<double> reset(std::mt19937_64& rng) = 0;
  virtual EnvStep step(std::size_t action, std::mt19937_64& rng);
  virtual EnvStep step(std::span<const double> action, std::mt19937_64& rng);

  virtual std::unique_ptr<Environment> clone() const = 0;

  virtual const TabularEnv* as_tabular() const { return nullptr; }
};

/// A TabularMDP observed through one-hot vectors.
class TabularEnv final : public Environment {
 public:
  TabularEnv(std::string name, TabularMDP mdp, TabularPerturbation perturb, int max_steps = 200);

  std::string name() const override { return name_; }
  bool discrete() const override { return true; }
  std::size_t obs_dim() const override { return mdp_.n_states; }
  std::size_t n_actions() const override { return mdp_.n_actions; }
  double gamma() const override { return mdp_.gamma; }
  int max_steps() const override { return max_steps_; }
  double budget() const override { return perturb_.budget; }

  std::vector<double> reset(std::mt19937_64& rng) override;
  EnvStep step(std::size_t action, std::mt19937_64& rng) override;
  using Environment::step;

  std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularEnv>(*this); }
  const TabularEnv* as_tabular() const override { return this; }

  const TabularMDP& mdp() const { return mdp_; }
  const TabularPerturbation& perturbation() const { return perturb_; }
  StateId state() const { return state_; }

  std::vector<double> observation(StateId s) const;
  /// Inverse of observation(): index of the largest coordinate.
  StateId state_of(std::span<const double> obs) const;
  /// One-hot observations of the members of B(s) affordable within eps.
  std::vector<std::vector<double>> candidates(StateId s, double eps) const;

 private:
  std::string name_;
  TabularMDP mdp_;
  TabularPerturbation perturb_;
  int max_steps_;
  StateId state_ = 0;
};

class PointMassEnv final : public Environment {
 public:
  explicit PointMassEnv(ContinuousEnvSpec spec = point_mass_spec(), PointMassParams params = {});

  std::string name() const override { return "point-mass"; }
  bool discrete() const override { return false; }
  std::size_t obs_dim() const override { return spec_.obs_dim; }
  std::size_t act_dim() const override { return spec_.act_dim; }
  std::vector<double> act_low() const override { return spec_.act_low; }
  std::vector<double> act_high() const override { return spec_.act_high; }
  double gamma() const override { return 0.99; }
  int max_steps() const override { return spec_.horizon; }
  double budget() const override { return spec_.eps; }

  std::vector<double> reset(std::mt19937_64& rng) override;
  EnvStep step(std::span<const double> action, std::mt19937_64& rng) override;
  using Environment::step;

  std::unique_ptr<Environment> clone() const override { return std::make_unique<PointMassEnv>(*this); }

  const ContinuousEnvSpec& spec() const { return spec_; }

 private:
  ContinuousEnvSpec spec_;
  PointMassParams params_;
  PointMassState state_;
  int t_ = 0;
};

/// Registry: "gohome", "gohome-slip", "chain2", "point-mass", or
/// "file:<path>" for an MDP text file. Throws ConfigError on unknown names.
std::unique_ptr<Environment> make_env(const std::string& name);

std::vector<std::string> env_names();

}  // namespace wocar
