#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wocar {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Finite discounted MDP with dense tensors.
///
/// `transition` is laid out as [state][action][next_state] and `reward` as
/// [state][action]. Terminal states are absorbing: they self-loop with
/// probability one and pay zero reward; `normalize_terminals` enforces this.
struct TabularMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  double gamma = 0.0;
  std::vector<double> initial_dist;
  std::vector<std::uint8_t> terminal;

  TabularMDP() = default;
  TabularMDP(std::size_t states, std::size_t actions, double discount);

  double& p(StateId s, ActionId a, StateId next) {
    return transition[(s * n_actions + a) * n_states + next];
  }
  double p(StateId s, ActionId a, StateId next) const {
    return transition[(s * n_actions + a) * n_states + next];
  }
  double& r(StateId s, ActionId a) { return reward[s * n_actions + a]; }
  double r(StateId s, ActionId a) const { return reward[s * n_actions + a]; }

  std::span<const double> row(StateId s, ActionId a) const {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }
  std::span<double> row(StateId s, ActionId a) {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }

  bool is_terminal(StateId s) const { return terminal[s] != 0; }

  /// Rewrites terminal rows as zero-reward self-loops.
  void normalize_terminals();
};

/// Throws InvalidArgument if any TabularMDP invariant is violated:
/// shapes, row sums (1e-9), non-negativity, gamma in [0,1), initial
/// distribution, absorbing terminals.
void validate(const TabularMDP& mdp);

/// Per-state admissible perturbed observations B(s). Always s in B(s).
///
/// `distance` optionally parallels `admissible` and gives how much budget it
/// takes to show each member instead of s. When empty, every member other
/// than s costs exactly `budget`.
struct TabularPerturbation {
  std::vector<std::vector<StateId>> admissible;
  std::vector<std::vector<double>> distance;
  double budget = 0.0;

  std::size_t n_states() const { return admissible.size(); }

  static TabularPerturbation identity(std::size_t n_states);

  bool contains(StateId s, StateId observed) const;

  double cost(StateId s, std::size_t member) const;

  /// The sets reachable with a smaller budget `eps`: members whose cost
  /// exceeds eps are dropped. eps >= budget returns the sets unchanged.
  TabularPerturbation restricted(double eps) const;
};

void validate(const TabularPerturbation& perturb, std::size_t n_states);

struct DeterministicPolicy {
  std::vector<ActionId> action_of;

  ActionId operator()(StateId s) const { return action_of[s]; }
  std::size_t n_states() const { return action_of.size(); }
};

void validate(const DeterministicPolicy& policy, const TabularMDP& mdp);

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid actions. y grows downward, so `up` decreases y.
enum GridAction : ActionId { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

struct GoHomeSpec {
  int width = 5;
  int height = 5;
  Cell start{0, 2};
  Cell home{4, 2};
  Cell bomb{3, 2};
  std::vector<Cell> rocks;
  double slip = 0.0;
  int k_perturb = 1;
  double gamma = 0.95;
  double home_reward = 10.0;
  double bomb_reward = -10.0;
  double step_reward = -0.1;
};

/// A grid MDP together with its geometry. Rock cells are not states; every
/// other cell is, indexed row-major in `cells`.
struct GridWorld {
  TabularMDP mdp;
  TabularPerturbation perturb;
  GoHomeSpec spec;
  std::vector<Cell> cells;
  std::vector<int> state_of_cell;  // -1 for rocks

  StateId state_of(Cell c) const;
  Cell cell_of(StateId s) const { return cells[s]; }
  /// Chebyshev distance between the cells of two states.
  int distance(StateId a, StateId b) const;
};

GridWorld build_gohome(const GoHomeSpec& spec);

/// The built-in 5x5 go-home layout: a short route that brushes past the bomb
/// and a slightly longer detour that keeps clear of it.
GoHomeSpec gohome_5x5();

/// Two-state example: a0 stays, a1 switches, R(s0, .) = 0, R(s1, .) = 1,
/// gamma = 0.5, pi = (a1, a0), B(s0) = {s0, s1}, B(s1) = {s1}.
struct Chain2 {
  TabularMDP mdp;
  TabularPerturbation perturb;
  DeterministicPolicy policy;
};

Chain2 chain2();

TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed);

TabularPerturbation random_perturbation(const TabularMDP& mdp, std::size_t max_set_size,
                                        std::uint64_t seed);

struct StepOutcome {
  StateId next_state;
  double reward;
  bool done;
};

StepOutcome step(const TabularMDP& mdp, StateId state, ActionId action, std::mt19937_64& rng);

/// Draws a start state from `initial_dist`.
StateId sample_initial(const TabularMDP& mdp, std::mt19937_64& rng);

// MDP text format. See README for the grammar.
void write_mdp(std::ostream& out, const TabularMDP& mdp, const TabularPerturbation& perturb);
std::pair<TabularMDP, TabularPerturbation> read_mdp(std::istream& in);
void save_mdp(const std::string& path, const TabularMDP& mdp, const TabularPerturbation& perturb);
std::pair<TabularMDP, TabularPerturbation> load_mdp(const std::string& path);

void write_policy(std::ostream& out, const DeterministicPolicy& policy);
DeterministicPolicy read_policy(std::istream& in);
void save_policy(const std::string& path, const DeterministicPolicy& policy);
DeterministicPolicy load_policy(const std::string& path);

}  // namespace wocar
