#include "wocar/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wocar/error.hpp"

namespace wocar {

namespace {

constexpr double kRowTolerance = 1e-9;

std::string where(StateId s, ActionId a) {
  std::ostringstream os;
  os << "(s=" << s << ", a=" << a << ")";
  return os.str();
}

}  // namespace

TabularMDP::TabularMDP(std::size_t states, std::size_t actions, double discount)
    : n_states(states),
      n_actions(actions),
      transition(states * actions * states, 0.0),
      reward(states * actions, 0.0),
      gamma(discount),
      initial_dist(states, 0.0),
      terminal(states, 0) {}

void TabularMDP::normalize_terminals() {
  for (StateId s = 0; s < n_states; ++s) {
    if (!is_terminal(s)) continue;
    for (ActionId a = 0; a < n_actions; ++a) {
      auto out = row(s, a);
      std::fill(out.begin(), out.end(), 0.0);
      out[s] = 1.0;
      r(s, a) = 0.0;
    }
  }
}

void validate(const TabularMDP& mdp) {
  if (mdp.n_states == 0 || mdp.n_actions == 0) {
    throw InvalidArgument("MDP needs at least one state and one action");
  }
  if (mdp.transition.size() != mdp.n_states * mdp.n_actions * mdp.n_states ||
      mdp.reward.size() != mdp.n_states * mdp.n_actions ||
      mdp.initial_dist.size() != mdp.n_states || mdp.terminal.size() != mdp.n_states) {
    throw InvalidArgument("MDP tensor shapes do not match n_states/n_actions");
  }
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0)) {
    throw InvalidArgument("gamma must lie in [0, 1)");
  }
  for (StateId s = 0; s < mdp.n_states; ++s) {
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0;
      for (double p : mdp.row(s, a)) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw InvalidArgument("negative or non-finite probability at " + where(s, a));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        throw InvalidArgument("transition row does not sum to 1 at " + where(s, a));
      }
      if (!std::isfinite(mdp.r(s, a))) {
        throw InvalidArgument("non-finite reward at " + where(s, a));
      }
      if (mdp.is_terminal(s) && (mdp.p(s, a, s) != 1.0 || mdp.r(s, a) != 0.0)) {
        throw InvalidArgument("terminal state is not an absorbing zero-reward loop at " +
                              where(s, a));
      }
    }
  }
  double init_sum = 0.0;
  for (double p : mdp.initial_dist) {
    if (!(p >= 0.0)) throw InvalidArgument("negative initial probability");
    init_sum += p;
  }
  if (std::abs(init_sum - 1.0) > kRowTolerance) {
    throw InvalidArgument("initial distribution does not sum to 1");
  }
}

TabularPerturbation TabularPerturbation::identity(std::size_t n_states) {
  TabularPerturbation out;
  out.admissible.resize(n_states);
  for (StateId s = 0; s < n_states; ++s) out.admissible[s] = {s};
  return out;
}

bool TabularPerturbation::contains(StateId s, StateId observed) const {
  const auto& set = admissible[s];
  return std::find(set.begin(), set.end(), observed) != set.end();
}

double TabularPerturbation::cost(StateId s, std::size_t member) const {
  if (admissible[s][member] == s) return 0.0;
  if (distance.empty()) return budget;
  return distance[s][member];
}

TabularPerturbation TabularPerturbation::restricted(double eps) const {
  TabularPerturbation out;
  out.budget = std::min(eps, budget);
  out.admissible.resize(admissible.size());
  if (!distance.empty()) out.distance.resize(admissible.size());
  for (StateId s = 0; s < admissible.size(); ++s) {
    for (std::size_t i = 0; i < admissible[s].size(); ++i) {
      if (cost(s, i) <= eps) {
        out.admissible[s].push_back(admissible[s][i]);
        if (!distance.empty()) out.distance[s].push_back(distance[s][i]);
      }
    }
  }
  return out;
}

void validate(const TabularPerturbation& perturb, std::size_t n_states) {
  if (perturb.admissible.size() != n_states) {
    throw InvalidArgument("perturbation has " + std::to_string(perturb.admissible.size()) +
                          " sets for " + std::to_string(n_states) + " states");
  }
  if (!perturb.distance.empty() && perturb.distance.size() != n_states) {
    throw InvalidArgument("perturbation distance table has the wrong number of rows");
  }
  for (StateId s = 0; s < n_states; ++s) {
    const auto& set = perturb.admissible[s];
    if (set.empty()) throw InvalidArgument("empty perturbation set at state " + std::to_string(s));
    for (StateId m : set) {
      if (m >= n_states) {
        throw InvalidArgument("perturbation set of state " + std::to_string(s) +
                              " references state " + std::to_string(m));
      }
    }
    if (!perturb.contains(s, s)) {
      throw InvalidArgument("perturbation set of state " + std::to_string(s) +
                            " does not contain the state itself");
    }
    if (!perturb.distance.empty() && perturb.distance[s].size() != set.size()) {
      throw InvalidArgument("perturbation distance row size mismatch at state " +
                            std::to_string(s));
    }
  }
}

void validate(const DeterministicPolicy& policy, const TabularMDP& mdp) {
  if (policy.action_of.size() != mdp.n_states) {
    throw InvalidArgument("policy covers " + std::to_string(policy.action_of.size()) +
                          " states, MDP has " + std::to_string(mdp.n_states));
  }
  for (ActionId a : policy.action_of) {
    if (a >= mdp.n_actions) throw InvalidArgument("policy action out of range");
  }
}

// ---------------------------------------------------------------------------
// Go-home gridworld

StateId GridWorld::state_of(Cell c) const {
  if (c.x < 0 || c.y < 0 || c.x >= spec.width || c.y >= spec.height) {
    throw InvalidArgument("cell outside the grid");
  }
  const int id = state_of_cell[c.y * spec.width + c.x];
  if (id < 0) throw InvalidArgument("cell is a rock");
  return static_cast<StateId>(id);
}

int GridWorld::distance(StateId a, StateId b) const {
  const Cell ca = cells[a];
  const Cell cb = cells[b];
  return std::max(std::abs(ca.x - cb.x), std::abs(ca.y - cb.y));
}

GridWorld build_gohome(const GoHomeSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.width * spec.height < 2) {
    throw InvalidArgument("go-home grid must have at least two cells");
  }
  auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < spec.width && c.y < spec.height; };
  for (Cell c : {spec.start, spec.home, spec.bomb}) {
    if (!inside(c)) throw InvalidArgument("start/home/bomb cell outside the grid");
  }
  if (spec.home == spec.bomb) throw InvalidArgument("home and bomb share a cell");
  if (!(spec.slip >= 0.0 && spec.slip < 0.5)) throw InvalidArgument("slip must lie in [0, 0.5)");
  if (spec.k_perturb < 0) throw InvalidArgument("k_perturb must be non-negative");

  GridWorld world;
  world.spec = spec;
  world.state_of_cell.assign(static_cast<std::size_t>(spec.width * spec.height), 0);
  for (Cell rock : spec.rocks) {
    if (!inside(rock)) throw InvalidArgument("rock outside the grid");
    if (rock == spec.home || rock == spec.bomb) throw InvalidArgument("home or bomb on a rock");
    if (rock == spec.start) throw InvalidArgument("start on a rock");
    world.state_of_cell[rock.y * spec.width + rock.x] = -1;
  }
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      int& id = world.state_of_cell[y * spec.width + x];
      if (id < 0) continue;
      id = static_cast<int>(world.cells.size());
      world.cells.push_back({x, y});
    }
  }

  const std::size_t n = world.cells.size();
  TabularMDP mdp(n, 4, spec.gamma);
  const StateId home = world.state_of(spec.home);
  const StateId bomb = world.state_of(spec.bomb);
  mdp.terminal[home] = 1;
  mdp.terminal[bomb] = 1;

  auto move = [&](Cell c, ActionId a) {
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {-1, 0, 1, 0};
    const Cell next{c.x + dx[a], c.y + dy[a]};
    if (!inside(next) || world.state_of_cell[next.y * spec.width + next.x] < 0) return c;
    return next;
  };
  auto arrival_reward = [&](StateId next) {
    if (next == home) return spec.home_reward;
    if (next == bomb) return spec.bomb_reward;
    return spec.step_reward;
  };

  for (StateId s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < 4; ++a) {
      // Intended move, or one of the two lateral deviations.
      const std::pair<ActionId, double> outcomes[3] = {
          {a, 1.0 - spec.slip}, {(a + 1) % 4, spec.slip / 2}, {(a + 3) % 4, spec.slip / 2}};
      double expected = 0.0;
      for (auto [dir, prob] : outcomes) {
        if (prob == 0.0) continue;
        const StateId next = world.state_of(move(world.cells[s], dir));
        mdp.p(s, a, next) += prob;
        expected += prob * arrival_reward(next);
      }
      mdp.r(s, a) = expected;
    }
  }
  mdp.normalize_terminals();
  mdp.initial_dist[world.state_of(spec.start)] = 1.0;
  validate(mdp);
  world.mdp = std::move(mdp);

  TabularPerturbation& pert = world.perturb;
  pert.budget = spec.k_perturb;
  pert.admissible.resize(n);
  pert.distance.resize(n);
  for (StateId s = 0; s < n; ++s) {
    for (StateId o = 0; o < n; ++o) {
      const int d = world.distance(s, o);
      if (d <= spec.k_perturb) {
        pert.admissible[s].push_back(o);
        pert.distance[s].push_back(d);
      }
    }
  }
  return world;
}

GoHomeSpec gohome_5x5() {
  GoHomeSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.start = {0, 2};
  spec.home = {4, 2};
  spec.bomb = {3, 2};
  spec.rocks = {{2, 2}, {3, 1}};
  spec.slip = 0.0;
  spec.k_perturb = 1;
  spec.gamma = 0.95;
  return spec;
}

// ---------------------------------------------------------------------------
// Random instances

Chain2 chain2() {
  Chain2 c;
  c.mdp = TabularMDP(2, 2, 0.5);
  for (StateId s = 0; s < 2; ++s) {
    c.mdp.p(s, 0, s) = 1.0;
    c.mdp.p(s, 1, 1 - s) = 1.0;
    c.mdp.r(s, 0) = c.mdp.r(s, 1) = static_cast<double>(s);
  }
  c.mdp.initial_dist = {0.5, 0.5};
  c.perturb.admissible = {{0, 1}, {1}};
  c.perturb.budget = 1.0;
  c.policy.action_of = {1, 0};
  return c;
}

TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1) throw InvalidArgument("random_mdp needs n_states, n_actions >= 1");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> draw(1.0);
  std::uniform_real_distribution<double> rew(-1.0, 1.0);
  TabularMDP mdp(n_states, n_actions, gamma);
  for (StateId s = 0; s < n_states; ++s) {
    for (ActionId a = 0; a < n_actions; ++a) {
      auto out = mdp.row(s, a);
      double sum = 0.0;
      for (double& p : out) {
        p = draw(rng) + 1e-12;
        sum += p;
      }
      for (double& p : out) p /= sum;
      mdp.r(s, a) = rew(rng);
    }
  }
  std::fill(mdp.initial_dist.begin(), mdp.initial_dist.end(), 1.0 / static_cast<double>(n_states));
  validate(mdp);
  return mdp;
}

TabularPerturbation random_perturbation(const TabularMDP& mdp, std::size_t max_set_size,
                                        std::uint64_t seed) {
  if (max_set_size < 1) throw InvalidArgument("max_set_size must be at least 1");
  std::mt19937_64 rng(seed);
  TabularPerturbation out;
  out.budget = 1.0;
  out.admissible.resize(mdp.n_states);
  std::vector<StateId> others;
  for (StateId s = 0; s < mdp.n_states; ++s) {
    others.clear();
    for (StateId o = 0; o < mdp.n_states; ++o) {
      if (o != s) others.push_back(o);
    }
    std::shuffle(others.begin(), others.end(), rng);
    const std::size_t cap = std::min(max_set_size - 1, others.size());
    std::uniform_int_distribution<std::size_t> extra(0, cap);
    const std::size_t k = extra(rng);
    auto& set = out.admissible[s];
    set.push_back(s);
    set.insert(set.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(set.begin(), set.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

StepOutcome step(const TabularMDP& mdp, StateId state, ActionId action, std::mt19937_64& rng) {
  if (state >= mdp.n_states || action >= mdp.n_actions) {
    throw InvalidArgument("step: state or action index out of range");
  }
  if (mdp.is_terminal(state)) return {state, 0.0, true};
  const auto probs = mdp.row(state, action);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  StateId next = mdp.n_states - 1;
  for (StateId k = 0; k < mdp.n_states; ++k) {
    acc += probs[k];
    if (x < acc) {
      next = k;
      break;
    }
  }
  // Rounding in the cumulative sum can leave x beyond acc; fall back to the
  // last state with mass.
  if (probs[next] == 0.0) {
    for (StateId k = mdp.n_states; k-- > 0;) {
      if (probs[k] > 0.0) {
        next = k;
        break;
      }
    }
  }
  return {next, mdp.r(state, action), mdp.is_terminal(next)};
}

StateId sample_initial(const TabularMDP& mdp, std::mt19937_64& rng) {
  std::discrete_distribution<StateId> d(mdp.initial_dist.begin(), mdp.initial_dist.end());
  return d(rng);
}

}  // namespace wocar
