#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "wocar/error.hpp"
#include "wocar/mdp.hpp"

namespace wocar {

namespace {

constexpr double kRowTolerance = 1e-9;

/// Line reader that skips blanks and '#' comments and remembers line numbers.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  std::string expect(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(number_ + 1, std::string("unexpected end of file, expected ") + what);
    return line;
  }

  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

template <typename T>
std::vector<T> parse_row(const std::string& line, std::size_t lineno, std::size_t skip_tokens = 0) {
  std::istringstream is(line);
  std::string tok;
  for (std::size_t i = 0; i < skip_tokens; ++i) is >> tok;
  std::vector<T> out;
  while (is >> tok) {
    std::istringstream ts(tok);
    T v{};
    if (!(ts >> v) || !ts.eof()) throw ParseError(lineno, "cannot parse number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

std::string keyword(const std::string& line) {
  std::istringstream is(line);
  std::string kw;
  is >> kw;
  return kw;
}

void expect_keyword(const std::string& line, const char* kw, std::size_t lineno) {
  if (keyword(line) != kw) {
    throw ParseError(lineno, std::string("expected section '") + kw + "', found '" + keyword(line) + "'");
  }
}

template <typename T>
void write_row(std::ostream& out, const T& values) {
  bool first = true;
  for (const auto& v : values) {
    if (!first) out << ' ';
    out << v;
    first = false;
  }
  out << '\n';
}

}  // namespace

void write_mdp(std::ostream& out, const TabularMDP& mdp, const TabularPerturbation& perturb) {
  validate(mdp);
  validate(perturb, mdp.n_states);
  const auto old_precision = out.precision(17);
  out << "MDP " << mdp.n_states << ' ' << mdp.n_actions << ' ' << mdp.gamma << '\n';
  for (StateId s = 0; s < mdp.n_states; ++s) {
    for (ActionId a = 0; a < mdp.n_actions; ++a) {
      out << "T " << s << ' ' << a << ' ';
      write_row(out, mdp.row(s, a));
    }
  }
  out << "R\n";
  for (StateId s = 0; s < mdp.n_states; ++s) {
    write_row(out, std::span<const double>(mdp.reward.data() + s * mdp.n_actions, mdp.n_actions));
  }
  out << "TERM\n";
  std::vector<int> flags(mdp.terminal.begin(), mdp.terminal.end());
  write_row(out, flags);
  out << "INIT\n";
  write_row(out, mdp.initial_dist);
  out << "PERT " << perturb.budget << '\n';
  for (const auto& set : perturb.admissible) write_row(out, set);
  if (!perturb.distance.empty()) {
    out << "PDIST\n";
    for (const auto& row : perturb.distance) write_row(out, row);
  }
  out.precision(old_precision);
}

std::pair<TabularMDP, TabularPerturbation> read_mdp(std::istream& in) {
  LineReader reader(in);
  std::string line = reader.expect("MDP header");

  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  double gamma = 0.0;
  {
    std::istringstream is(line);
    std::string kw;
    std::string extra;
    if (!(is >> kw >> n_states >> n_actions >> gamma) || kw != "MDP" || (is >> extra)) {
      throw ParseError(reader.number(), "malformed header, expected 'MDP n_states n_actions gamma'");
    }
    if (n_states == 0 || n_actions == 0) throw ParseError(reader.number(), "empty state or action space");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ParseError(reader.number(), "gamma must lie in [0, 1)");
  }

  TabularMDP mdp(n_states, n_actions, gamma);
  std::vector<std::uint8_t> seen(n_states * n_actions, 0);
  for (std::size_t k = 0; k < n_states * n_actions; ++k) {
    line = reader.expect("transition row");
    const std::size_t ln = reader.number();
    expect_keyword(line, "T", ln);
    std::istringstream is(line);
    std::string kw;
    long long s = -1;
    long long a = -1;
    if (!(is >> kw >> s >> a)) throw ParseError(ln, "malformed transition row, expected 'T s a p...'");
    if (s < 0 || static_cast<std::size_t>(s) >= n_states) {
      throw ParseError(ln, "dangling state index " + std::to_string(s));
    }
    if (a < 0 || static_cast<std::size_t>(a) >= n_actions) {
      throw ParseError(ln, "dangling action index " + std::to_string(a));
    }
    const auto probs = parse_row<double>(line, ln, 3);
    if (probs.size() != n_states) {
      throw ParseError(ln, "transition row has " + std::to_string(probs.size()) + " entries, expected " +
                               std::to_string(n_states));
    }
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ParseError(ln, "negative or non-finite probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "row sum " << sum << " differs from 1";
      throw ParseError(ln, msg.str());
    }
    const std::size_t idx = static_cast<std::size_t>(s) * n_actions + static_cast<std::size_t>(a);
    if (seen[idx]) throw ParseError(ln, "duplicate transition row");
    seen[idx] = 1;
    std::copy(probs.begin(), probs.end(), mdp.row(static_cast<StateId>(s), static_cast<ActionId>(a)).begin());
  }

  expect_keyword(reader.expect("R section"), "R", reader.number());
  for (StateId s = 0; s < n_states; ++s) {
    line = reader.expect("reward row");
    const auto rewards = parse_row<double>(line, reader.number());
    if (rewards.size() != n_actions) throw ParseError(reader.number(), "reward row has the wrong length");
    for (ActionId a = 0; a < n_actions; ++a) mdp.r(s, a) = rewards[a];
  }

  expect_keyword(reader.expect("TERM section"), "TERM", reader.number());
  {
    const auto flags = parse_row<int>(reader.expect("terminal flags"), reader.number());
    if (flags.size() != n_states) throw ParseError(reader.number(), "terminal flag row has the wrong length");
    for (StateId s = 0; s < n_states; ++s) {
      if (flags[s] != 0 && flags[s] != 1) throw ParseError(reader.number(), "terminal flags must be 0 or 1");
      mdp.terminal[s] = static_cast<std::uint8_t>(flags[s]);
    }
  }

  line = reader.expect("INIT or PERT section");
  if (keyword(line) == "INIT") {
    const auto init = parse_row<double>(reader.expect("initial distribution"), reader.number());
    if (init.size() != n_states) throw ParseError(reader.number(), "initial distribution has the wrong length");
    double sum = 0.0;
    for (double p : init) {
      if (!(p >= 0.0)) throw ParseError(reader.number(), "negative initial probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) throw ParseError(reader.number(), "initial distribution does not sum to 1");
    mdp.initial_dist = init;
    line = reader.expect("PERT section");
  } else {
    std::size_t live = 0;
    for (auto t : mdp.terminal) live += t ? 0 : 1;
    for (StateId s = 0; s < n_states; ++s) {
      if (live == 0) {
        mdp.initial_dist[s] = 1.0 / static_cast<double>(n_states);
      } else {
        mdp.initial_dist[s] = mdp.is_terminal(s) ? 0.0 : 1.0 / static_cast<double>(live);
      }
    }
  }

  TabularPerturbation perturb;
  expect_keyword(line, "PERT", reader.number());
  {
    const auto budget = parse_row<double>(line, reader.number(), 1);
    if (budget.size() > 1) throw ParseError(reader.number(), "PERT takes at most one budget value");
    perturb.budget = budget.empty() ? 0.0 : budget[0];
  }
  perturb.admissible.resize(n_states);
  for (StateId s = 0; s < n_states; ++s) {
    line = reader.expect("perturbation set");
    const auto members = parse_row<long long>(line, reader.number());
    if (members.empty()) throw ParseError(reader.number(), "empty perturbation set");
    bool has_self = false;
    for (long long m : members) {
      if (m < 0 || static_cast<std::size_t>(m) >= n_states) {
        throw ParseError(reader.number(), "dangling state index " + std::to_string(m));
      }
      has_self = has_self || static_cast<StateId>(m) == s;
      perturb.admissible[s].push_back(static_cast<StateId>(m));
    }
    if (!has_self) throw ParseError(reader.number(), "perturbation set of state " + std::to_string(s) + " omits the state itself");
  }

  if (reader.next(line)) {
    expect_keyword(line, "PDIST", reader.number());
    perturb.distance.resize(n_states);
    for (StateId s = 0; s < n_states; ++s) {
      perturb.distance[s] = parse_row<double>(reader.expect("perturbation distances"), reader.number());
      if (perturb.distance[s].size() != perturb.admissible[s].size()) {
        throw ParseError(reader.number(), "distance row does not match its perturbation set");
      }
    }
    if (reader.next(line)) throw ParseError(reader.number(), "trailing content after PDIST");
  }

  mdp.normalize_terminals();
  validate(mdp);
  return {std::move(mdp), std::move(perturb)};
}

void save_mdp(const std::string& path, const TabularMDP& mdp, const TabularPerturbation& perturb) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_mdp(out, mdp, perturb);
  if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

std::pair<TabularMDP, TabularPerturbation> load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_mdp(in);
}

void write_policy(std::ostream& out, const DeterministicPolicy& policy) {
  out << "POLICY " << policy.action_of.size() << '\n';
  write_row(out, policy.action_of);
}

DeterministicPolicy read_policy(std::istream& in) {
  LineReader reader(in);
  std::string line = reader.expect("POLICY header");
  std::istringstream is(line);
  std::string kw;
  std::size_t n = 0;
  if (!(is >> kw >> n) || kw != "POLICY") throw ParseError(reader.number(), "malformed header, expected 'POLICY n_states'");
  DeterministicPolicy policy;
  while (policy.action_of.size() < n && reader.next(line)) {
    for (long long a : parse_row<long long>(line, reader.number())) {
      if (a < 0) throw ParseError(reader.number(), "negative action index");
      policy.action_of.push_back(static_cast<ActionId>(a));
    }
  }
  if (policy.action_of.size() != n) throw ParseError(reader.number(), "policy lists the wrong number of actions");
  return policy;
}

void save_policy(const std::string& path, const DeterministicPolicy& policy) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_policy(out, policy);
}

DeterministicPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_policy(in);
}

}  // namespace wocar
