// Command-line front end. Exit codes: 0 success, 1 other failure,
// 2 configuration error, 3 numerical abort.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wocar/agent.hpp"
#include "wocar/attacks.hpp"
#include "wocar/bounds.hpp"
#include "wocar/config.hpp"
#include "wocar/env.hpp"
#include "wocar/error.hpp"
#include "wocar/eval.hpp"
#include "wocar/experiment.hpp"
#include "wocar/mdp.hpp"
#include "wocar/worst_attack.hpp"

namespace fs = std::filesystem;
using namespace wocar;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_report(const EvalReport& r) {
  std::cout << std::setprecision(17);
  std::cout << "attack    " << attack_name(r.attack.kind) << "\n"
            << "eps       " << r.attack.eps << "\n"
            << "episodes  " << r.episodes << "\n"
            << "mean      " << r.mean << "\n"
            << "stddev    " << r.stddev << "\n"
            << "disc_mean " << r.discounted_mean << "\n"
            << "disc_std  " << r.discounted_stddev << "\n";
}

nlohmann::json report_json(const EvalReport& r, const std::string& env) {
  return {{"env", env},
          {"attack", attack_name(r.attack.kind)},
          {"eps", r.attack.eps},
          {"steps", r.attack.steps},
          {"seed", r.attack.seed},
          {"episodes", r.episodes},
          {"mean", r.mean},
          {"stddev", r.stddev},
          {"discounted_mean", r.discounted_mean},
          {"discounted_stddev", r.discounted_stddev},
          {"returns", r.returns}};
}

/// Run directory owning a checkpoint: the checkpoint's directory, or its
/// parent for checkpoints under ckpt/.
fs::path run_dir_of(const fs::path& ckpt) {
  fs::path dir = ckpt.parent_path();
  if (dir.filename() == "ckpt") dir = dir.parent_path();
  return dir.empty() ? fs::path(".") : dir;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets, const std::string& algo,
              const std::string& env, const std::string& seed, const std::string& out) {
  std::map<std::string, std::string> entries;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config '" + config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    entries = parse_config_text(ss.str());
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    entries[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (!algo.empty()) entries["algo"] = algo;
  if (!env.empty()) entries["env"] = env;
  if (!seed.empty()) entries["seed"] = seed;
  if (!out.empty()) entries["out"] = out;
  const RunConfig config = make_run_config(entries);
  const RunOutcome r = run_experiment(config);
  std::cout << std::setprecision(17) << "run_dir           " << r.dir << "\n"
            << "natural_return    " << r.summary.natural_return << "\n"
            << "worst_case_return " << r.summary.worst_case_return << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& env_name, std::size_t episodes, std::uint64_t seed) {
  const Agent agent = load_agent(ckpt);
  const auto env = make_env(env_name);
  const EvalReport r = evaluate(agent, *env, AttackSpec{}, episodes, seed, thread_budget(64));
  print_report(r);
  if (const TabularEnv* tab = env->as_tabular(); tab && agent.discrete) {
    const auto [nat, wst] = exact_tabular_values(agent, *tab, tab->budget());
    std::cout << "exact_natural " << nat << "\nexact_worst   " << wst << "\n";
  }
  return 0;
}

int cmd_attack(const std::string& ckpt, const std::string& env_name, const std::string& kind, double eps,
               std::size_t episodes, int steps, std::uint64_t seed, const std::string& run_dir) {
  const Agent agent = load_agent(ckpt);
  const auto env = make_env(env_name);
  const AttackSpec spec{parse_attack(kind), eps, steps, seed};
  try {
    validate(spec);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  EvalReport r;
  try {
    r = evaluate(agent, *env, spec, episodes, seed, thread_budget(64));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  print_report(r);
  const fs::path dir = run_dir.empty() ? run_dir_of(ckpt) : fs::path(run_dir);
  std::ofstream out(dir / "attacks.jsonl", std::ios::app);
  if (!out) throw ConfigError("cannot append to '" + (dir / "attacks.jsonl").string() + "'");
  nlohmann::json j = report_json(r, env_name);
  j["checkpoint"] = ckpt;
  out << j.dump() << '\n';
  return 0;
}

int cmd_oracle(const std::string& mdp_path, const std::string& policy_path, std::uint64_t cap) {
  const auto [mdp, perturb] = load_mdp(mdp_path);
  const DeterministicPolicy policy = load_policy(policy_path);
  validate(policy, mdp);
  const QTable q_worst = worst_attack_fixed_point(mdp, policy, perturb);
  const ValueTable v_worst = worst_attack_state_value(q_worst, policy, perturb);
  const QTable q_nat = policy_evaluation(mdp, policy);
  const WorstValue h = exact_worst_value(mdp, policy, perturb, cap);
  std::cout << std::setprecision(17);
  std::cout << std::left << std::setw(8) << "state" << std::setw(26) << "worst_value" << std::setw(26)
            << "natural_value" << "attacker\n";
  for (StateId s = 0; s < mdp.n_states; ++s) {
    std::cout << std::left << std::setw(8) << s << std::setw(26) << v_worst[s] << std::setw(26)
              << q_nat(s, policy(s)) << h.attacker(s) << "\n";
  }
  ValueTable v_nat(mdp.n_states);
  for (StateId s = 0; s < mdp.n_states; ++s) v_nat[s] = q_nat(s, policy(s));
  std::cout << "start_worst   " << expected_start_value(mdp, v_worst) << "\n"
            << "start_natural " << expected_start_value(mdp, v_nat) << "\n";
  return 0;
}

int cmd_bounds_check(const std::string& path, double eps, std::size_t samples, std::size_t centers,
                     std::uint64_t seed) {
  if (!(eps >= 0.0)) throw ConfigError("--eps must be non-negative");
  std::vector<std::pair<std::string, Network>> nets;
  {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::string first;
    in >> first;
    in.seekg(0);
    if (first == "AGENT") {
      const Agent a = read_agent(in);
      nets.emplace_back("actor", a.actor);
      if (a.critic) nets.emplace_back("critic", *a.critic);
      if (a.value) nets.emplace_back("value", *a.value);
    } else {
      std::string name;
      Network net;
      while (read_network(in, name, net)) nets.emplace_back(name, net);
    }
  }
  if (nets.empty()) throw ConfigError("no networks in '" + path + "'");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t total = 0;
  for (const auto& [name, net] : nets) {
    std::size_t violations = 0;
    for (std::size_t c = 0; c < centers; ++c) {
      std::vector<double> center(net.spec.input_dim());
      for (double& x : center) x = u(rng);
      const IntervalBounds b = ibp_bounds(net.spec, net.params, center, eps);
      std::vector<double> x(center.size());
      for (std::size_t k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = center[i] + eps * u(rng);
        if (!b.contains(net(x))) ++violations;
      }
    }
    std::cout << std::left << std::setw(10) << name << " samples " << centers * samples << " violations "
              << violations << "\n";
    total += violations;
  }
  return total == 0 ? 0 : kNumericalError;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& values,
              const std::string& seeds, const std::string& out) {
  const RunConfig base = load_run_config(config_path);
  std::vector<std::uint64_t> seed_list;
  for (const auto& s : split_list(seeds)) {
    try {
      seed_list.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + s + "'");
    }
  }
  const auto rows = run_sweep(base, param, split_list(values), seed_list, out, thread_budget(64));
  std::cout << std::setprecision(17);
  std::cout << "value\truns\tmean_natural\tmean_worst\tmedian_natural\tmedian_worst\n";
  for (const auto& r : rows) {
    std::cout << r.value << '\t' << r.runs << '\t' << r.mean_natural << '\t' << r.mean_worst << '\t'
              << r.median_natural << '\t' << r.median_worst << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Worst-case-aware robust RL lab"};
  app.require_subcommand(1);

  std::string config_path, algo, env = "", seed_s, out;
  std::vector<std::string> sets;
  auto* train = app.add_subcommand("train", "Train an agent and write a run directory");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--algo", algo, "dqn, wocar-dqn, ppo or wocar-ppo");
  train->add_option("--env", env, "environment name");
  train->add_option("--seed", seed_s, "master seed");
  train->add_option("--out", out, "run directory");
  train->add_option("--set", sets, "extra key=value overrides");

  std::string ckpt, env_name = "gohome";
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint without attack");
  eval_cmd->add_option("--ckpt", ckpt, "agent checkpoint")->required();
  eval_cmd->add_option("--env", env_name, "environment name");
  eval_cmd->add_option("--episodes", episodes, "episode count");
  eval_cmd->add_option("--seed", seed, "evaluation seed");

  std::string kind = "pgd", run_dir;
  double eps = 0.0;
  int steps = 10;
  auto* attack = app.add_subcommand("attack", "Evaluate a checkpoint under attack");
  attack->add_option("--ckpt", ckpt, "agent checkpoint")->required();
  attack->add_option("--env", env_name, "environment name");
  attack->add_option("--attack", kind, "none, random, maxdiff, minbest, pgd, tabular-bruteforce");
  attack->add_option("--eps", eps, "perturbation budget")->required();
  attack->add_option("--episodes", episodes, "episode count");
  attack->add_option("--steps", steps, "attack iterations");
  attack->add_option("--seed", seed, "evaluation seed");
  attack->add_option("--run-dir", run_dir, "directory receiving attacks.jsonl");

  std::string mdp_path, policy_path;
  std::uint64_t cap = 1000000;
  auto* oracle = app.add_subcommand("oracle", "Exact worst-case values of a tabular policy");
  oracle->add_option("--mdp", mdp_path, "MDP text file")->required();
  oracle->add_option("--policy", policy_path, "policy file")->required();
  oracle->add_option("--cap", cap, "enumeration cap for the attacker map");

  std::string net_path;
  std::size_t samples = 10000, centers = 10;
  auto* bounds = app.add_subcommand("bounds-check", "Sampling soundness check of interval bounds");
  bounds->add_option("--net", net_path, "checkpoint")->required();
  bounds->add_option("--eps", eps, "ball radius")->required();
  bounds->add_option("--samples", samples, "samples per center");
  bounds->add_option("--centers", centers, "random centers in [-1, 1]^d");
  bounds->add_option("--seed", seed, "sampling seed");

  std::string param, values, seeds = "0";
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep->add_option("--config", config_path, "base config file")->required();
  sweep->add_option("--param", param, "config key to vary")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds, "comma-separated seeds");
  sweep->add_option("--out", out, "sweep directory")->required();

  std::string dir, format = "csv";
  auto* exp = app.add_subcommand("export", "Export metrics or sweep rows as a table");
  exp->add_option("--dir", dir, "run or sweep directory")->required();
  exp->add_option("--format", format, "csv or tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*train) return cmd_train(config_path, sets, algo, env, seed_s, out);
    if (*eval_cmd) return cmd_eval(ckpt, env_name, episodes, seed);
    if (*attack) return cmd_attack(ckpt, env_name, kind, eps, episodes, steps, seed, run_dir);
    if (*oracle) return cmd_oracle(mdp_path, policy_path, cap);
    if (*bounds) return cmd_bounds_check(net_path, eps, samples, centers, seed);
    if (*sweep) return cmd_sweep(config_path, param, values, seeds, out);
    if (*exp) {
      std::cout << export_table(dir, format) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
