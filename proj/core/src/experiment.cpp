#include "wocar/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wocar/error.hpp"
#include "wocar/worst_attack.hpp"

namespace wocar {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return "wocar " WOCAR_VERSION; }

std::string version_hash() {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : version_string()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::pair<double, double> exact_tabular_values(const Agent& agent, const TabularEnv& env, double eps) {
  const auto policy = extract_tabular_policy(agent, env);
  const auto& mdp = env.mdp();
  const QTable q = policy_evaluation(mdp, policy);
  ValueTable v(mdp.n_states);
  for (StateId s = 0; s < mdp.n_states; ++s) v[s] = q(s, policy(s));
  const WorstValue worst = exact_worst_value(mdp, policy, env.perturbation().restricted(eps));
  return {expected_start_value(mdp, v), expected_start_value(mdp, worst.value)};
}

namespace {

double eval_eps(const RunConfig& c, const Environment& env) { return c.eval.eps < 0.0 ? env.budget() : c.eval.eps; }

/// Fills natural_return, worst_eval_return and return_<attack> entries.
void fill_eval(const RunConfig& c, const Environment& env, const Agent& agent, std::map<std::string, double>& out,
               std::map<std::string, double>* per_attack = nullptr) {
  const double eps = eval_eps(c, env);
  double worst = std::numeric_limits<double>::infinity();
  bool have_none = false;
  double none_mean = 0.0;
  for (AttackKind kind : c.eval.attacks) {
    AttackSpec spec{kind, eps, c.eval.steps, c.eval.seed};
    const EvalReport r = evaluate(agent, env, spec, c.eval.episodes, c.eval.seed);
    out["return_" + attack_name(kind)] = r.mean;
    if (per_attack) (*per_attack)[attack_name(kind)] = r.mean;
    if (kind == AttackKind::none) {
      have_none = true;
      none_mean = r.mean;
    } else {
      worst = std::min(worst, r.mean);
    }
  }
  const TabularEnv* tab = env.as_tabular();
  if (tab && c.eval.exact && agent.discrete) {
    const auto [nat, wst] = exact_tabular_values(agent, *tab, eps);
    out["natural_return"] = nat;
    out["worst_eval_return"] = wst;
    return;
  }
  if (have_none) out["natural_return"] = none_mean;
  if (std::isfinite(worst)) out["worst_eval_return"] = worst;
}

json record_json(const MetricsRecord& r) {
  json j;
  j["step"] = r.step;
  for (const auto& [k, v] : r.values) j[k] = v;
  return j;
}

void check_suite(const RunConfig& c, const Environment& env) {
  for (AttackKind k : c.eval.attacks) {
    if (k == AttackKind::tabular_bruteforce && !env.as_tabular()) {
      throw ConfigError("eval.attacks: tabular-bruteforce needs a tabular environment, got '" + env.name() + "'");
    }
    if (k == AttackKind::minbest && !env.discrete()) {
      throw ConfigError("eval.attacks: minbest needs discrete actions");
    }
  }
  if (is_dqn(c.algo) && !env.discrete()) throw ConfigError("algo " + algo_name(c.algo) + " needs discrete actions");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

json summary_json(const RunConfig& c, const RunSummary& s) {
  json j;
  j["algo"] = algo_name(c.algo);
  j["env"] = c.env;
  j["seed"] = c.seed;
  j["version_hash"] = version_hash();
  j["steps"] = s.steps;
  j["natural_return"] = s.natural_return;
  j["worst_case_return"] = s.worst_case_return;
  j["attacks"] = s.attack_returns;
  if (s.exact_natural) j["exact_natural"] = *s.exact_natural;
  if (s.exact_worst) j["exact_worst"] = *s.exact_worst;
  j["wall_time_s"] = s.wall_time_s;
  return j;
}

}  // namespace

RunOutcome run_experiment(const RunConfig& config, bool write) {
  const auto t0 = std::chrono::steady_clock::now();
  auto env = make_env(config.env);
  check_suite(config, *env);

  RunOutcome outcome;
  outcome.dir = config.out;
  fs::path dir(config.out);
  std::ofstream metrics_out;
  if (write) {
    std::error_code ec;
    fs::create_directories(dir / "ckpt", ec);
    if (ec) throw ConfigError("cannot create run directory '" + dir.string() + "': " + ec.message());
    std::ostringstream echo;
    echo << "# " << version_string() << "\n# version_hash = " << version_hash() << "\n# seed = " << config.seed
         << "\n"
         << to_text(config);
    write_text(dir / "config.txt", echo.str());
    metrics_out.open(dir / "metrics.jsonl");
    if (!metrics_out) throw ConfigError("cannot write '" + (dir / "metrics.jsonl").string() + "'");
  }

  const std::unique_ptr<Environment> eval_env = env->clone();
  EvalHook hook = [&](const Agent& agent, MetricsRecord& rec) {
    fill_eval(config, *eval_env, agent, rec.values);
    // Ground truth for the worst-case critic, at the budget it is trained on.
    const TabularEnv* tab = eval_env->as_tabular();
    if (tab && config.eval.exact && agent.discrete && rec.values.count("eps")) {
      rec.values["worst_train_eps_return"] = exact_tabular_values(agent, *tab, rec.values["eps"]).second;
    }
    if (write) {
      metrics_out << record_json(rec).dump() << '\n';
      metrics_out.flush();
    }
  };
  CheckpointHook ckpt;
  if (write) {
    ckpt = [&](const Agent& agent, std::uint64_t step) {
      save_agent((dir / "ckpt" / ("step_" + std::to_string(step) + ".agent")).string(), agent);
    };
  }

  if (is_dqn(config.algo)) {
    DQNResult r = dqn_train(*env, config.dqn, config.seed, hook, ckpt);
    outcome.agent = std::move(r.agent);
    outcome.metrics = std::move(r.metrics);
    outcome.summary.steps = config.dqn.total_steps;
  } else {
    PPOResult r = ppo_train(*env, config.ppo, config.seed, hook, ckpt);
    outcome.agent = std::move(r.agent);
    outcome.metrics = std::move(r.metrics);
    outcome.summary.steps = config.ppo.total_steps;
  }

  std::map<std::string, double> final_values;
  fill_eval(config, *eval_env, outcome.agent, final_values, &outcome.summary.attack_returns);
  RunSummary& s = outcome.summary;
  s.natural_return = final_values.count("natural_return") ? final_values["natural_return"] : 0.0;
  s.worst_case_return =
      final_values.count("worst_eval_return") ? final_values["worst_eval_return"] : s.natural_return;
  if (const TabularEnv* tab = eval_env->as_tabular(); tab && outcome.agent.discrete) {
    const auto [nat, wst] = exact_tabular_values(outcome.agent, *tab, eval_eps(config, *eval_env));
    s.exact_natural = nat;
    s.exact_worst = wst;
  }
  s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (write) {
    save_agent((dir / "final.agent").string(), outcome.agent);
    write_text(dir / "summary.json", summary_json(config, s).dump(2) + "\n");
  }
  return outcome;
}

std::vector<SweepRow> aggregate_sweep(const std::vector<std::string>& values,
                                      const std::vector<std::vector<RunSummary>>& runs) {
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row;
    row.value = values[i];
    row.runs = runs[i].size();
    std::vector<double> nat;
    std::vector<double> wst;
    for (const auto& s : runs[i]) {
      nat.push_back(s.natural_return);
      wst.push_back(s.worst_case_return);
    }
    if (!nat.empty()) {
      for (double x : nat) row.mean_natural += x / static_cast<double>(nat.size());
      for (double x : wst) row.mean_worst += x / static_cast<double>(wst.size());
    }
    row.median_natural = median(nat);
    row.median_worst = median(wst);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& key, const std::vector<std::string>& values,
                                const std::vector<std::uint64_t>& seeds, const std::string& out_dir, unsigned threads,
                                bool write) {
  if (values.empty() || seeds.empty()) throw ConfigError("sweep: need at least one value and one seed");
  struct Task {
    std::size_t value_index;
    RunConfig config;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::uint64_t seed : seeds) {
      RunConfig c = base;
      set_key(c, key, values[i]);
      set_key(c, "seed", std::to_string(seed));
      set_key(c, "out", (fs::path(out_dir) / (key + "=" + values[i]) / ("seed_" + std::to_string(seed))).string());
      tasks.push_back({i, std::move(c)});
    }
  }
  std::vector<RunSummary> summaries(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      try {
        summaries[k] = run_experiment(tasks[k].config, write).summary;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<std::vector<RunSummary>> grouped(values.size());
  for (std::size_t k = 0; k < tasks.size(); ++k) grouped[tasks[k].value_index].push_back(summaries[k]);
  auto rows = aggregate_sweep(values, grouped);

  if (write) {
    json j;
    j["parameter"] = key;
    j["seeds"] = seeds;
    j["version_hash"] = version_hash();
    j["rows"] = json::array();
    for (const auto& r : rows) {
      j["rows"].push_back({{"value", r.value},
                           {"runs", r.runs},
                           {"mean_natural", r.mean_natural},
                           {"mean_worst", r.mean_worst},
                           {"median_natural", r.median_natural},
                           {"median_worst", r.median_worst}});
    }
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "sweep.json", j.dump(2) + "\n");
    write_text(fs::path(out_dir) / "config.txt", "# sweep over " + key + "\n" + to_text(base));
  }
  return rows;
}

namespace {

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) {
    std::ostringstream os;
    os << std::setprecision(17) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

std::string quote(const std::string& s, char sep) {
  if (s.find(sep) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string export_table(const std::string& dir, const std::string& format) {
  if (format != "csv" && format != "tsv") throw ConfigError("export: format must be csv or tsv");
  const char sep = format == "csv" ? ',' : '\t';
  const fs::path root(dir);
  std::vector<std::string> columns;
  std::vector<json> rows;
  fs::path out_path;

  if (fs::exists(root / "sweep.json")) {
    std::ifstream in(root / "sweep.json");
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ParseError(0, "corrupt sweep.json: " + std::string(e.what()));
    }
    if (!j.contains("rows") || !j["rows"].is_array()) throw ParseError(0, "sweep.json has no rows");
    columns = {"value", "runs", "mean_natural", "mean_worst", "median_natural", "median_worst"};
    for (const auto& r : j["rows"]) rows.push_back(r);
    out_path = root / ("sweep." + format);
  } else if (fs::exists(root / "metrics.jsonl")) {
    std::ifstream in(root / "metrics.jsonl");
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> keys;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const std::exception& e) {
        throw ParseError(lineno, "corrupt metrics.jsonl: " + std::string(e.what()));
      }
      if (!j.is_object() || !j.contains("step")) throw ParseError(lineno, "metrics record without a step");
      for (const auto& [k, _] : j.items()) {
        if (k != "step") keys.insert(k);
      }
      rows.push_back(std::move(j));
    }
    if (rows.empty()) throw ParseError(0, "metrics.jsonl in '" + dir + "' has no records");
    columns.push_back("step");
    columns.insert(columns.end(), keys.begin(), keys.end());
    out_path = root / ("metrics." + format);
  } else {
    throw ConfigError("export: '" + dir + "' has neither metrics.jsonl nor sweep.json");
  }

  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? std::string(1, sep) : "") << columns[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) os << sep;
      if (r.contains(columns[i])) os << quote(cell(r[columns[i]]), sep);
    }
    os << '\n';
  }
  write_text(out_path, os.str());
  return out_path.string();
}

}  // namespace wocar
