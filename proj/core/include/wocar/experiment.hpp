#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wocar/agent.hpp"
#include "wocar/config.hpp"
#include "wocar/eval.hpp"

namespace wocar {

/// Identifier of this build, persisted in every run directory.
std::string version_string();
/// FNV-1a hash of version_string(), as 16 hex digits.
std::string version_hash();

struct RunSummary {
  std::uint64_t steps = 0;
  double natural_return = 0.0;
  double worst_case_return = 0.0;
  std::map<std::string, double> attack_returns;  // one entry per configured attack
  std::optional<double> exact_natural;
  std::optional<double> exact_worst;
  double wall_time_s = 0.0;
};

struct RunOutcome {
  std::string dir;
  Agent agent;
  std::vector<MetricsRecord> metrics;
  RunSummary summary;
};

/// Exact natural and worst-case start values of a discrete agent's greedy
/// tabular policy, the latter at perturbation budget eps.
std::pair<double, double> exact_tabular_values(const Agent& agent, const TabularEnv& env, double eps);

/// Trains per config and evaluates periodically. When `write` is set the run
/// directory config.out receives config.txt, metrics.jsonl, checkpoints under
/// ckpt/, final.agent and summary.json.
RunOutcome run_experiment(const RunConfig& config, bool write = true);

struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  double mean_natural = 0.0;
  double mean_worst = 0.0;
  double median_natural = 0.0;
  double median_worst = 0.0;
};

/// Runs every (value, seed) pair with `key` overridden, each in
/// out_dir/<key>=<value>/seed_<seed>, using up to `threads` workers, and
/// writes out_dir/sweep.json. Rows follow the order of `values`.
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& key, const std::vector<std::string>& values,
                                const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                                unsigned threads = 1, bool write = true);

/// Aggregates per-run summaries by value. Medians of even counts average
/// the two middle entries.
std::vector<SweepRow> aggregate_sweep(const std::vector<std::string>& values,
                                      const std::vector<std::vector<RunSummary>>& runs);

/// Writes the metrics of a run directory (metrics.<fmt>) or the rows of a
/// sweep directory (sweep.<fmt>) as a flat table; format is csv or tsv.
/// Returns the written path.
std::string export_table(const std::string& dir, const std::string& format);

double median(std::vector<double> v);

}  // namespace wocar
