#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wocar/config.hpp"
#include "wocar/error.hpp"
#include "wocar/experiment.hpp"
#include "wocar/mdp.hpp"

using namespace wocar;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wocar_unit_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny(const std::string& out) {
  return make_run_config({{"algo", "wocar-dqn"},
                          {"env", "chain2"},
                          {"seed", "3"},
                          {"out", out},
                          {"train.total_steps", "1500"},
                          {"train.learning_starts", "100"},
                          {"train.log_every", "500"},
                          {"net.hidden", "8"},
                          {"eval.attacks", "none,random"},
                          {"eval.episodes", "3"}});
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WOCAR_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text parsing") {
  const auto e = parse_config_text("# comment\nalgo = dqn\n\nenv=chain2  # trailing\n");
  CHECK(e.at("algo") == "dqn");
  CHECK(e.at("env") == "chain2");
  CHECK_THROWS_AS(parse_config_text("algo=dqn\nalgo=ppo\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("algo dqn\n"), ConfigError);
  try {
    parse_config_text("seed=1\n\nbroken line\n");
    FAIL("expected an error");
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("config validation names the offending key") {
  CHECK_THROWS_AS(make_run_config({{"train.nonsense", "1"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"algo", "sarsa"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"train.total_steps", "0"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"train.total_steps", "ten"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"eval.attacks", "fgsm"}}), ConfigError);
  CHECK_THROWS_AS(make_run_config({{"sched.kappa_wst_target", "-1"}}), ConfigError);
  try {
    make_run_config({{"train.batch_size", "x"}});
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("train.batch_size") != std::string::npos);
  }
  RunConfig c = make_run_config({{"algo", "wocar-ppo"}, {"sched.kappa_wst_target", "0.4"}});
  CHECK(c.ppo.kappa_wst.target == 0.4);
  set_key(c, "train.epochs", "7");
  CHECK(c.ppo.epochs == 7);
  CHECK(make_run_config(parse_config_text(to_text(c))).entries == c.entries);
  // an unknown environment only surfaces when the run starts
  RunConfig bad = make_run_config({{"env", "nowhere"}, {"train.total_steps", "10"}});
  CHECK_THROWS_AS(run_experiment(bad, false), ConfigError);
}

TEST_CASE("runs are deterministic and self-describing") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const RunOutcome ra = run_experiment(tiny(a.string()));
  run_experiment(tiny(b.string()));
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
  CHECK(fs::exists(a / "config.txt"));
  CHECK(fs::exists(a / "final.agent"));
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  std::vector<std::string> keys;
  for (const auto& [k, _] : summary["attacks"].items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"none", "random"});
  CHECK(summary["version_hash"] == version_hash());
  CHECK(summary["seed"] == 3);
  CHECK(ra.metrics.size() == 3);
  std::uint64_t prev = 0;
  for (const auto& m : ra.metrics) {
    CHECK(m.step > prev);
    prev = m.step;
  }
}

TEST_CASE("export round trip") {
  const fs::path dir = scratch("run_export");
  run_experiment(tiny(dir.string()));
  const std::string path = export_table(dir.string(), "csv");
  const std::string first = slurp(path);
  CHECK(export_table(dir.string(), "csv") == path);
  CHECK(slurp(path) == first);

  std::vector<nlohmann::json> records;
  {
    std::ifstream in(dir / "metrics.jsonl");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) records.push_back(nlohmann::json::parse(line));
  }
  std::istringstream csv(first);
  std::string line;
  std::getline(csv, line);
  const auto header = split(line, ',');
  CHECK(header.front() == "step");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    const auto cells = split(line, ',');
    REQUIRE(cells.size() == header.size());
    const auto& rec = records.at(rows);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (!rec.contains(header[i])) {
        CHECK(cells[i].empty());
      } else if (rec[header[i]].is_number()) {
        CHECK(std::stod(cells[i]) == rec[header[i]].get<double>());
      }
    }
    ++rows;
  }
  CHECK(rows == records.size());

  const fs::path empty = scratch("empty");
  fs::create_directories(empty);
  CHECK_THROWS_AS(export_table(empty.string(), "csv"), ConfigError);
  std::ofstream(empty / "metrics.jsonl") << "{not json\n";
  CHECK_THROWS_AS(export_table(empty.string(), "csv"), ParseError);
  CHECK_THROWS_AS(export_table(dir.string(), "xlsx"), ConfigError);
}

TEST_CASE("sweep aggregation") {
  RunSummary s1, s2, s3, s4;
  s1.natural_return = 1.0, s1.worst_case_return = -1.0;
  s2.natural_return = 3.0, s2.worst_case_return = 0.0;
  s3.natural_return = 8.0, s3.worst_case_return = 2.0;
  s4.natural_return = 2.0, s4.worst_case_return = 5.0;
  const auto rows = aggregate_sweep({"a", "b"}, {{s1, s2, s3}, {s4}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].value == "a");
  CHECK(rows[0].runs == 3);
  CHECK(rows[0].mean_natural == doctest::Approx(4.0));
  CHECK(rows[0].median_natural == 3.0);
  CHECK(rows[0].mean_worst == doctest::Approx(1.0 / 3.0));
  CHECK(rows[0].median_worst == 0.0);
  CHECK(rows[1].median_worst == 5.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);

  const fs::path dir = scratch("sweep");
  RunConfig base = tiny("unused");
  const auto single = run_sweep(base, "train.kappa_reg", {"0.1"}, {3}, dir.string());
  RunConfig same = tiny((dir / "direct").string());
  set_key(same, "train.kappa_reg", "0.1");
  const RunOutcome direct = run_experiment(same, false);
  REQUIRE(single.size() == 1);
  CHECK(single[0].mean_natural == direct.summary.natural_return);
  CHECK(single[0].mean_worst == direct.summary.worst_case_return);
  CHECK(fs::exists(dir / "sweep.json"));
  CHECK(fs::exists(dir / "train.kappa_reg=0.1" / "seed_3" / "summary.json"));
  const std::string table = slurp(export_table(dir.string(), "tsv"));
  CHECK(table.rfind("value\truns\tmean_natural", 0) == 0);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const std::string run = (dir / "run").string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train --algo wocar-dqn --env chain2 --out " + run + " --set train.bogus=1") == 2);
  CHECK(run_cli("train --algo wocar-dqn --env nowhere --out " + run) == 2);
  CHECK(run_cli("train --algo dqn --env chain2 --out " + run +
                " --set train.total_steps=800 --set train.learning_starts=100 --set net.hidden=8") == 0);
  CHECK(run_cli("eval --ckpt " + run + "/final.agent --env chain2 --episodes 5") == 0);
  CHECK(run_cli("attack --ckpt " + run + "/final.agent --env chain2 --attack pgd --eps 1 --episodes 5") == 0);
  CHECK(fs::exists(fs::path(run) / "attacks.jsonl"));
  CHECK(run_cli("attack --ckpt " + run + "/final.agent --env chain2 --attack pgd --eps -1") == 2);
  CHECK(run_cli("bounds-check --net " + run + "/final.agent --eps 0.1 --samples 200") == 0);
  CHECK(run_cli("export --dir " + run + " --format csv") == 0);

  const Chain2 c = chain2();
  save_mdp((dir / "chain2.mdp").string(), c.mdp, c.perturb);
  save_policy((dir / "chain2.policy").string(), c.policy);
  CHECK(run_cli("oracle --mdp " + (dir / "chain2.mdp").string() + " --policy " + (dir / "chain2.policy").string()) == 0);
  std::ofstream(dir / "broken.mdp") << "MDP 2 1 0.5\nT 0 0 0.3 0.3\n";
  CHECK(run_cli("oracle --mdp " + (dir / "broken.mdp").string() + " --policy " + (dir / "chain2.policy").string()) == 2);

  CHECK(run_cli("train --algo wocar-dqn --env chain2 --out " + (dir / "nan").string() +
                " --set train.total_steps=600 --set train.learning_starts=100 --set train.lr=1e150"
                " --set train.grad_clip=1e300 --set eval.attacks=none") == 3);
}
