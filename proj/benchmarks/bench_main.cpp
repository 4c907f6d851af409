#include <benchmark/benchmark.h>

#include <random>

#include "wocar/attacks.hpp"
#include "wocar/bounds.hpp"
#include "wocar/mdp.hpp"
#include "wocar/net.hpp"
#include "wocar/worst_attack.hpp"

using namespace wocar;

namespace {

DeterministicPolicy first_action_policy(const TabularMDP& m) {
  DeterministicPolicy pi;
  for (StateId s = 0; s < m.n_states; ++s) pi.action_of.push_back(s % m.n_actions);
  return pi;
}

void BM_WorstAttackBackup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TabularMDP m = random_mdp(n, 4, 0.95, 1);
  const TabularPerturbation pert = random_perturbation(m, 5, 1);
  const auto pi = first_action_policy(m);
  QTable q(n, 4, 1.0);
  for (auto _ : state) {
    q = worst_attack_backup(q, m, pi, pert);
    benchmark::DoNotOptimize(q.values.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WorstAttackBackup)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_WorstAttackFixedPoint(benchmark::State& state) {
  const GridWorld w = build_gohome(gohome_5x5());
  const DeterministicPolicy pi = greedy_policy(optimal_q(w.mdp));
  for (auto _ : state) benchmark::DoNotOptimize(worst_attack_fixed_point(w.mdp, pi, w.perturb));
}
BENCHMARK(BM_WorstAttackFixedPoint);

void BM_ExactWorstGoHome(benchmark::State& state) {
  const GridWorld w = build_gohome(gohome_5x5());
  const DeterministicPolicy pi = greedy_policy(optimal_q(w.mdp));
  for (auto _ : state) benchmark::DoNotOptimize(exact_worst_value(w.mdp, pi, w.perturb));
}
BENCHMARK(BM_ExactWorstGoHome);

void BM_IbpBounds(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Network net(mlp_spec(8, {width, width}, 4), 3);
  const std::vector<double> c(8, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(ibp_bounds(net.spec, net.params, c, 0.05));
}
BENCHMARK(BM_IbpBounds)->Arg(16)->Arg(64)->Arg(128);

void BM_Forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const Network net(mlp_spec(8, {width, width}, 4), 3);
  const std::vector<double> c(8, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(net(c));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(128);

void BM_Pgd10(benchmark::State& state) {
  const Network net(mlp_spec(8, {64, 64}, 4), 3);
  const std::vector<double> s(8, 0.1);
  std::mt19937_64 rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(attack_pgd(Victim{&net, true}, s, 0.1, 10, rng));
}
BENCHMARK(BM_Pgd10);

}  // namespace

BENCHMARK_MAIN();
