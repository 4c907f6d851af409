#pragma once

#include <cstdint>

namespace wocar {

/// Perturbation budget ramp: 0 until begin_frac of training, linear to
/// `target` at end_frac, then flat.
struct EpsSchedule {
  double target = 0.0;
  double begin_frac = 0.1;
  double end_frac = 0.6;

  double operator()(std::uint64_t t, std::uint64_t total) const;
};

enum class KappaShape { constant, linear, delayed_exponential };

/// Worst-case weight ramp.
///   constant: target throughout.
///   linear: 0 at t = 0 to target at t = total.
///   delayed_exponential: 0 for the first delay_frac, then
///     target * (1 - exp(-rate u)) / (1 - exp(-rate)) with u the fraction of
///     the remaining steps, so it reaches target exactly at t = total.
struct KappaSchedule {
  KappaShape shape = KappaShape::linear;
  double target = 0.0;
  double delay_frac = 1.0 / 3.0;
  double rate = 5.0;

  double operator()(std::uint64_t t, std::uint64_t total) const;
};

void validate(const EpsSchedule& s);
void validate(const KappaSchedule& s);

/// Exploration rate for epsilon-greedy: linear from start to end over
/// `frac` of training.
struct ExplorationSchedule {
  double start = 1.0;
  double end = 0.05;
  double frac = 0.3;

  double operator()(std::uint64_t t, std::uint64_t total) const;
};

}  // namespace wocar
