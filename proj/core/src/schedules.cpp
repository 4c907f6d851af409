#include "wocar/schedules.hpp"

#include <algorithm>
#include <cmath>

#include "wocar/error.hpp"

namespace wocar {

namespace {

double progress(std::uint64_t t, std::uint64_t total) {
  if (total == 0) return 1.0;
  return std::min(1.0, static_cast<double>(t) / static_cast<double>(total));
}

}  // namespace

double EpsSchedule::operator()(std::uint64_t t, std::uint64_t total) const {
  const double p = progress(t, total);
  if (p < begin_frac) return 0.0;
  if (p >= end_frac) return target;
  return target * (p - begin_frac) / (end_frac - begin_frac);
}

double KappaSchedule::operator()(std::uint64_t t, std::uint64_t total) const {
  const double p = progress(t, total);
  switch (shape) {
    case KappaShape::constant:
      return target;
    case KappaShape::linear:
      return target * p;
    case KappaShape::delayed_exponential: {
      if (p <= delay_frac) return 0.0;
      if (delay_frac >= 1.0) return 0.0;
      const double u = (p - delay_frac) / (1.0 - delay_frac);
      return target * (1.0 - std::exp(-rate * u)) / (1.0 - std::exp(-rate));
    }
  }
  return target;
}

double ExplorationSchedule::operator()(std::uint64_t t, std::uint64_t total) const {
  const double p = progress(t, total);
  if (frac <= 0.0 || p >= frac) return end;
  return start + (end - start) * p / frac;
}

void validate(const EpsSchedule& s) {
  if (!(s.target >= 0.0)) throw InvalidArgument("eps schedule: target must be non-negative");
  if (!(s.begin_frac >= 0.0 && s.begin_frac < s.end_frac && s.end_frac <= 1.0)) {
    throw InvalidArgument("eps schedule: need 0 <= begin_frac < end_frac <= 1");
  }
}

void validate(const KappaSchedule& s) {
  if (!(s.target >= 0.0) || !std::isfinite(s.target)) throw InvalidArgument("kappa schedule: target must be non-negative");
  if (!(s.delay_frac >= 0.0 && s.delay_frac < 1.0)) throw InvalidArgument("kappa schedule: delay_frac must lie in [0, 1)");
  if (!(s.rate > 0.0)) throw InvalidArgument("kappa schedule: rate must be positive");
}

}  // namespace wocar
