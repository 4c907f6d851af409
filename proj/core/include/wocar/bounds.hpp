#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wocar/net.hpp"

namespace wocar {

/// Per-output bounds of a network over an input region.
struct IntervalBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  bool contains(std::span<const double> y, double slack = 0.0) const;
};

/// Interval bound propagation over an arbitrary input box [lo, hi].
IntervalBounds ibp_box(const NetSpec& spec, std::span<const double> params, std::span<const double> lo,
                       std::span<const double> hi);

/// Interval bound propagation over the l_inf ball of radius eps around center.
/// Affine layers propagate (mid, radius) with |W| on the radius; activations
/// are monotone and are applied to both ends.
IntervalBounds ibp_bounds(const NetSpec& spec, std::span<const double> params, std::span<const double> center,
                          double eps);

using DiscreteAdvSet = std::vector<std::size_t>;

/// Action i is kept iff upper(i) > lower(j) for every j != i. The greedy
/// action at the center is always included.
DiscreteAdvSet adv_set_from_bounds(const IntervalBounds& bounds, std::size_t greedy);

DiscreteAdvSet adv_set_discrete(const NetSpec& spec, std::span<const double> params, std::span<const double> s,
                                double eps);

/// Exact admissible set when the perturbed observations are a finite list:
/// the distinct argmax actions over `candidates`, sorted.
DiscreteAdvSet adv_set_enumerated(const NetSpec& spec, std::span<const double> params,
                                  const std::vector<std::vector<double>>& candidates);

struct ContinuousAdvBox {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t dim() const { return low.size(); }
  bool contains(std::span<const double> a, double slack = 0.0) const;
  std::vector<double> midpoint() const;
};

/// IBP bounds of the mean output, optionally clipped to the action box.
ContinuousAdvBox adv_box_continuous(const NetSpec& spec, std::span<const double> params,
                                    std::span<const double> s, double eps,
                                    std::optional<std::span<const double>> act_low = std::nullopt,
                                    std::optional<std::span<const double>> act_high = std::nullopt);

struct BoxMinimum {
  std::vector<double> action;
  double value = 0.0;
};

/// Projected signed-gradient descent on a -> Q(s, a) over the box, started at the
/// midpoint. Q takes the concatenation [s, a] and returns one value.
/// step_size <= 0 selects 0.1 x box width per coordinate. Returns the best
/// iterate, so the value never exceeds the midpoint's.
BoxMinimum min_q_over_box(const NetSpec& q_spec, std::span<const double> q_params, std::span<const double> s,
                          const ContinuousAdvBox& box, int steps = 50, double step_size = 0.0);

/// Q(s, a) for a state-action critic.
double q_value(const NetSpec& q_spec, std::span<const double> q_params, std::span<const double> s,
               std::span<const double> a);

}  // namespace wocar
