#include "wocar/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wocar/error.hpp"

namespace wocar {

bool IntervalBounds::contains(std::span<const double> y, double slack) const {
  if (y.size() != lower.size()) return false;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < lower[i] - slack || y[i] > upper[i] + slack) return false;
  }
  return true;
}

namespace {

IntervalBounds propagate(const NetSpec& spec, std::span<const double> params, std::vector<double> mid,
                         std::vector<double> rad) {
  if (params.size() != spec.param_count()) throw InvalidArgument("ibp: parameter count mismatch");
  if (mid.size() != spec.input_dim()) throw InvalidArgument("ibp: input box has the wrong dimension");
  IntervalBounds b;
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    const double* w = params.data() + spec.weight_offset(l);
    const double* bias = params.data() + spec.bias_offset(l);
    b.lower.assign(out, 0.0);
    b.upper.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double m = bias[o];
      double r = 0.0;
      double magnitude = std::abs(bias[o]);
      for (std::size_t i = 0; i < in; ++i) {
        m += row[i] * mid[i];
        r += std::abs(row[i]) * rad[i];
        magnitude += std::abs(row[i]) * (std::abs(mid[i]) + rad[i]);
      }
      // Outward slack covering floating-point error of the dot products, so
      // sampled forward passes cannot land a rounding error outside.
      r += static_cast<double>(in + 2) * std::numeric_limits<double>::epsilon() * magnitude;
      b.lower[o] = m - r;
      b.upper[o] = m + r;
    }
    if (l + 1 < layers) {
      mid.resize(out);
      rad.resize(out);
      for (std::size_t o = 0; o < out; ++o) {
        const double lo_act = activate(spec.activation, b.lower[o]);
        const double hi_act = activate(spec.activation, b.upper[o]);
        mid[o] = 0.5 * (lo_act + hi_act);
        rad[o] = 0.5 * (hi_act - lo_act);
      }
    }
  }
  return b;
}

}  // namespace

IntervalBounds ibp_box(const NetSpec& spec, std::span<const double> params, std::span<const double> lo,
                       std::span<const double> hi) {
  if (lo.size() != hi.size()) throw InvalidArgument("ibp: input box ends differ in dimension");
  std::vector<double> mid(lo.size());
  std::vector<double> rad(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw InvalidArgument("ibp: input box has lo > hi");
    mid[i] = 0.5 * (lo[i] + hi[i]);
    rad[i] = 0.5 * (hi[i] - lo[i]);
  }
  return propagate(spec, params, std::move(mid), std::move(rad));
}

IntervalBounds ibp_bounds(const NetSpec& spec, std::span<const double> params, std::span<const double> center,
                          double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("ibp: eps must be non-negative");
  return propagate(spec, params, std::vector<double>(center.begin(), center.end()),
                   std::vector<double>(center.size(), eps));
}

DiscreteAdvSet adv_set_from_bounds(const IntervalBounds& bounds, std::size_t greedy) {
  DiscreteAdvSet out;
  const std::size_t n = bounds.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < n && keep; ++j) {
      if (j != i && !(bounds.upper[i] > bounds.lower[j])) keep = false;
    }
    if (keep || i == greedy) out.push_back(i);
  }
  return out;
}

DiscreteAdvSet adv_set_discrete(const NetSpec& spec, std::span<const double> params, std::span<const double> s,
                                double eps) {
  const auto clean = forward(spec, params, s);
  return adv_set_from_bounds(ibp_bounds(spec, params, s, eps), argmax(clean));
}

DiscreteAdvSet adv_set_enumerated(const NetSpec& spec, std::span<const double> params,
                                  const std::vector<std::vector<double>>& candidates) {
  DiscreteAdvSet out;
  for (const auto& c : candidates) out.push_back(argmax(forward(spec, params, c)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool ContinuousAdvBox::contains(std::span<const double> a, double slack) const {
  if (a.size() != low.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < low[i] - slack || a[i] > high[i] + slack) return false;
  }
  return true;
}

std::vector<double> ContinuousAdvBox::midpoint() const {
  std::vector<double> m(low.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (low[i] + high[i]);
  return m;
}

ContinuousAdvBox adv_box_continuous(const NetSpec& spec, std::span<const double> params, std::span<const double> s,
                                    double eps, std::optional<std::span<const double>> act_low,
                                    std::optional<std::span<const double>> act_high) {
  const IntervalBounds b = ibp_bounds(spec, params, s, eps);
  ContinuousAdvBox box{b.lower, b.upper};
  if (act_low && act_high) {
    if (act_low->size() != box.dim() || act_high->size() != box.dim()) {
      throw InvalidArgument("adv_box_continuous: action bounds have the wrong dimension");
    }
    for (std::size_t i = 0; i < box.dim(); ++i) {
      const double lo = (*act_low)[i];
      const double hi = (*act_high)[i];
      box.low[i] = std::clamp(box.low[i], lo, hi);
      box.high[i] = std::clamp(box.high[i], lo, hi);
    }
  }
  return box;
}

double q_value(const NetSpec& q_spec, std::span<const double> q_params, std::span<const double> s,
               std::span<const double> a) {
  std::vector<double> x(s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return forward(q_spec, q_params, x)[0];
}

BoxMinimum min_q_over_box(const NetSpec& q_spec, std::span<const double> q_params, std::span<const double> s,
                          const ContinuousAdvBox& box, int steps, double step_size) {
  if (steps < 1) throw InvalidArgument("min_q_over_box: steps must be at least 1");
  if (q_spec.output_dim() != 1 || q_spec.input_dim() != s.size() + box.dim()) {
    throw InvalidArgument("min_q_over_box: critic must map [s, a] to one value");
  }
  const std::size_t ds = s.size();
  const std::size_t da = box.dim();
  std::vector<double> x(s.begin(), s.end());
  const auto mid = box.midpoint();
  x.insert(x.end(), mid.begin(), mid.end());

  std::vector<double> step(da);
  for (std::size_t i = 0; i < da; ++i) {
    step[i] = step_size > 0.0 ? step_size : 0.1 * (box.high[i] - box.low[i]);
  }

  const double one = 1.0;
  BoxMinimum best{mid, forward(q_spec, q_params, x)[0]};
  std::vector<double> g(q_spec.input_dim());
  for (int k = 0; k < steps; ++k) {
    // Signed steps with a linearly shrinking length: reaches box faces in a
    // few iterations and settles on interior minima as the step decays.
    const double decay = static_cast<double>(steps - k) / static_cast<double>(steps);
    const ForwardTrace trace = trace_forward(q_spec, q_params, x);
    std::fill(g.begin(), g.end(), 0.0);
    backward(q_spec, q_params, trace, std::span<const double>(&one, 1), {}, g);
    bool moved = false;
    for (std::size_t i = 0; i < da; ++i) {
      const double gi = g[ds + i];
      const double dir = gi > 0.0 ? 1.0 : (gi < 0.0 ? -1.0 : 0.0);
      const double before = x[ds + i];
      x[ds + i] = std::clamp(before - decay * step[i] * dir, box.low[i], box.high[i]);
      moved = moved || x[ds + i] != before;
    }
    if (!moved) break;
    const double v = forward(q_spec, q_params, x)[0];
    if (v < best.value) {
      best.value = v;
      best.action.assign(x.begin() + static_cast<std::ptrdiff_t>(ds), x.end());
    }
  }
  return best;
}

}  // namespace wocar
