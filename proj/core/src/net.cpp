#include "wocar/net.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "wocar/error.hpp"

namespace wocar {

std::size_t NetSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) n += (layer_widths[l] + 1) * layer_widths[l + 1];
  return n;
}

std::size_t NetSpec::weight_offset(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t k = 0; k < l; ++k) off += (layer_widths[k] + 1) * layer_widths[k + 1];
  return off;
}

std::size_t NetSpec::bias_offset(std::size_t l) const {
  return weight_offset(l) + layer_widths[l] * layer_widths[l + 1];
}

void validate(const NetSpec& spec) {
  if (spec.layer_widths.size() < 2) throw InvalidArgument("NetSpec needs at least input and output widths");
  for (std::size_t w : spec.layer_widths) {
    if (w == 0) throw InvalidArgument("NetSpec widths must be positive");
  }
}

NetSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation act,
                 OutputHead head) {
  NetSpec spec;
  spec.layer_widths.push_back(in);
  spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(), hidden.end());
  spec.layer_widths.push_back(out);
  spec.activation = act;
  spec.head = head;
  validate(spec);
  return spec;
}

std::vector<LayerParams> unflatten(const NetSpec& spec, std::span<const double> params) {
  if (params.size() != spec.param_count()) throw InvalidArgument("unflatten: parameter count mismatch");
  std::vector<LayerParams> layers(spec.num_layers());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    auto& layer = layers[l];
    layer.in = spec.layer_widths[l];
    layer.out = spec.layer_widths[l + 1];
    const auto w = params.subspan(spec.weight_offset(l), layer.in * layer.out);
    const auto b = params.subspan(spec.bias_offset(l), layer.out);
    layer.weights.assign(w.begin(), w.end());
    layer.bias.assign(b.begin(), b.end());
  }
  return layers;
}

ParamVector flatten(const NetSpec& spec, const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.num_layers()) throw InvalidArgument("flatten: layer count mismatch");
  ParamVector out;
  out.reserve(spec.param_count());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.in != spec.layer_widths[l] || layer.out != spec.layer_widths[l + 1] ||
        layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      throw InvalidArgument("flatten: layer shape mismatch");
    }
    out.insert(out.end(), layer.weights.begin(), layer.weights.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
  }
  return x;
}

double activate_grad(Activation act, double pre) {
  switch (act) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

namespace {

void check_call(const NetSpec& spec, std::span<const double> params, std::span<const double> input) {
  if (params.size() != spec.param_count()) {
    throw InvalidArgument("network has " + std::to_string(params.size()) + " parameters, spec expects " +
                          std::to_string(spec.param_count()));
  }
  if (input.size() != spec.input_dim()) {
    throw InvalidArgument("network input has length " + std::to_string(input.size()) + ", expected " +
                          std::to_string(spec.input_dim()));
  }
}

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < y.size(); ++o) {
    const double* row = w.data() + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

}  // namespace

std::vector<double> forward(const NetSpec& spec, std::span<const double> params, std::span<const double> input) {
  check_call(spec, params, input);
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    next.resize(out);
    affine(params.subspan(spec.weight_offset(l), in * out), params.subspan(spec.bias_offset(l), out), cur, next);
    if (l + 1 < layers) {
      for (double& v : next) v = activate(spec.activation, v);
    }
    std::swap(cur, next);
  }
  return cur;
}

ForwardTrace trace_forward(const NetSpec& spec, std::span<const double> params, std::span<const double> input) {
  check_call(spec, params, input);
  ForwardTrace trace;
  const std::size_t layers = spec.num_layers();
  trace.post.reserve(layers + 1);
  trace.pre.reserve(layers);
  trace.post.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    std::vector<double> z(out);
    affine(params.subspan(spec.weight_offset(l), in * out), params.subspan(spec.bias_offset(l), out),
           trace.post.back(), z);
    std::vector<double> a = z;
    if (l + 1 < layers) {
      for (double& v : a) v = activate(spec.activation, v);
    }
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(a));
  }
  return trace;
}

void backward(const NetSpec& spec, std::span<const double> params, const ForwardTrace& trace,
              std::span<const double> upstream, std::span<double> param_grad, std::span<double> input_grad,
              double scale) {
  if (upstream.size() != spec.output_dim()) {
    throw InvalidArgument("backward: upstream has length " + std::to_string(upstream.size()) + ", expected " +
                          std::to_string(spec.output_dim()));
  }
  if (!param_grad.empty() && param_grad.size() != spec.param_count()) {
    throw InvalidArgument("backward: parameter gradient buffer has the wrong length");
  }
  if (!input_grad.empty() && input_grad.size() != spec.input_dim()) {
    throw InvalidArgument("backward: input gradient buffer has the wrong length");
  }
  std::vector<double> delta(upstream.begin(), upstream.end());
  for (double& d : delta) d *= scale;
  std::vector<double> below;
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    if (l + 1 < spec.num_layers()) {
      for (std::size_t o = 0; o < out; ++o) delta[o] *= activate_grad(spec.activation, trace.pre[l][o]);
    }
    const auto& x = trace.post[l];
    if (!param_grad.empty()) {
      double* gw = param_grad.data() + spec.weight_offset(l);
      double* gb = param_grad.data() + spec.bias_offset(l);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * x[i];
        gb[o] += d;
      }
    }
    if (l == 0 && input_grad.empty()) break;
    below.assign(in, 0.0);
    const double* w = params.data() + spec.weight_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) below[i] += d * row[i];
    }
    std::swap(delta, below);
  }
  if (!input_grad.empty()) {
    for (std::size_t i = 0; i < input_grad.size(); ++i) input_grad[i] += delta[i];
  }
}

GradVector grad_params(const NetSpec& spec, std::span<const double> params, std::span<const double> input,
                       std::span<const double> upstream) {
  const ForwardTrace trace = trace_forward(spec, params, input);
  GradVector g(spec.param_count(), 0.0);
  backward(spec, params, trace, upstream, g, {});
  return g;
}

std::vector<double> grad_input(const NetSpec& spec, std::span<const double> params, std::span<const double> input,
                               std::span<const double> upstream) {
  const ForwardTrace trace = trace_forward(spec, params, input);
  std::vector<double> g(spec.input_dim(), 0.0);
  backward(spec, params, trace, upstream, {}, g);
  return g;
}

ParamVector init_params(const NetSpec& spec, std::uint64_t seed, InitScheme scheme) {
  validate(spec);
  if (scheme == InitScheme::automatic) {
    scheme = spec.activation == Activation::relu ? InitScheme::he : InitScheme::xavier;
  }
  ParamVector params(spec.param_count(), 0.0);
  if (scheme == InitScheme::zeros) return params;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    const double stddev = scheme == InitScheme::he ? std::sqrt(2.0 / static_cast<double>(in))
                                                   : std::sqrt(2.0 / static_cast<double>(in + out));
    std::normal_distribution<double> draw(0.0, stddev);
    double* w = params.data() + spec.weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) w[i] = draw(rng);
  }
  return params;
}

Network::Network(NetSpec s, ParamVector p) : spec(std::move(s)), params(std::move(p)) {
  validate(spec);
  if (params.size() != spec.param_count()) throw InvalidArgument("Network: parameter count mismatch");
}

Network::Network(NetSpec s, std::uint64_t seed) : spec(std::move(s)) { params = init_params(spec, seed); }

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, const AdamConfig& config) {
  if (grad.size() != params.size()) throw InvalidArgument("adam_step: gradient and parameters differ in length");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw InvalidArgument("adam_step: optimizer state has the wrong length");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  const double norm = l2_norm(grad);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (double& g : grad) g *= k;
  }
  return norm;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

const char* head_name(OutputHead h) {
  switch (h) {
    case OutputHead::linear:
      return "linear";
    case OutputHead::gaussian_mean:
      return "gaussian-mean";
    case OutputHead::softmax_logits:
      return "softmax-logits";
  }
  return "linear";
}

}  // namespace

std::string spec_to_string(const NetSpec& spec) {
  std::ostringstream os;
  os << activation_name(spec.activation) << ' ' << head_name(spec.head);
  for (std::size_t w : spec.layer_widths) os << ' ' << w;
  return os.str();
}

NetSpec spec_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string act;
  std::string head;
  if (!(is >> act >> head)) throw InvalidArgument("malformed network spec line '" + text + "'");
  NetSpec spec;
  if (act == "relu") {
    spec.activation = Activation::relu;
  } else if (act == "tanh") {
    spec.activation = Activation::tanh;
  } else {
    throw InvalidArgument("unknown activation '" + act + "'");
  }
  if (head == "linear") {
    spec.head = OutputHead::linear;
  } else if (head == "gaussian-mean") {
    spec.head = OutputHead::gaussian_mean;
  } else if (head == "softmax-logits") {
    spec.head = OutputHead::softmax_logits;
  } else {
    throw InvalidArgument("unknown output head '" + head + "'");
  }
  std::size_t w = 0;
  while (is >> w) spec.layer_widths.push_back(w);
  if (!is.eof()) throw InvalidArgument("malformed layer widths in '" + text + "'");
  validate(spec);
  return spec;
}

void write_network(std::ostream& out, const std::string& name, const Network& net) {
  const auto old = out.precision(17);
  out << "NET " << name << '\n' << spec_to_string(net.spec) << '\n' << net.params.size() << '\n';
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    out << net.params[i] << ((i + 1) % 8 == 0 || i + 1 == net.params.size() ? '\n' : ' ');
  }
  out.precision(old);
}

bool read_network(std::istream& in, std::string& name, Network& net) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (!in) return false;
  std::istringstream header(line);
  std::string kw;
  if (!(header >> kw >> name) || kw != "NET") throw InvalidArgument("expected 'NET <name>', found '" + line + "'");
  if (!std::getline(in, line)) throw InvalidArgument("checkpoint truncated after NET header");
  NetSpec spec = spec_from_string(line);
  std::size_t count = 0;
  if (!(in >> count) || count != spec.param_count()) {
    throw InvalidArgument("checkpoint parameter count does not match spec for '" + name + "'");
  }
  ParamVector params(count);
  for (double& v : params) {
    if (!(in >> v)) throw InvalidArgument("checkpoint truncated in parameters of '" + name + "'");
  }
  net = Network(std::move(spec), std::move(params));
  return true;
}

}  // namespace wocar
