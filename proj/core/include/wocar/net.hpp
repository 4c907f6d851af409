#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wocar {

enum class Activation { relu, tanh };

/// How callers interpret the last layer. The network itself is always affine
/// at the output; softmax is applied by callers for `softmax_logits`.
enum class OutputHead { linear, gaussian_mean, softmax_logits };

/// Fully connected network shape. `layer_widths` lists the input width, any
/// hidden widths, and the output width, so {4, 2} is a single affine map.
struct NetSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::relu;
  OutputHead head = OutputHead::linear;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t output_dim() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t param_count() const;
  /// Offset of layer l's weight matrix (row-major, out x in) in the flat vector.
  std::size_t weight_offset(std::size_t l) const;
  std::size_t bias_offset(std::size_t l) const;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

void validate(const NetSpec& spec);

NetSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                 Activation act = Activation::relu, OutputHead head = OutputHead::linear);

using ParamVector = std::vector<double>;
using GradVector = std::vector<double>;

struct LayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> bias;
};

std::vector<LayerParams> unflatten(const NetSpec& spec, std::span<const double> params);
ParamVector flatten(const NetSpec& spec, const std::vector<LayerParams>& layers);

double activate(Activation act, double x);
double activate_grad(Activation act, double pre);

std::vector<double> forward(const NetSpec& spec, std::span<const double> params,
                            std::span<const double> input);

/// Intermediate values kept for a backward pass.
struct ForwardTrace {
  std::vector<std::vector<double>> post;  // post[0] is the input, post.back() the output
  std::vector<std::vector<double>> pre;   // pre-activations of each layer

  const std::vector<double>& output() const { return post.back(); }
};

ForwardTrace trace_forward(const NetSpec& spec, std::span<const double> params,
                           std::span<const double> input);

/// Reverse pass of <upstream, f(x)>. Adds scale * d/dparams into `param_grad`
/// and scale * d/dinput into `input_grad`; either span may be empty to skip it.
void backward(const NetSpec& spec, std::span<const double> params, const ForwardTrace& trace,
              std::span<const double> upstream, std::span<double> param_grad,
              std::span<double> input_grad, double scale = 1.0);

GradVector grad_params(const NetSpec& spec, std::span<const double> params,
                       std::span<const double> input, std::span<const double> upstream);

std::vector<double> grad_input(const NetSpec& spec, std::span<const double> params,
                               std::span<const double> input, std::span<const double> upstream);

enum class InitScheme { automatic, he, xavier, zeros };

/// He init for relu nets, Xavier (Glorot normal) for tanh nets, zero biases.
ParamVector init_params(const NetSpec& spec, std::uint64_t seed,
                        InitScheme scheme = InitScheme::automatic);

/// A network shape and its parameters.
struct Network {
  NetSpec spec;
  ParamVector params;

  Network() = default;
  Network(NetSpec s, ParamVector p);
  Network(NetSpec s, std::uint64_t seed);

  std::vector<double> operator()(std::span<const double> x) const { return forward(spec, params, x); }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const AdamConfig& config);

/// Rescales `grad` so its Euclidean norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

double l2_norm(std::span<const double> v);

/// Row-wise softmax of logits.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest entry, lowest index among ties.
std::size_t argmax(std::span<const double> v);

// Checkpoint text format: "NET <name>", a spec line, then the parameter
// count followed by the values at 17 significant digits.
void write_network(std::ostream& out, const std::string& name, const Network& net);
/// Reads one NET block; returns false at clean end of input.
bool read_network(std::istream& in, std::string& name, Network& net);
std::string spec_to_string(const NetSpec& spec);
NetSpec spec_from_string(const std::string& text);

}  // namespace wocar
