#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fairreg {

enum class ModelKind { Linear, Mlp1 };

/// Shape of a regressor: a plain linear model, or one relu hidden layer
/// followed by a linear readout. The output is an unbounded real in both
/// cases.
struct Architecture {
  ModelKind kind = ModelKind::Linear;
  std::size_t input_dim = 0;
  std::size_t hidden_width = 0;  // mlp1 only

  /// Throws ConfigError for zero input_dim or a widthless mlp1.
  void validate() const;
};

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

/// All weights of one model. Reconstructible bit-exactly from
/// (arch, init_seed) via init_params.
struct ModelParams {
  Architecture arch;
  std::uint64_t init_seed = 0;
  std::vector<double> hidden_w;  // H x d, row-major; empty for linear
  std::vector<double> hidden_b;  // H; empty for linear
  std::vector<double> out_w;     // d for linear, H for mlp1
  double out_b = 0.0;

  /// Throws ConfigError when a vector does not match the architecture.
  void validate() const;
};

/// Gradient accumulator shaped exactly like ModelParams.
struct Gradients {
  std::vector<double> hidden_w;
  std::vector<double> hidden_b;
  std::vector<double> out_w;
  double out_b = 0.0;
};

Gradients zero_gradients(const Architecture& arch);

/// One forward evaluation; `hidden` is the post-relu activation vector,
/// empty for the linear model.
struct ForwardTrace {
  double prediction = 0.0;
  std::vector<double> hidden;
};

/// Weights uniform in ±sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
/// Draw order is fixed: hidden matrix row-major first, then the output
/// weights, all from RandomEngine(seed), so a (arch, seed) pair pins every
/// bit of the result.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

ForwardTrace forward(const ModelParams& params, std::span<const double> x);

/// (yhat - y)^2.
double loss_sq(double yhat, double y);

/// Accumulates into *grads the gradient of
///   upstream * yhat(x)  +  upstream_hidden . hidden(x)
/// with respect to every parameter. The second term feeds gradients straight
/// into the hidden activations (used by the adversary's reversed signal) and
/// must be empty or length H; for a linear model it must be empty. relu
/// backpropagates 0 at exactly 0.
void backward_into(const ModelParams& params, std::span<const double> x, double upstream,
                   const ForwardTrace& trace, Gradients* grads,
                   std::span<const double> upstream_hidden = {});

/// Batch form: gradient of sum_i upstream_i * yhat(x_i). Recomputes each
/// forward internally.
Gradients backward(const ModelParams& params, const std::vector<std::vector<double>>& xs,
                   std::span<const double> upstream);

/// Versioned JSON document with shapes and full-precision weights.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace fairreg
