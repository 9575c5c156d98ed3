#pragma once

// Dense-network math shared by the controller, the curiosity networks and
// the toy supernet: batched forward passes, exact backpropagation, and
// SGD/Adam steps. Everything is 64-bit and single-threaded per parameter set.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ean/rng.hpp"

namespace ean::nn {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, identity = 2 };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix from_row(std::span<const double> v);

  bool operator==(const Matrix&) const = default;
};

/// Weights and biases of a fully connected network.
///
/// `weights[i]` is (layer_dims[i+1] x layer_dims[i]); layer i computes
/// activations[i](weights[i] * x + biases[i]).
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<Activation> activations;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t parameter_count() const;

  bool operator==(const MlpParams&) const = default;
};

/// Partial derivatives of a scalar objective, shape-congruent with MlpParams.
struct GradientBundle {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static GradientBundle zeros_like(const MlpParams& params);
  void set_zero();
  void add_scaled(const GradientBundle& other, double scale);
  void scale(double factor);
  bool all_zero() const;
  bool all_finite() const;

  bool operator==(const GradientBundle&) const = default;
};

/// Zero-filled parameters of the given shape.
MlpParams make_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations);

/// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for weights and biases.
MlpParams make_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations,
                   Rng& rng);

/// Throws ShapeError / NumericError when the invariants do not hold.
void validate(const MlpParams& params);
void check_congruent(const MlpParams& params, const GradientBundle& grads);

/// Post-activation outputs of every layer, with `layers[0]` the input.
struct ForwardTrace {
  std::vector<Matrix> layers;
};

/// Batched forward pass; each row of `input` is one sample.
Matrix mlp_forward(const MlpParams& params, const Matrix& input, ForwardTrace* trace = nullptr);
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input);

/// Backpropagates `upstream` (d objective / d output, one row per sample)
/// through a recorded forward pass. Parameter gradients are accumulated into
/// `grads`; the return value is d objective / d input.
Matrix mlp_backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& upstream,
                    GradientBundle& grads);

/// Gradient of dot(upstream, mlp_forward(params, input)) w.r.t. every parameter.
GradientBundle mlp_backward(const MlpParams& params, std::span<const double> input,
                            std::span<const double> upstream);

enum class OptimizerKind : std::uint8_t { sgd, adam };
enum class Direction : std::uint8_t { ascend, descend };

struct AdamMoments {
  GradientBundle first;
  GradientBundle second;

  bool operator==(const AdamMoments&) const = default;
};

/// Learning rate and optional Adam moments for one parameter set.
/// Adam defaults: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  AdamMoments moments;  // empty until the first Adam step

  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate);

  bool operator==(const OptimizerState&) const = default;
};

/// One in-place optimizer step. SGD applies params +/- lr * grads exactly.
/// Rejects non-finite gradients with NumericError before touching anything.
void optimizer_step(MlpParams& params, const GradientBundle& grads, OptimizerState& state,
                    Direction direction);

}  // namespace ean::nn
