#include "ean/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ean/errors.hpp"

namespace ean::nn {

namespace {

double apply(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::identity:
      return z;
  }
  return z;
}

// Derivative expressed through the post-activation output.
double derivative_from_output(Activation a, double y) {
  switch (a) {
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return y * (1.0 - y);
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

// out = in * W^T + b, one row per sample. Accumulation order per output is
// b, then input index 0..n-1, independent of batch size.
void affine(const Matrix& weight, std::span<const double> bias, const Matrix& in, Matrix& out) {
  const std::size_t n_out = weight.rows;
  const std::size_t n_in = weight.cols;
  std::vector<double> wt(n_in * n_out);
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t i = 0; i < n_in; ++i) wt[i * n_out + o] = weight(o, i);

  out = Matrix(in.rows, n_out);
  for (std::size_t r = 0; r < in.rows; ++r) {
    double* y = out.data.data() + r * n_out;
    const double* x = in.data.data() + r * n_in;
    std::copy(bias.begin(), bias.end(), y);
    for (std::size_t i = 0; i < n_in; ++i) {
      const double xi = x[i];
      const double* w = wt.data() + i * n_out;
      for (std::size_t o = 0; o < n_out; ++o) y[o] += xi * w[o];
    }
  }
}

void require_finite(const GradientBundle& g) {
  if (!g.all_finite()) throw NumericError("optimizer_step: non-finite gradient");
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity") return Activation::identity;
  throw Error("unknown activation '" + std::string(name) + "'");
}

Matrix Matrix::from_row(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].data.size() + biases[l].size();
  return n;
}

GradientBundle GradientBundle::zeros_like(const MlpParams& params) {
  GradientBundle g;
  g.weights.reserve(params.weights.size());
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

void GradientBundle::set_zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void GradientBundle::add_scaled(const GradientBundle& other, double s) {
  if (other.weights.size() != weights.size()) throw ShapeError("GradientBundle::add_scaled: layer count");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (other.weights[l].data.size() != weights[l].data.size() || other.biases[l].size() != biases[l].size())
      throw ShapeError("GradientBundle::add_scaled: layer shape");
    for (std::size_t k = 0; k < weights[l].data.size(); ++k) weights[l].data[k] += s * other.weights[l].data[k];
    for (std::size_t k = 0; k < biases[l].size(); ++k) biases[l][k] += s * other.biases[l][k];
  }
}

void GradientBundle::scale(double factor) {
  for (auto& w : weights)
    for (auto& v : w.data) v *= factor;
  for (auto& b : biases)
    for (auto& v : b) v *= factor;
}

bool GradientBundle::all_zero() const {
  auto zero = [](double v) { return v == 0.0; };
  for (const auto& w : weights)
    if (!std::all_of(w.data.begin(), w.data.end(), zero)) return false;
  for (const auto& b : biases)
    if (!std::all_of(b.begin(), b.end(), zero)) return false;
  return true;
}

bool GradientBundle::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (const auto& w : weights)
    if (!std::all_of(w.data.begin(), w.data.end(), finite)) return false;
  for (const auto& b : biases)
    if (!std::all_of(b.begin(), b.end(), finite)) return false;
  return true;
}

MlpParams make_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations) {
  if (layer_dims.size() < 2) throw ShapeError("make_mlp: need at least an input and an output width");
  if (activations.size() != layer_dims.size() - 1)
    throw ShapeError("make_mlp: one activation per layer required");
  MlpParams p;
  p.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  p.activations.assign(activations.begin(), activations.end());
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    if (layer_dims[l] == 0 || layer_dims[l + 1] == 0) throw ShapeError("make_mlp: zero layer width");
    p.weights.emplace_back(layer_dims[l + 1], layer_dims[l]);
    p.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  return p;
}

MlpParams make_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations,
                   Rng& rng) {
  MlpParams p = make_mlp(layer_dims, activations);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
    for (auto& w : p.weights[l].data) w = rng.uniform(-bound, bound);
    for (auto& b : p.biases[l]) b = rng.uniform(-bound, bound);
  }
  return p;
}

void validate(const MlpParams& p) {
  if (p.layer_dims.size() < 2) throw ShapeError("MlpParams: fewer than two layer widths");
  const std::size_t layers = p.layer_dims.size() - 1;
  if (p.weights.size() != layers || p.biases.size() != layers || p.activations.size() != layers)
    throw ShapeError("MlpParams: per-layer vectors disagree with layer_dims");
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = p.weights[l];
    if (w.rows != p.layer_dims[l + 1] || w.cols != p.layer_dims[l] || w.data.size() != w.rows * w.cols)
      throw ShapeError("MlpParams: weight " + std::to_string(l) + " has the wrong shape");
    if (p.biases[l].size() != p.layer_dims[l + 1])
      throw ShapeError("MlpParams: bias " + std::to_string(l) + " has the wrong length");
    for (double v : w.data)
      if (!std::isfinite(v)) throw NumericError("MlpParams: non-finite weight");
    for (double v : p.biases[l])
      if (!std::isfinite(v)) throw NumericError("MlpParams: non-finite bias");
  }
}

void check_congruent(const MlpParams& p, const GradientBundle& g) {
  if (g.weights.size() != p.weights.size() || g.biases.size() != p.biases.size())
    throw ShapeError("GradientBundle: layer count differs from parameters");
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (g.weights[l].rows != p.weights[l].rows || g.weights[l].cols != p.weights[l].cols ||
        g.weights[l].data.size() != p.weights[l].data.size() || g.biases[l].size() != p.biases[l].size())
      throw ShapeError("GradientBundle: layer " + std::to_string(l) + " shape differs from parameters");
  }
}

Matrix mlp_forward(const MlpParams& params, const Matrix& input, ForwardTrace* trace) {
  if (input.cols != params.input_dim())
    throw ShapeError("mlp_forward: input width " + std::to_string(input.cols) + ", expected " +
                     std::to_string(params.input_dim()));
  if (trace) {
    trace->layers.clear();
    trace->layers.reserve(params.num_layers() + 1);
    trace->layers.push_back(input);
  }
  Matrix current = input;
  Matrix next;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    affine(params.weights[l], params.biases[l], current, next);
    const Activation act = params.activations[l];
    if (act != Activation::identity)
      for (double& v : next.data) v = apply(act, v);
    std::swap(current, next);
    if (trace) trace->layers.push_back(current);
  }
  return current;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input) {
  return mlp_forward(params, Matrix::from_row(input)).data;
}

Matrix mlp_backward(const MlpParams& params, const ForwardTrace& trace, const Matrix& upstream,
                    GradientBundle& grads) {
  const std::size_t layers = params.num_layers();
  if (trace.layers.size() != layers + 1) throw ShapeError("mlp_backward: trace does not match parameters");
  const Matrix& output = trace.layers.back();
  if (upstream.rows != output.rows || upstream.cols != output.cols)
    throw ShapeError("mlp_backward: upstream gradient shape differs from output shape");
  check_congruent(params, grads);

  Matrix delta = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& out = trace.layers[l + 1];
    const Matrix& in = trace.layers[l];
    const Activation act = params.activations[l];
    if (act != Activation::identity)
      for (std::size_t k = 0; k < delta.data.size(); ++k) delta.data[k] *= derivative_from_output(act, out.data[k]);

    const Matrix& w = params.weights[l];
    Matrix& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    Matrix d_in(in.rows, in.cols);
    for (std::size_t r = 0; r < delta.rows; ++r) {
      const double* d = delta.data.data() + r * delta.cols;
      const double* x = in.data.data() + r * in.cols;
      double* dx = d_in.data.data() + r * in.cols;
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double g = d[o];
        if (g == 0.0) continue;
        gb[o] += g;
        double* gw_row = gw.data.data() + o * w.cols;
        const double* w_row = w.data.data() + o * w.cols;
        for (std::size_t i = 0; i < w.cols; ++i) {
          gw_row[i] += g * x[i];
          dx[i] += g * w_row[i];
        }
      }
    }
    delta = std::move(d_in);
  }
  return delta;
}

GradientBundle mlp_backward(const MlpParams& params, std::span<const double> input,
                            std::span<const double> upstream) {
  if (upstream.size() != params.output_dim())
    throw ShapeError("mlp_backward: upstream length " + std::to_string(upstream.size()) + ", expected " +
                     std::to_string(params.output_dim()));
  ForwardTrace trace;
  mlp_forward(params, Matrix::from_row(input), &trace);
  GradientBundle grads = GradientBundle::zeros_like(params);
  mlp_backward(params, trace, Matrix::from_row(upstream), grads);
  return grads;
}

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::adam;
  s.learning_rate = learning_rate;
  return s;
}

void optimizer_step(MlpParams& params, const GradientBundle& grads, OptimizerState& state, Direction direction) {
  check_congruent(params, grads);
  require_finite(grads);
  if (!(state.learning_rate > 0.0) || !std::isfinite(state.learning_rate))
    throw NumericError("optimizer_step: learning rate must be positive and finite");
  const double sign = direction == Direction::ascend ? 1.0 : -1.0;
  const double lr = state.learning_rate;

  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      auto& w = params.weights[l].data;
      const auto& g = grads.weights[l].data;
      for (std::size_t k = 0; k < w.size(); ++k)
        if (g[k] != 0.0) w[k] += sign * lr * g[k];
      auto& b = params.biases[l];
      const auto& gb = grads.biases[l];
      for (std::size_t k = 0; k < b.size(); ++k)
        if (gb[k] != 0.0) b[k] += sign * lr * gb[k];
    }
    ++state.step;
    return;
  }

  if (state.moments.first.weights.empty()) {
    state.moments.first = GradientBundle::zeros_like(params);
    state.moments.second = GradientBundle::zeros_like(params);
  }
  check_congruent(params, state.moments.first);
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](double& p, double g, double& m, double& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    if (m == 0.0) return;  // untouched parameters stay bitwise identical
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p += sign * lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    auto& w = params.weights[l].data;
    const auto& g = grads.weights[l].data;
    auto& m = state.moments.first.weights[l].data;
    auto& v = state.moments.second.weights[l].data;
    for (std::size_t k = 0; k < w.size(); ++k) update(w[k], g[k], m[k], v[k]);
    auto& b = params.biases[l];
    const auto& gb = grads.biases[l];
    auto& mb = state.moments.first.biases[l];
    auto& vb = state.moments.second.biases[l];
    for (std::size_t k = 0; k < b.size(); ++k) update(b[k], gb[k], mb[k], vb[k]);
  }
}

}  // namespace ean::nn
