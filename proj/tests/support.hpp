#pragma once

// Helpers shared by the test binaries: independent reference computations
// and finite-difference utilities. Nothing here calls into the library's
// forward or backward code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ean/nn.hpp"
#include "ean/rng.hpp"

namespace ean::test {

inline double act(nn::Activation a, double z) {
  switch (a) {
    case nn::Activation::relu: return z > 0.0 ? z : 0.0;
    case nn::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case nn::Activation::identity: return z;
  }
  return z;
}

/// Straight matrix-vector forward pass.
inline std::vector<double> reference_forward(const nn::MlpParams& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    std::vector<double> y(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double s = p.biases[l][r];
      for (std::size_t c = 0; c < w.cols; ++c) s += w.data[r * w.cols + c] * x[c];
      y[r] = act(p.activations[l], s);
    }
    x = std::move(y);
  }
  return x;
}

/// Pointers to every scalar parameter, weights before biases per layer.
inline std::vector<double*> parameter_slots(nn::MlpParams& p) {
  std::vector<double*> out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (double& v : p.weights[l].data) out.push_back(&v);
    for (double& v : p.biases[l]) out.push_back(&v);
  }
  return out;
}

inline std::vector<double> flatten(const nn::GradientBundle& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    out.insert(out.end(), g.weights[l].data.begin(), g.weights[l].data.end());
    out.insert(out.end(), g.biases[l].begin(), g.biases[l].end());
  }
  return out;
}

/// Central differences of `objective` over every parameter of `p`.
inline std::vector<double> finite_difference(nn::MlpParams& p, const std::function<double()>& objective,
                                             double step = 1e-6) {
  std::vector<double> out;
  for (double* slot : parameter_slots(p)) {
    const double saved = *slot;
    *slot = saved + step;
    const double up = objective();
    *slot = saved - step;
    const double down = objective();
    *slot = saved;
    out.push_back((up - down) / (2.0 * step));
  }
  return out;
}

/// ||a - b|| / max(||a|| + ||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), floor);
}

/// Fills every parameter with U(lo, hi).
inline void randomize(nn::MlpParams& p, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double* slot : parameter_slots(p)) *slot = rng.uniform(lo, hi);
}

}  // namespace ean::test
