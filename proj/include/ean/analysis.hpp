#pragma once

// Agreement between weight-shared proxy accuracy and stand-alone training.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ean/rng.hpp"
#include "ean/scheme.hpp"
#include "ean/supernet.hpp"

namespace ean {

struct CorrelationReport {
  std::vector<ConnectionScheme> schemes;
  std::vector<double> proxy;    // validation accuracy inside the supernet
  std::vector<double> scratch;  // test accuracy after training alone
  double pearson_r = 0.0;
};

/// `count` schemes for the correlation study. Each draws its own density
/// p ~ U(0, 1) and then every bit from Bernoulli(p), so sparse and dense
/// sub-networks both appear. Stage sizes come from `config`.
std::vector<ConnectionScheme> correlation_schemes(const SupernetConfig& config, std::size_t count, Rng& rng);

/// Pearson r of two paired series of at least three values. NumericError
/// when either series is constant.
double proxy_correlation(std::span<const double> proxy, std::span<const double> scratch);

/// Scores every scheme both ways. Each scheme is trained from scratch with
/// the same `scratch_seed`, so only the scheme differs between runs.
/// `progress` (optional) is called after each scheme with its index.
CorrelationReport proxy_correlation(const Supernet& net, const std::vector<ConnectionScheme>& schemes,
                                    const ToyDataset& data, std::uint64_t scratch_seed,
                                    const std::function<void(std::size_t)>& progress = {});

}  // namespace ean
