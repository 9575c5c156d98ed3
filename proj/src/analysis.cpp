#include "ean/analysis.hpp"

#include "ean/errors.hpp"
#include "ean/search.hpp"

namespace ean {

std::vector<ConnectionScheme> correlation_schemes(const SupernetConfig& config, std::size_t count, Rng& rng) {
  std::vector<ConnectionScheme> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double p = rng.uniform();
    out.push_back(sample_bernoulli(config.m(), p, rng).with_stages(config.stage_sizes));
  }
  return out;
}

double proxy_correlation(std::span<const double> proxy, std::span<const double> scratch) {
  if (proxy.size() != scratch.size()) throw ShapeError("proxy_correlation: series lengths differ");
  if (proxy.size() < 3) throw ConfigError("schemes", "correlation needs at least three schemes");
  return pearson(proxy, scratch);
}

CorrelationReport proxy_correlation(const Supernet& net, const std::vector<ConnectionScheme>& schemes,
                                    const ToyDataset& data, std::uint64_t scratch_seed,
                                    const std::function<void(std::size_t)>& progress) {
  if (schemes.size() < 3) throw ConfigError("schemes", "correlation needs at least three schemes");
  CorrelationReport r;
  r.schemes = schemes;
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    r.proxy.push_back(proxy_eval(net, schemes[i], data));
    r.scratch.push_back(scratch_train(net.config, schemes[i], data, scratch_seed));
    if (progress) progress(i);
  }
  r.pearson_r = proxy_correlation(r.proxy, r.scratch);
  return r;
}

}  // namespace ean
