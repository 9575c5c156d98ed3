#pragma once

// Flat JSON run configuration shared by every subcommand.
//
// Resolution order, later wins: built-in defaults, the --config file,
// EAN_<KEY> environment variables, command-line flags.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ean/environment.hpp"
#include "ean/errors.hpp"
#include "ean/protocol.hpp"
#include "ean/search.hpp"
#include "ean/supernet.hpp"

namespace ean::cli {

class RunConfig {
 public:
  RunConfig();

  /// Merges a JSON object file; ConfigError on a missing file, bad JSON or
  /// unknown keys.
  void load_file(const std::string& path);
  /// Applies EAN_<UPPERCASE KEY> variables. Values are parsed as JSON when
  /// possible and taken as strings otherwise.
  void apply_environment();
  void set(const std::string& key, nlohmann::json value);

  const nlohmann::json& values() const { return values_; }
  bool is_set(const std::string& key) const { return !values_.at(key).is_null(); }

  std::uint64_t seed() const;
  std::size_t m() const;

  /// `env` picks the (T, h) defaults when they are not set explicitly.
  SearchConfig search_config(const std::string& env) const;
  PlantedOptions planted_options() const;
  std::uint64_t planted_seed() const;
  SupernetConfig supernet_config() const;
  ExternalOptions external_options(std::size_t m) const;

  template <typename T>
  T get(const std::string& key) const {
    try {
      return values_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, std::string("bad value: ") + e.what());
    }
  }
  std::optional<std::string> get_string(const std::string& key) const;

 private:
  void check_known(const std::string& key) const;
  nlohmann::json values_;
};

}  // namespace ean::cli
