#include "config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ean/errors.hpp"

namespace ean::cli {

using nlohmann::json;

namespace {

// Every accepted key with its default. null means "derived" (see accessors).
json defaults() {
  SupernetConfig s;
  return {
      // search
      {"seed", 0},
      {"m", 18},
      {"search_steps", nullptr},
      {"ppo_start", nullptr},
      {"learning_rate", 0.005},
      {"lambda1", 0.5},
      {"lambda2", 1.0},
      {"lambda3", 0.1},
      {"replay_capacity", 64},
      {"replay_sample", 8},
      {"controller_input", 8},
      {"controller_hidden", 64},
      {"ppo_clip", false},
      {"ppo_clip_epsilon", 0.2},
      {"rnd_hidden", 32},
      {"rnd_embed", 16},
      {"rnd_learning_rate", 1e-3},
      {"rnd_normalize", false},
      {"workers", 1},
      // planted environment
      {"planted_seed", nullptr},
      {"planted_interactions", 4},
      {"planted_noise", 0.01},
      {"planted_base", 0.35},
      {"planted_utility_scale", 1.5},
      {"planted_utility_low", -1.0},
      {"planted_utility_high", 1.0},
      {"planted_interaction_scale", 1.0},
      // supernet
      {"stage_sizes", s.stage_sizes},
      {"stage_widths", s.stage_widths},
      {"block_hidden", s.block_hidden},
      {"attention_bottleneck", s.attention_bottleneck},
      {"block_init_gain", s.block_init_gain},
      {"sharing_mode", to_string(s.sharing)},
      {"dataset_seed", s.dataset_seed},
      {"classes", s.classes},
      {"input_dim", s.input_dim},
      {"clusters_per_class", s.clusters_per_class},
      {"center_spread", s.center_spread},
      {"train_size", s.train_size},
      {"val_size", s.val_size},
      {"test_size", s.test_size},
      {"init_seed", nullptr},
      {"pretrain_steps", s.pretrain_steps},
      {"batch_size", s.batch_size},
      {"pretrain_learning_rate", s.learning_rate},
      {"scratch_steps", s.scratch_steps},
      {"checkpoint", nullptr},
      // external evaluator
      {"endpoint", nullptr},
      {"timeout_ms", 30000},
      {"retries", 2},
      {"connections", 1},
      // bench
      {"bench_scheme", nullptr},
      {"batch", 50},
      {"reps", 1000},
      {"timing_runs", 1000},
      // baselines
      {"draws", 180},
      {"period", 2},
      {"offset", 0},
      // correlate
      {"correlate_schemes", 20},
      {"scratch_seed", nullptr},
  };
}

std::string env_name(const std::string& key) {
  std::string out = "EAN_";
  for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::check_known(const std::string& key) const {
  if (!values_.contains(key)) throw ConfigError(key, "unknown configuration key");
}

void RunConfig::set(const std::string& key, json value) {
  check_known(key);
  values_[key] = std::move(value);
}

void RunConfig::load_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config", "cannot read config file '" + path + "'");
  std::ifstream in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config", "'" + path + "' is not valid JSON");
  if (!j.is_object()) throw ConfigError("config", "'" + path + "' must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_object()) throw ConfigError(it.key(), "nested objects are not allowed; the config is flat");
    set(it.key(), it.value());
  }
}

void RunConfig::apply_environment() {
  for (auto it = values_.begin(); it != values_.end(); ++it) {
    const char* raw = std::getenv(env_name(it.key()).c_str());
    if (!raw) continue;
    json parsed = json::parse(raw, nullptr, false);
    it.value() = parsed.is_discarded() ? json(std::string(raw)) : parsed;
  }
}

std::optional<std::string> RunConfig::get_string(const std::string& key) const {
  const auto& v = values_.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw ConfigError(key, "must be a string");
  return v.get<std::string>();
}

std::uint64_t RunConfig::seed() const { return get<std::uint64_t>("seed"); }

std::size_t RunConfig::m() const {
  const auto m = get<std::size_t>("m");
  if (m == 0) throw ConfigError("m", "must be positive");
  return m;
}

SearchConfig RunConfig::search_config(const std::string& env) const {
  SearchConfig c;
  const bool planted = env == "planted";
  c.search_steps = is_set("search_steps") ? get<std::size_t>("search_steps") : (planted ? 2000 : 300);
  c.ppo_start = is_set("ppo_start") ? get<std::size_t>("ppo_start") : (planted ? 200 : 50);
  c.learning_rate = get<double>("learning_rate");
  c.weights = {get<double>("lambda1"), get<double>("lambda2"), get<double>("lambda3")};
  c.replay_capacity = get<std::size_t>("replay_capacity");
  c.replay_sample = get<std::size_t>("replay_sample");
  c.seed = seed();
  c.controller.input_dim = get<std::size_t>("controller_input");
  c.controller.hidden = get<std::size_t>("controller_hidden");
  c.controller.learning_rate = c.learning_rate;
  c.controller.ppo_clip = get<bool>("ppo_clip");
  c.controller.clip_epsilon = get<double>("ppo_clip_epsilon");
  c.rnd.hidden = get<std::size_t>("rnd_hidden");
  c.rnd.embed_dim = get<std::size_t>("rnd_embed");
  c.rnd.learning_rate = get<double>("rnd_learning_rate");
  c.rnd.normalize = get<bool>("rnd_normalize");
  c.validate();
  return c;
}

PlantedOptions RunConfig::planted_options() const {
  PlantedOptions o;
  o.m = m();
  o.interactions = get<std::size_t>("planted_interactions");
  o.noise = get<double>("planted_noise");
  o.base = get<double>("planted_base");
  o.utility_scale = get<double>("planted_utility_scale");
  o.utility_low = get<double>("planted_utility_low");
  o.utility_high = get<double>("planted_utility_high");
  o.interaction_scale = get<double>("planted_interaction_scale");
  return o;
}

std::uint64_t RunConfig::planted_seed() const {
  return is_set("planted_seed") ? get<std::uint64_t>("planted_seed") : seed();
}

SupernetConfig RunConfig::supernet_config() const {
  json j{{"stage_sizes", values_.at("stage_sizes")},
         {"stage_widths", values_.at("stage_widths")},
         {"block_hidden", values_.at("block_hidden")},
         {"attention_bottleneck", values_.at("attention_bottleneck")},
         {"block_init_gain", values_.at("block_init_gain")},
         {"sharing_mode", values_.at("sharing_mode")},
         {"dataset_seed", values_.at("dataset_seed")},
         {"classes", values_.at("classes")},
         {"input_dim", values_.at("input_dim")},
         {"clusters_per_class", values_.at("clusters_per_class")},
         {"center_spread", values_.at("center_spread")},
         {"train_size", values_.at("train_size")},
         {"val_size", values_.at("val_size")},
         {"test_size", values_.at("test_size")},
         {"init_seed", is_set("init_seed") ? values_.at("init_seed") : json(seed())},
         {"pretrain_steps", values_.at("pretrain_steps")},
         {"batch_size", values_.at("batch_size")},
         {"learning_rate", values_.at("pretrain_learning_rate")},
         {"scratch_steps", values_.at("scratch_steps")}};
  try {
    return supernet_config_from_json(j);
  } catch (const ConfigError& e) {
    if (e.field() == "learning_rate") throw ConfigError("pretrain_learning_rate", e.what());
    throw;
  }
}

ExternalOptions RunConfig::external_options(std::size_t m) const {
  ExternalOptions o;
  const auto ms = get<std::int64_t>("timeout_ms");
  if (ms <= 0) throw ConfigError("timeout_ms", "must be positive");
  o.timeout = Millis(ms);
  o.retries = get<std::size_t>("retries");
  o.expected_m = m;
  return o;
}

}  // namespace ean::cli
