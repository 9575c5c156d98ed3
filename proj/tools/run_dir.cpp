#include "run_dir.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "ean/errors.hpp"

namespace ean::cli {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

RunDirectory::RunDirectory(std::filesystem::path dir, const std::string& command, const std::string& config_path,
                           const nlohmann::json& config, std::uint64_t seed)
    : dir_(std::move(dir)) {
  if (std::filesystem::exists(dir_ / "manifest.json"))
    throw ConfigError("out", "'" + dir_.string() + "' already holds a run; choose a new --out directory");
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("out", "cannot create '" + dir_.string() + "': " + ec.message());
  manifest_ = {{"command", command},
               {"config_path", config_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(config_path)},
               {"config", config},
               {"seed", seed},
               {"started", utc_timestamp()},
               {"tool_version", EAN_VERSION},
               {"artifacts", nlohmann::json::object()}};
  flush();
}

std::filesystem::path RunDirectory::artifact(const std::string& name) {
  manifest_["artifacts"][name] = (dir_ / name).string();
  flush();
  return dir_ / name;
}

void RunDirectory::write_json(const std::string& name, const nlohmann::json& j) {
  std::ofstream out(artifact(name));
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (dir_ / name).string());
}

void RunDirectory::finish(int exit_code, const nlohmann::json& extra) {
  manifest_["finished"] = utc_timestamp();
  manifest_["exit_code"] = exit_code;
  for (auto it = extra.begin(); it != extra.end(); ++it)
    if (!manifest_.contains(it.key())) manifest_[it.key()] = it.value();
  flush();
}

void RunDirectory::flush() {
  const auto tmp = dir_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << manifest_.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, dir_ / "manifest.json");
}

}  // namespace ean::cli
