#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace ean::cli {

/// Output directory of one command. Creation fails when the directory
/// already holds a manifest. The manifest is written when the run starts and
/// only gains keys afterwards.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path dir, const std::string& command, const std::string& config_path,
               const nlohmann::json& config, std::uint64_t seed);

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path artifact(const std::string& name);
  void write_json(const std::string& name, const nlohmann::json& j);
  /// Records end time and exit code.
  void finish(int exit_code, const nlohmann::json& extra = nlohmann::json::object());

 private:
  void flush();
  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

std::string utc_timestamp();

}  // namespace ean::cli
