#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "grouprec/data.hpp"
#include "grouprec/eval.hpp"
#include "grouprec/model.hpp"

namespace grouprec::cli {

/// Environment variable naming a default config file.
inline constexpr const char* kConfigEnv = "GROUPREC_CONFIG";

/// Flat "section.key=value" settings. Layers apply in order: built-in
/// defaults, config file, command-line overrides.
class ConfigMap {
 public:
  static ConfigMap defaults();

  /// Throws ConfigError for unknown keys or malformed lines.
  void merge_text(std::string_view text, std::string_view origin);
  void merge_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }

  /// Sorted key=value lines; merge_text() of this output restores the map.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Typed view of a fully resolved ConfigMap.
struct CliConfig {
  std::filesystem::path data_path;
  std::filesystem::path decl_path;  // empty: "<data>.decl" if present, else ITM-Rec layout
  Scenario scenario;
  ExperimentConfig experiment;
  std::filesystem::path output_dir;
  std::string run_name;

  static CliConfig resolve(const ConfigMap& map);
};

/// Declaration to use for `cfg`'s data file.
SchemaDecl resolve_decl(const CliConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace grouprec::cli
