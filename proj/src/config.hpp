#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace xltk {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

// Every recognized key in a fixed order.
const std::vector<ConfigKey>& config_schema();

/**
 * Flat key = value settings. Keys outside the schema are rejected on load
 * and on set; typed getters throw ConfigError naming the key when a value
 * does not parse.
 */
class Config {
 public:
  Config();

  // Lines are "key = value"; '#' starts a comment line; blank lines skip.
  static Config load(const std::filesystem::path& path);
  void merge_file(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  // "key=value" as given to --set.
  void set_assignment(std::string_view assignment);

  const std::string& get(std::string_view key) const;
  std::string get_string(std::string_view key) const { return get(key); }
  std::int64_t get_int(std::string_view key) const;
  std::size_t get_size(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;

  // All keys in schema order, one "key = value" line each.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Help text listing every key with its default.
std::string config_help();

}  // namespace xltk
