#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace prx {

// Plain-text `key = value` configuration. Lines starting with '#' are
// comments; keys are case-sensitive; a repeated key overrides the earlier one.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  // Comma-separated list of numbers, e.g. "0, 110".
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;

  // Keys beginning with `prefix`, in lexicographic order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_csv_fields(const std::string& text);

}  // namespace prx
