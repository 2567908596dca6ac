#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace refacer::cli {

/// Plain-text configuration:
///
///   # comment            (also after a value: "epochs = 60  # desk scale")
///   key = value          (whitespace around key and value is trimmed)
///
/// Keys are [a-z0-9_]+, each at most once. Lists are comma separated.
/// Every malformed line, duplicate or unknown key, or unparsable value is a
/// ConfigParse error naming the line.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Throws ConfigParse for keys outside `known`.
  void restrict_to(const std::set<std::string>& known) const;
  /// Overrides or adds a value (command-line overrides of a config file).
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;

  std::string origin_;
  std::map<std::string, Entry> values_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
/// "X,Y,Z" with positive integers.
std::array<std::size_t, 3> parse_dims(const std::string& text);

}  // namespace refacer::cli
