#include "refacer_cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "refacer/error.hpp"

namespace refacer::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ConfigParse, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(ErrorKind::ConfigParse, where + ": invalid key '" + key + "'");
    if (value.empty()) throw Error(ErrorKind::ConfigParse, where + ": empty value for '" + key + "'");
    if (!cfg.values_.emplace(key, Entry{value, line_no}).second)
      throw Error(ErrorKind::ConfigParse, where + ": duplicate key '" + key + "'");
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void KeyValueConfig::restrict_to(const std::set<std::string>& known) const {
  for (const auto& [key, entry] : values_)
    if (!known.count(key))
      throw Error(ErrorKind::ConfigParse, origin_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw Error(ErrorKind::ConfigParse, "invalid key '" + key + "'");
  values_[key] = Entry{value, 0};
}

void KeyValueConfig::bad_value(const std::string& key, const std::string& expected) const {
  const Entry& e = values_.at(key);
  throw Error(ErrorKind::ConfigParse, origin_ + ":" + std::to_string(e.line) + ": '" + key + "' expects " + expected +
                                          ", got '" + e.value + "'");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.value;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  std::int64_t v = 0;
  if (!parse_number(values_.at(key).value, v)) bad_value(key, "an integer");
  return v;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(values_.at(key).value, v)) bad_value(key, "a non-negative integer");
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  double v = 0.0;
  if (!parse_number(values_.at(key).value, v)) bad_value(key, "a number");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values_.at(key).value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, "a boolean");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
  return has(key) ? split_list(values_.at(key).value) : fallback;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::array<std::size_t, 3> parse_dims(const std::string& text) {
  const auto parts = split_list(text);
  std::array<std::size_t, 3> dims{};
  if (parts.size() != 3) throw Error(ErrorKind::InvalidArgument, "dims must be X,Y,Z, got '" + text + "'");
  for (std::size_t i = 0; i < 3; ++i)
    if (!parse_number(parts[i], dims[i]) || dims[i] == 0)
      throw Error(ErrorKind::InvalidArgument, "dims must be positive integers, got '" + text + "'");
  return dims;
}

}  // namespace refacer::cli
