#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace refacer::cli {

inline constexpr const char* kManifestName = "manifest.json";

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::string& bytes);

/// Relative path -> digest for every regular file under `dir`, skipping the
/// manifest itself. Paths use '/' and are sorted.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);

/// Reproducibility record written once into every output directory.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand);

  void flag(const std::string& name, const std::string& value) { flags_[name] = value; }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  /// Hashes every file of an input directory (or a single input file).
  void input(const std::string& label, const std::filesystem::path& path);

  /// Hashes the outputs under `dir` and writes dir/manifest.json.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string subcommand_;
  std::map<std::string, std::string> flags_;
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, std::map<std::string, std::string>> inputs_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace refacer::cli
