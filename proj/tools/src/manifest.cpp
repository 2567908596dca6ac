#include "refacer_cli/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "refacer/error.hpp"
#include "refacer_cli/version.hpp"

namespace refacer::cli {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error(ErrorKind::IoFailure, "cannot initialise SHA-256");
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingInput, "cannot open '" + path.string() + "'");
  Sha256 h;
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    h.update(buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string sha256_bytes(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  if (std::filesystem::is_regular_file(dir)) {
    out[dir.filename().generic_string()] = sha256_file(dir);
    return out;
  }
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorKind::MissingInput, "no such input '" + dir.string() + "'");
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == kManifestName) continue;
    out[std::filesystem::relative(entry.path(), dir).generic_string()] = sha256_file(entry.path());
  }
  return out;
}

RunManifest::RunManifest(std::string subcommand)
    : subcommand_(std::move(subcommand)), started_(std::chrono::steady_clock::now()) {}

void RunManifest::input(const std::string& label, const std::filesystem::path& path) {
  inputs_[label] = hash_tree(path);
}

void RunManifest::write(const std::filesystem::path& dir) const {
  nlohmann::ordered_json j;
  j["tool"] = "refacer";
  j["version"] = kVersion;
  j["subcommand"] = subcommand_;
  j["flags"] = flags_;
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  j["outputs"] = hash_tree(dir);
  j["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  std::ofstream out(dir / kManifestName);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write manifest in '" + dir.string() + "'");
}

}  // namespace refacer::cli
