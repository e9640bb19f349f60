#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <memory>

#include <openssl/evp.h>

#include "rearsim/cli.hpp"
#include "rearsim/errors.hpp"
#include "rearsim/io.hpp"

namespace rearsim::cli {

using nlohmann::json;

std::string sha256_bytes(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_bytes(io::read_text(path)); }

Manifest::Manifest(std::string command, fs::path out_dir) : command_(std::move(command)), out_(std::move(out_dir)) {}

std::string Manifest::rel(const fs::path& p) const {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path base = fs::absolute(out_).lexically_normal();
  const fs::path r = abs.lexically_relative(base);
  return (r.empty() ? abs : r).generic_string();
}

void Manifest::config(const fs::path& path) {
  config_ = {{"path", rel(path)}, {"sha256", sha256_file(path)}};
}

void Manifest::input(const fs::path& path) { inputs_.emplace_back(rel(path), sha256_file(path)); }

void Manifest::input_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) input(f);
}

void Manifest::output(const fs::path& path) { outputs_.emplace_back(rel(path), sha256_file(path)); }

void Manifest::outputs_from_dir() {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out_)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) output(f);
}

void Manifest::write() const {
  auto list = [](std::vector<std::pair<std::string, std::string>> v) {
    std::sort(v.begin(), v.end());
    json a = json::array();
    for (const auto& [p, d] : v) a.push_back({{"path", p}, {"sha256", d}});
    return a;
  };

  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::atoll(epoch));
  char stamp[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);

  json doc = {
      {"tool", "rearsim"},
      {"version", REARSIM_VERSION},
      {"command", command_},
      {"config", config_},
      {"inputs", list(inputs_)},
      {"outputs", list(outputs_)},
      {"timestamp", stamp},
  };
  io::write_json(out_ / "manifest.json", doc);
}

}  // namespace rearsim::cli
