#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "h2pt/cli_io.hpp"
#include "h2pt/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace h2pt::cli {

json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

double to_double(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

fs::path default_cache_dir() {
  if (const char* env = std::getenv(kCacheEnv); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "h2pt";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "h2pt";
  return fs::temp_directory_path() / "h2pt-cache";
}

ResultCache::ResultCache(fs::path dir) : dir_(std::move(dir)) {}

std::string ResultCache::key_for(std::string_view operation, const json& inputs) {
  // nlohmann objects keep keys sorted, so dump() is canonical.
  const json id = {{"operation", operation}, {"inputs", inputs}, {"code_version", code_version()}};
  return sha256_hex(id.dump());
}

fs::path ResultCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<ResultRecord> ResultCache::lookup(std::string_view operation, const json& inputs) {
  if (!enabled()) return std::nullopt;
  const std::string key = key_for(operation, inputs);
  const fs::path path = path_for(key);
  std::ifstream in(path);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  try {
    const json j = json::parse(in);
    ResultRecord r;
    r.key = j.at("key").get<std::string>();
    r.operation = j.at("operation").get<std::string>();
    r.inputs = j.at("inputs");
    r.payload = j.at("payload");
    r.code_version = j.at("code_version").get<std::string>();
    r.timestamp = j.value("timestamp", "");
    if (j.at("schema_version").get<int>() != kSchemaVersion || r.key != key || r.operation != operation ||
        r.inputs != inputs || r.code_version != code_version()) {
      throw std::runtime_error("record does not match its key");
    }
    ++hits_;
    return r;
  } catch (const std::exception& e) {
    spdlog::warn("ignoring corrupt cache record {}: {}", path.string(), e.what());
    ++misses_;
    return std::nullopt;
  }
}

void ResultCache::store(std::string_view operation, const json& inputs, const json& payload) {
  if (!enabled()) return;
  const std::string key = key_for(operation, inputs);
  const fs::path path = path_for(key);
  const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  const json record = {{"schema_version", kSchemaVersion},
                       {"key", key},
                       {"operation", operation},
                       {"inputs", inputs},
                       {"payload", payload},
                       {"code_version", code_version()},
                       {"timestamp", std::to_string(stamp)}};
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) {
    spdlog::warn("cache disabled for this record, cannot create {}: {}", path.parent_path().string(), ec.message());
    return;
  }
  std::ostringstream tag;
  tag << ::getpid() << '.' << std::this_thread::get_id();
  const fs::path tmp = path.string() + ".tmp." + tag.str();
  {
    std::ofstream out(tmp);
    out << record.dump(1) << '\n';
    if (!out) {
      spdlog::warn("failed to write cache record {}", tmp.string());
      fs::remove(tmp, ec);
      return;
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    spdlog::warn("failed to publish cache record {}: {}", path.string(), ec.message());
    fs::remove(tmp, ec);
  }
}

}  // namespace h2pt::cli
