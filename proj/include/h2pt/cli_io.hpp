#pragma once

// Command-line front end: subcommands for every module, CSV/JSON export and
// a content-addressed result cache for the expensive sweeps.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace h2pt::cli {

inline constexpr int kSchemaVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Environment variable naming the cache directory.
inline constexpr const char* kCacheEnv = "H2PT_CACHE_DIR";

std::string_view code_version();

struct RunStats {
  int cache_hits = 0;
  int cache_misses = 0;
};

/// Runs one subcommand. args[0] is the program name. Results go to `out`
/// (or the --out file), diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        RunStats* stats = nullptr);
int run(int argc, const char* const* argv);

// ---------------------------------------------------------------------------
// Cache

std::string sha256_hex(std::string_view data);

struct ResultRecord {
  std::string key;
  std::string operation;
  nlohmann::json inputs;
  nlohmann::json payload;
  std::string code_version;
  std::string timestamp;
};

/// One JSON file per record under <dir>/<key[0:2]>/<key>.json. Writes go
/// through a temporary file and a rename, so concurrent readers never see a
/// partial record. A default-constructed cache is disabled.
class ResultCache {
 public:
  ResultCache() = default;
  explicit ResultCache(std::filesystem::path dir);

  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

  /// Hash over operation, inputs and code version.
  static std::string key_for(std::string_view operation, const nlohmann::json& inputs);

  /// Missing or unreadable records return nothing; corrupt ones also log a
  /// warning.
  std::optional<ResultRecord> lookup(std::string_view operation, const nlohmann::json& inputs);
  void store(std::string_view operation, const nlohmann::json& inputs, const nlohmann::json& payload);

  int hits() const { return hits_; }
  int misses() const { return misses_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
  int hits_ = 0;
  int misses_ = 0;
};

/// $H2PT_CACHE_DIR, else $XDG_CACHE_HOME/h2pt, else ~/.cache/h2pt.
std::filesystem::path default_cache_dir();

// JSON helpers: non-finite doubles travel as null.
nlohmann::json number(double x);
double to_double(const nlohmann::json& j);

}  // namespace h2pt::cli
