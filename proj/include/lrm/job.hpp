#pragma once

// Batch job surface behind the `lrm` executable: a line-oriented key = value
// configuration and one entry point per subcommand.

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace lrm::cli {

/// `key = value` lines, '#' comments. Unknown keys are rejected.
class JobConfig {
 public:
  static JobConfig parse(std::string_view text, const std::string& source = "<config>");
  static JobConfig load(const std::string& path);

  /// Throws ConfigError for keys outside the known set.
  void set(const std::string& key, std::string value);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  std::string get_or(const std::string& key, std::string fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// All settings as "key=value" pairs joined by "; ", sorted by key.
  std::string resolved() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct Options {
  std::string config_path;
  std::string output_path;
  std::optional<long long> k;
  std::optional<unsigned long long> seed;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

/// Runs a subcommand (index, search, train, fuse, rerank, eval, profile).
/// Errors are reported on stderr and mapped to exit codes: 2 for
/// configuration errors, 3 for data errors.
int run_command(std::string_view command, const Options& options);

}  // namespace lrm::cli
