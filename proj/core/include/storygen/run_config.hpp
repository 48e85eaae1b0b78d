#pragma once

// Flat key=value run configuration shared by every CLI command.
// Precedence, lowest to highest: built-in defaults, config file, STORYGEN_*
// environment variables, command-line flags.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "storygen/metrics.hpp"
#include "storygen/model.hpp"
#include "storygen/trainer.hpp"

namespace storygen {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kEnvPrefix = "STORYGEN_";

class RunConfig {
 public:
  RunConfig();

  /// Rejects unknown keys and values that do not parse for the key's type.
  void set(const std::string& key, const std::string& value);
  void load(std::istream& in);
  void load(const std::filesystem::path& path);
  /// Applies STORYGEN_<KEY> variables (key upper-cased), e.g. STORYGEN_SEED=7.
  void apply_environment(char** envp);

  bool known(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_seed() const;
  bool get_bool(const std::string& key) const;

  ModelConfig model_config(std::size_t vocab_size, std::size_t num_relations) const;
  TrainConfig train_config() const;
  BleuMode bleu_mode() const;

  /// Every key in sorted order as `key=value` lines.
  std::string echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace storygen
