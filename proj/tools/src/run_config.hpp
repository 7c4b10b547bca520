#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "drunet/phantom.hpp"
#include "drunet/trainer.hpp"

namespace drunet::cli {

/// Bad key, bad value or unreadable config file. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainConfig train;          // includes train.augmentation
  PhantomConfig phantom;
  int n_train = 0;            // 0: everything not taken by val/test
  int n_val = 0;
  int n_test = 0;
  std::uint64_t split_seed = 0;

  /// Cross-field validation of everything above.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string type;  // int, uint, float, bool, path
  std::string help;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its textual value. `where` prefixes error messages.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, const std::string& where);

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// "key=value" as given to --set.
void apply_assignment(RunConfig& cfg, std::string_view assignment);

}  // namespace drunet::cli
