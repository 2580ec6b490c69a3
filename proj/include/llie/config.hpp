#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "llie/backbone.hpp"
#include "llie/losses.hpp"
#include "llie/teacher_student.hpp"

namespace llie {

/// Environment variable consulted for data.root when the config leaves it empty.
inline constexpr const char* kDataRootEnv = "LLIE_DATA_ROOT";

struct DataConfig {
  std::string root;
  std::string train_split = "train";
  std::string test_split = "test";
  std::string val_split;  // empty: no per-epoch validation
};

struct RunConfig {
  BackboneConfig model;
  TrainConfig train;
  LossConfig loss;
  DataConfig data;
  std::string lpips_model;  // eval.lpips_model
  std::string run_dir = "runs/default";

  void validate() const;
  /// Every key with its effective value, one `key = value` line each. Parsing
  /// the echo yields an identical configuration.
  std::string echo() const;
};

/// Sets one dotted key from its text form. Throws UnknownKey, TypeError,
/// RangeError or UnknownConfigTag naming the key.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines. `[section]` headers prefix the keys that follow;
/// `#` starts a comment.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "<text>");

/// Defaults, then the file (if any), then `key=value` overrides in order.
/// data.root falls back to $LLIE_DATA_ROOT.
RunConfig parse_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

/// All accepted keys, in echo order.
std::vector<std::string> config_keys();

}  // namespace llie
