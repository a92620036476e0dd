#pragma once

#include "emr/reference_models.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace emr::tools {

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines ('#' comments) with the CLI11 INI reader.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::string& path);

std::vector<std::string> preset_names();
/// Text of a shipped preset; throws ConfigError for unknown names.
std::string preset_text(const std::string& name);

/// Typed access that remembers which keys were read, so leftovers can be rejected.
class KeyReader {
 public:
  explicit KeyReader(KeyValues values) : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string text(const std::string& key);
  std::string text(const std::string& key, const std::string& fallback);
  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  std::size_t count(const std::string& key);
  std::size_t count(const std::string& key, std::size_t fallback);
  /// Throws ConfigError naming any key that was never read.
  void finish() const;

 private:
  KeyValues values_;
  std::set<std::string> used_;
};

struct ClimateSetup {
  ClimateParams params;
  ClimateIntegration integration;
};

struct LvSetup {
  LVParams params;
  Eigen::Vector4d n0;
  double dt = 0.035;
  std::size_t length = 150000;
  std::size_t transient = 10000;
};

struct LinearSetup {
  LinearToyParams params;
  double dt = 1e-3;
  std::size_t length = 1000000;
  std::uint64_t seed = 1;
};

/// The "model" key selects which of the three setups a configuration describes.
std::string model_kind(const KeyValues& values);
ClimateSetup climate_setup(const KeyValues& values);
LvSetup lv_setup(const KeyValues& values);
LinearSetup linear_setup(const KeyValues& values);

}  // namespace emr::tools
