#pragma once

#include "ains/observability.hpp"
#include "ains/simkit.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ains {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PreintegrateConfig {
  double window = 1.0;  // s, keyframe spacing
  bool with_bias = true;
};

struct Config {
  Scenario scenario;
  FilterKind filter = FilterKind::InvEkf;
  int runs = 50;
  int jobs = 1;
  BananaConfig banana;
  Fig6Config fig6;
  std::vector<double> fig3_dts{0.01, 0.1, 0.5, 1.0};
  PreintegrateConfig preintegrate;
  int horizon = kDefaultHorizon;
};

// Unknown tables or keys raise ConfigError naming the dotted key.
Config parse_config(std::string_view toml_text, std::string_view source = "config");
Config load_config(const std::string& path);
// Defaults for a bundled scenario name; ConfigError when unknown.
Config preset_config(std::string_view name);

}  // namespace ains
