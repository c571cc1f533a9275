#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "coopintersect/experiment.hpp"

namespace coopintersect {

inline constexpr std::string_view kConfigSchema = "coopintersect/1";

struct Configuration {
  Scenario scenario;
  ExperimentPlan plan = ExperimentPlan::sweep_default();
};

/// Parses INI-style text. Unknown sections or keys, malformed values and a
/// missing or foreign schema id raise std::invalid_argument naming the key path.
[[nodiscard]] Configuration parse_config(std::string_view text);
[[nodiscard]] Configuration load_config(const std::filesystem::path& path);

/// Writes every setting, so the output parses back to the same configuration.
[[nodiscard]] std::string format_config(const Configuration& config);

}  // namespace coopintersect
