#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapeproxy/pipeline.hpp"

namespace shapeproxy {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sets one named parameter. Angles are given in degrees.
/// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

/// Applies a `key = value` file; `#` starts a comment.
void load_config(PipelineConfig& config, const std::filesystem::path& path);

/// Applies "key=value" overrides in order.
void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides);

/// Every key with its current value, one `key = value` line each.
std::string dump_config(const PipelineConfig& config);

std::vector<std::string> config_keys();

}  // namespace shapeproxy
