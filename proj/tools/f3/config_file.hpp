// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

namespace f3::cli {

/// Reads a YAML or JSON document (by extension; .json is JSON, anything else
/// goes through the YAML parser, which also accepts plain JSON).
/// Throws ConfigFileError on a missing or unparseable file.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// YAML scalars become JSON numbers or booleans when they parse as one,
/// unless they were quoted.
nlohmann::json yaml_text_to_json(const std::string& text);

struct ConfigFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace f3::cli
