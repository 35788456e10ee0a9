#pragma once

#include <filesystem>
#include <json.hpp>
#include <string_view>

namespace difflab {

/// Parses the TOML subset used by experiment configs into JSON: bare and
/// quoted keys, dotted keys, [tables], [[arrays of tables]], strings,
/// integers, floats, booleans and (nested) arrays. Throws ConfigError.
nlohmann::json parse_toml(std::string_view text);

/// Reads a config file; `.toml` files go through parse_toml, anything else
/// is parsed as JSON.
nlohmann::json load_config_file(const std::filesystem::path& path);

}  // namespace difflab
