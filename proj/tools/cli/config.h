#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace q2q::cli {

// Flat `key = value` experiment manifest. Blank lines and lines starting with
// '#' are ignored; keys are long option names without the leading dashes.
using ConfigFile = std::map<std::string, std::string>;

ConfigFile parse_config(std::istream& in, const std::string& source);
ConfigFile load_config(const std::string& path);

// Finds the value of `--config <path>` or `--config=<path>` in raw arguments.
std::string find_config_path(const std::vector<std::string>& args);

bool config_truthy(const std::string& value);

}  // namespace q2q::cli
