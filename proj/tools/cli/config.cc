#include "cli/config.h"

#include <fstream>

#include "q2q/error.h"
#include "q2q/text.h"

namespace q2q::cli {

ConfigFile parse_config(std::istream& in, const std::string& source) {
  ConfigFile config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    auto key = std::string(text::trim(trimmed.substr(0, eq)));
    auto value = std::string(text::trim(trimmed.substr(eq + 1)));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!config.emplace(key, value).second) throw ParseError(source, line_no, "duplicate key '" + key + "'");
  }
  return config;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

bool config_truthy(const std::string& value) {
  return value == "1" || value == "true" || value == "yes" || value == "on";
}

}  // namespace q2q::cli
