#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "constable/engine.hpp"
#include "constable/memsys.hpp"
#include "constable/pipeline.hpp"
#include "constable/workload.hpp"

namespace constable {

/// Everything a CLI invocation can configure.
struct Settings {
  GenConfig gen;
  CoreConfig core;
  ConstableConfig constable;
  CacheConfig caches;
};

class ConfigError : public std::invalid_argument {
public:
  ConfigError(std::size_t line_no, const std::string& what);
  std::size_t line_no() const { return line_no_; }

private:
  std::size_t line_no_;
};

struct ConfigKey {
  std::string name; // section.field
  std::string help;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

const std::vector<ConfigKey>& config_keys();

/// Applies one `key=value`; throws ConfigError (line 0) on a bad key or value.
void apply_setting(Settings& s, const std::string& key, const std::string& value);
/// Flat `key = value` lines; `#` starts a comment.
void apply_config_text(Settings& s, const std::string& text);
void apply_config_file(Settings& s, const std::string& path);
/// Every key with its current value, in table order.
std::string dump_settings(const Settings& s);

} // namespace constable
