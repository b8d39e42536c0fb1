#pragma once

#include <map>
#include <string>

#include "sci3d/errors.hpp"

namespace sci3d {

/// INI-style configuration: `[section]` headers, `key = value` lines,
/// `#` or `;` comments. Flag overrides use the `section.key=value` form.
class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig load(const std::string& path);
  void parse(const std::string& text);

  /// Applies a single `section.key=value` override string.
  void apply_override(const std::string& spec);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string get_required(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

  std::string serialize() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace sci3d
