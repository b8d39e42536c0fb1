#include "sci3d/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace sci3d {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

}  // namespace

IniConfig IniConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  IniConfig cfg;
  cfg.parse(ss.str());
  return cfg;
}

void IniConfig::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    sections_[section][key] = value;
  }
}

void IniConfig::apply_override(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + spec + "': expected section.key=value");
  const std::string path = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  const std::size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override '" + spec + "': key must be qualified as section.key");
  sections_[path.substr(0, dot)][path.substr(dot + 1)] = value;
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string IniConfig::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

std::string IniConfig::get_required(const std::string& section, const std::string& key) const {
  if (!has(section, key))
    throw ConfigError("missing required config key [" + section + "] " + key);
  return sections_.at(section).at(key);
}

double IniConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = sections_.at(section).at(key);
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": '" + v + "' is not a number");
  }
}

long IniConfig::get_int(const std::string& section, const std::string& key, long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = sections_.at(section).at(key);
  try {
    std::size_t pos = 0;
    const long parsed = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": '" + v + "' is not an integer");
  }
}

bool IniConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = sections_.at(section).at(key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config [" + section + "] " + key + ": '" + v + "' is not a boolean");
}

void IniConfig::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  sections_[section][key] = value;
}

std::string IniConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [section, entries] : sections_) {
    if (!section.empty()) out << "[" << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
    out << "\n";
  }
  return out.str();
}

}  // namespace sci3d
