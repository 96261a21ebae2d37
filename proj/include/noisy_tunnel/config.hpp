#pragma once

// Plain-text run configuration: `key = value` lines, `#` comments and
// `[section]` headers. Keys are addressed as "section.key"; keys before the
// first header live in the root section and are addressed by bare name.
//
// A CSV written by the CLI starts with a manifest (lines prefixed "# ")
// that is itself a config file; load_config_file recognizes it and parses
// only the manifest block.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace noisy_tunnel {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kManifestMagic = "# noisy_tunnel manifest";

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
} // namespace detail

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class Config {
public:
  /// Parses config text. Duplicate keys: the later line wins.
  static Config parse(std::string_view text, std::string_view origin = "<config>") {
    Config c;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = detail::trim(raw.substr(0, raw.find('#')));
      if (line.empty())
        continue;
      auto where = [&] { return std::string(origin) + ":" + std::to_string(line_no) + ": "; };
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3)
          throw ConfigError(where() + "malformed section header '" + line + "'");
        section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(where() + "expected 'key = value', got '" + line + "'");
      const std::string key = detail::trim(std::string_view(line).substr(0, eq));
      if (key.empty())
        throw ConfigError(where() + "empty key");
      c.set(section.empty() ? key : section + "." + key, detail::trim(std::string_view(line).substr(eq + 1)));
    }
    return c;
  }

  void set(const std::string &key, std::string value) { values_[key] = std::move(value); }

  /// Applies a "section.key=value" override.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    const std::string key = detail::trim(assignment.substr(0, eq));
    if (key.empty())
      throw ConfigError("override '" + std::string(assignment) + "' has an empty key");
    set(key, detail::trim(assignment.substr(eq + 1)));
  }

  [[nodiscard]] bool has(const std::string &key) const { return values_.count(key) != 0; }

  [[nodiscard]] std::string get_string(const std::string &key, const std::string &fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  [[nodiscard]] double get_double(const std::string &key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  [[nodiscard]] long long get_int(const std::string &key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      return fallback;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != it->second.size())
      throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
    return v;
  }

  [[nodiscard]] std::vector<std::string> get_list(const std::string &key,
                                                  const std::vector<std::string> &fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      return fallback;
    std::vector<std::string> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ','))
      if (auto t = detail::trim(item); !t.empty())
        out.push_back(std::move(t));
    return out;
  }

  [[nodiscard]] std::vector<double> get_double_list(const std::string &key, const std::vector<double> &fallback) const {
    if (!has(key))
      return fallback;
    std::vector<double> out;
    for (const auto &s : get_list(key, {}))
      out.push_back(to_double(key, s));
    return out;
  }

  /// Rejects any key outside `known` (exact names, or prefixes ending in '.').
  void require_known(const std::vector<std::string> &known) const {
    for (const auto &[key, value] : values_) {
      bool ok = false;
      for (const auto &k : known)
        ok = ok || key == k || (k.back() == '.' && key.rfind(k, 0) == 0);
      if (!ok)
        throw ConfigError("unknown configuration key '" + key + "'");
    }
  }

  [[nodiscard]] const std::map<std::string, std::string> &values() const { return values_; }

private:
  static double to_double(const std::string &key, const std::string &s) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

/// Extracts the manifest block from CLI output text, with the "# " prefixes removed.
inline std::string manifest_to_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue; // magic line
    }
    if (line.rfind("# ", 0) != 0)
      break;
    out += line.substr(2);
    out += '\n';
  }
  return out;
}

inline Config load_config_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.rfind(kManifestMagic, 0) == 0)
    return Config::parse(manifest_to_config_text(text), path);
  return Config::parse(text, path);
}

} // namespace noisy_tunnel
