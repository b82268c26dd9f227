#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticky::bench {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

// 64-bit FNV-1a, used as a stable config fingerprint.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// INI file with sections such as [model], [sampler], [output]. Keys before
// the first section are global; config_version is required there.
class Config {
 public:
  static Config load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config '" + file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), file);
  }

  static Config parse(const std::string& text, const std::filesystem::path& name = "<config>") {
    Config c;
    c.file_ = name;
    c.text_ = text;
    std::istringstream is(text);
    try {
      boost::property_tree::ini_parser::read_ini(is, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(name.string() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    c.index_lines();
    const auto v = c.get_or<int>("config_version", -1);
    if (v == -1) throw ConfigError(name.string() + ": missing config_version (expected " + std::to_string(kConfigVersion) + ")");
    if (v != kConfigVersion)
      c.fail("config_version", "unsupported version " + std::to_string(v) + " (expected " + std::to_string(kConfigVersion) + ")");
    return c;
  }

  const std::filesystem::path& file() const { return file_; }
  const std::string& text() const { return text_; }
  std::string hash() const { return hex64(fnv1a(text_)); }

  bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }
  bool has_section(const std::string& section) const { return tree_.get_child_optional(section).has_value(); }

  std::string raw(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(key);
    if (!v) fail(key, "required key is missing");
    return trim(*v);
  }

  template <class T>
  T get(const std::string& key) const {
    return convert<T>(key, raw(key));
  }

  template <class T>
  T get_or(const std::string& key, const T& fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(raw(key), ',')) out.push_back(convert<double>(key, item));
    return out;
  }
  std::vector<double> list_or(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? list(key) : fallback;
  }
  // Rows separated by ';', entries by ','.
  std::vector<std::vector<double>> matrix(const std::string& key) const {
    std::vector<std::vector<double>> out;
    for (const auto& row : split(raw(key), ';')) {
      std::vector<double> r;
      for (const auto& item : split(row, ',')) r.push_back(convert<double>(key, item));
      if (!out.empty() && r.size() != out.front().size()) fail(key, "rows have different lengths");
      out.push_back(std::move(r));
    }
    return out;
  }

  // Path relative to the config file; the file must exist.
  std::filesystem::path existing_path(const std::string& key) const {
    std::filesystem::path p = raw(key);
    if (p.is_relative() && file_.has_parent_path()) p = file_.parent_path() / p;
    if (!std::filesystem::exists(p)) fail(key, "data file '" + p.string() + "' does not exist");
    return p;
  }

  // Rejects keys a section does not understand, catching typos early.
  void check_keys(const std::string& section, const std::set<std::string>& known) const {
    auto child = tree_.get_child_optional(section);
    if (!child) return;
    for (const auto& [k, v] : *child) {
      if (!v.empty()) fail(section + "." + k, "nested sections are not supported");
      if (!known.count(k)) fail(section + "." + k, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = file_.string();
    auto it = lines_.find(key);
    if (it != lines_.end()) where += ":" + std::to_string(it->second);
    const auto dot = key.find('.');
    const std::string label = dot == std::string::npos ? key : "[" + key.substr(0, dot) + "] " + key.substr(dot + 1);
    throw ConfigError(where + ": " + label + ": " + msg);
  }

 private:
  template <class T>
  T convert(const std::string& key, const std::string& s) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
      if (s == "false" || s == "no" || s == "0" || s == "off") return false;
      fail(key, "expected a boolean, got '" + s + "'");
    } else {
      std::istringstream is(s);
      T v{};
      if constexpr (std::is_unsigned_v<T>) {
        if (!s.empty() && s[0] == '-') fail(key, "expected a nonnegative integer, got '" + s + "'");
      }
      // Integers may be written in scientific notation, e.g. 1e5.
      if constexpr (std::is_integral_v<T>) {
        double d = 0.0;
        if (!(is >> d) || !(is >> std::ws).eof() || d != static_cast<double>(static_cast<T>(d)))
          fail(key, "expected an integer, got '" + s + "'");
        v = static_cast<T>(d);
      } else {
        if (!(is >> v) || !(is >> std::ws).eof()) fail(key, "expected a number, got '" + s + "'");
      }
      return v;
    }
  }

  void index_lines() {
    std::istringstream is(text_);
    std::string line, section;
    for (int n = 1; std::getline(is, line); ++n) {
      const auto t = trim(line);
      if (t.empty() || t[0] == ';' || t[0] == '#') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(t.substr(1, t.size() - 2));
        lines_[section] = n;
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) continue;
      const auto key = trim(t.substr(0, eq));
      lines_[section.empty() ? key : section + "." + key] = n;
    }
  }

  std::filesystem::path file_;
  std::string text_;
  boost::property_tree::ptree tree_;
  std::map<std::string, int> lines_;
};

}  // namespace sticky::bench
