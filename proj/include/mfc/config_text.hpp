#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {

/// Parse failure in a config or problem file; carries the offending
/// line number and key so callers can report both.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, std::string key, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) +
                           (key.empty() ? std::string() : ", key '" + key + "'") + ": " +
                           message),
        line_(line),
        key_(std::move(key)) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

struct ConfigLine {
  int line = 0;
  std::string section;  // empty before any [section]
  std::string key;
  std::string value;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

/// Split INI-like text into (section, key, value) entries. Comments
/// start with '#'; sections are [name]; entries are key = value.
inline std::vector<ConfigLine> read_config_lines(const std::string& text) {
  std::vector<ConfigLine> out;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string s = detail::trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ParseError(lineno, "", "unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ParseError(lineno, "", "empty section name");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError(lineno, "", "expected key = value");
    ConfigLine cl;
    cl.line = lineno;
    cl.section = section;
    cl.key = detail::trim(s.substr(0, eq));
    cl.value = detail::trim(s.substr(eq + 1));
    if (cl.key.empty()) throw ParseError(lineno, "", "empty key");
    out.push_back(std::move(cl));
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double config_double(const ConfigLine& cl) {
  try {
    std::size_t pos = 0;
    double v = std::stod(cl.value, &pos);
    if (pos != cl.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(cl.line, cl.key, "expected a number, got '" + cl.value + "'");
  }
}

inline long long config_int(const ConfigLine& cl) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(cl.value, &pos);
    if (pos != cl.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(cl.line, cl.key, "expected an integer, got '" + cl.value + "'");
  }
}

}  // namespace mfc
