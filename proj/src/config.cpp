#include "incentive/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

namespace incentive::config {
namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (!at_end() && peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        const auto path = parse_key_path();
        skip_spaces();
        expect(']');
        table = &open_table(root, path, true);
      } else {
        const auto path = parse_key_path();
        skip_spaces();
        expect('=');
        skip_spaces();
        json value = parse_value();
        json& parent = open_table(*table, {path.begin(), path.end() - 1}, false);
        if (parent.contains(path.back())) fail("key '" + path.back() + "' is defined twice");
        parent[path.back()] = std::move(value);
      }
      finish_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw io::ParseError("config line " + std::to_string(line_) + ": " + msg);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void expect(char ch) {
    if (at_end() || peek() != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!at_end() && peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  void newline() {
    if (!at_end() && peek() == '\r') ++pos_;
    if (!at_end() && peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (at_end()) return;
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        return;
      }
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (!at_end() && (peek() == '\n' || peek() == '\r')) {
        newline();
      } else {
        return;
      }
    }
  }

  void finish_line() {
    skip_spaces();
    skip_comment();
    if (at_end()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected text after value");
    newline();
  }

  static bool bare_char(char ch) {
    return (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
           ch == '_' || ch == '-';
  }

  std::string parse_key() {
    if (at_end()) fail("expected a key");
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    const std::size_t start = pos_;
    while (!at_end() && bare_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    while (true) {
      skip_spaces();
      if (at_end() || peek() != '.') return path;
      ++pos_;
      skip_spaces();
      path.push_back(parse_key());
    }
  }

  json& open_table(json& base, const std::vector<std::string>& path, bool header) {
    json* node = &base;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto& key = path[i];
      if (!node->contains(key)) {
        (*node)[key] = json::object();
      } else if (!(*node)[key].is_object()) {
        fail("'" + key + "' is not a table");
      } else if (header && i + 1 == path.size() && declared(path)) {
        fail("table '" + key + "' is declared twice");
      }
      node = &(*node)[key];
    }
    if (header) declared_.push_back(path);
    return *node;
  }

  bool declared(const std::vector<std::string>& path) const {
    for (const auto& p : declared_) {
      if (p == path) return true;
    }
    return false;
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char ch = text_[pos_++];
      if (ch == '"') return out;
      if (ch != '\\') {
        out += ch;
        continue;
      }
      if (at_end()) fail("unterminated escape");
      const char esc = text_[pos_++];
      switch (esc) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + esc);
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (at_end() || peek() != '\'') fail("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  json parse_value() {
    if (at_end()) fail("expected a value");
    const char ch = peek();
    if (ch == '"') {
      if (text_.substr(pos_, 3) == "\"\"\"") fail("multi-line strings are not supported");
      return parse_basic_string();
    }
    if (ch == '\'') return parse_literal_string();
    if (ch == '[') return parse_array();
    if (ch == '{') return parse_inline_table();
    return parse_scalar();
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_array_space();
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      if (at_end()) fail("unterminated array");
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_inline_table() {
    expect('{');
    json table = json::object();
    skip_spaces();
    if (!at_end() && peek() == '}') {
      ++pos_;
      return table;
    }
    while (true) {
      skip_spaces();
      const auto path = parse_key_path();
      skip_spaces();
      expect('=');
      skip_spaces();
      json value = parse_value();
      json& parent = open_table(table, {path.begin(), path.end() - 1}, false);
      if (parent.contains(path.back())) fail("key '" + path.back() + "' is defined twice");
      parent[path.back()] = std::move(value);
      skip_spaces();
      if (at_end()) fail("unterminated inline table");
      if (peek() == '}') {
        ++pos_;
        return table;
      }
      expect(',');
    }
  }

  json parse_scalar() {
    const std::size_t start = pos_;
    while (!at_end() && peek() != ',' && peek() != ']' && peek() != '}' && peek() != '#' &&
           peek() != '\n' && peek() != '\r' && peek() != ' ' && peek() != '\t') {
      ++pos_;
    }
    const std::string raw(text_.substr(start, pos_ - start));
    if (raw.empty()) fail("expected a value");
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw == "inf" || raw == "+inf") return std::numeric_limits<double>::infinity();
    if (raw == "-inf") return -std::numeric_limits<double>::infinity();
    if (raw == "nan" || raw == "+nan" || raw == "-nan") return std::nan("");

    std::string digits;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '_') {
        const bool ok = i > 0 && i + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i - 1])) &&
                        std::isdigit(static_cast<unsigned char>(raw[i + 1]));
        if (!ok) fail("misplaced '_' in number '" + raw + "'");
        continue;
      }
      digits += raw[i];
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    errno = 0;
    char* end = nullptr;
    if (is_float) {
      const double v = std::strtod(digits.c_str(), &end);
      if (end != digits.c_str() + digits.size() || errno == ERANGE) fail("invalid number '" + raw + "'");
      return v;
    }
    const long long v = std::strtoll(digits.c_str(), &end, 10);
    if (end != digits.c_str() + digits.size() || errno == ERANGE || digits.empty()) {
      fail("invalid value '" + raw + "'");
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::vector<std::vector<std::string>> declared_;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).parse(); }

nlohmann::json load_file(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw io::ParseError(path.string() + ": " + e.what());
    }
  }
  return parse_toml(text);
}

}  // namespace incentive::config
