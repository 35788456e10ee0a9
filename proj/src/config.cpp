#include "difflab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "difflab/errors.hpp"

namespace difflab {
namespace {

using nlohmann::json;

class TomlReader {
 public:
  explicit TomlReader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        table = parse_header(root);
      } else {
        parse_key_value(*table);
      }
      finish_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("TOML line " + std::to_string(line_) + ": " + what);
  }

  void advance() {
    if (peek() == '\n') ++line_;
    ++pos_;
  }

  void skip_spaces() {
    while (peek() == ' ' || peek() == '\t') advance();
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') advance();
    }
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  // Whitespace, comments and newlines, for use inside arrays.
  void skip_all() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  void finish_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') advance();
    if (!at_end() && peek() != '\n') fail("unexpected trailing characters");
    if (!at_end()) advance();
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  std::string parse_simple_key() {
    skip_spaces();
    if (peek() == '"') return parse_basic_string();
    std::string key;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-') {
      key += peek();
      advance();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts{parse_simple_key()};
    skip_spaces();
    while (peek() == '.') {
      advance();
      parts.push_back(parse_simple_key());
      skip_spaces();
    }
    return parts;
  }

  json* descend(json& root, const std::vector<std::string>& path, std::size_t count) {
    json* node = &root;
    for (std::size_t i = 0; i < count; ++i) {
      json& next = (*node)[path[i]];
      if (next.is_null()) next = json::object();
      if (next.is_array()) {
        if (next.empty() || !next.back().is_object()) fail("key '" + path[i] + "' is not a table");
        node = &next.back();
      } else if (next.is_object()) {
        node = &next;
      } else {
        fail("key '" + path[i] + "' is not a table");
      }
    }
    return node;
  }

  json* parse_header(json& root) {
    expect('[');
    const bool array_table = peek() == '[';
    if (array_table) advance();
    const auto path = parse_dotted_key();
    expect(']');
    if (array_table) expect(']');
    json* parent = descend(root, path, path.size() - 1);
    json& slot = (*parent)[path.back()];
    if (array_table) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + path.back() + "' is not a table");
    return &slot;
  }

  void parse_key_value(json& table) {
    const auto path = parse_dotted_key();
    skip_spaces();
    expect('=');
    skip_spaces();
    json* target = descend(table, path, path.size() - 1);
    if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*target)[path.back()] = parse_value();
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (peek() != '"') {
      if (at_end() || peek() == '\n') fail("unterminated string");
      char c = peek();
      advance();
      if (c == '\\') {
        const char e = peek();
        advance();
        switch (e) {
          case 'n':
            out += '\n';
            break;
          case 't':
            out += '\t';
            break;
          case '"':
            out += '"';
            break;
          case '\\':
            out += '\\';
            break;
          default:
            fail("unsupported escape sequence");
        }
      } else {
        out += c;
      }
    }
    advance();
    return out;
  }

  std::string parse_literal_string() {
    expect('\'');
    std::string out;
    while (peek() != '\'') {
      if (at_end() || peek() == '\n') fail("unterminated string");
      out += peek();
      advance();
    }
    advance();
    return out;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    skip_all();
    while (peek() != ']') {
      arr.push_back(parse_value());
      skip_all();
      if (peek() == ',') {
        advance();
        skip_all();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    advance();
    return arr;
  }

  json parse_number_or_bool() {
    std::string token;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                         peek() == '-' || peek() == '.' || peek() == '_')) {
      if (peek() != '_') token += peek();
      advance();
    }
    if (token == "true") return true;
    if (token == "false") return false;
    if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    if (token.empty()) fail("expected a value");
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    const char* first = token.data() + (token.front() == '+' ? 1 : 0);
    const char* last = token.data() + token.size();
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("malformed float '" + token + "'");
      return v;
    }
    long long v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) fail("malformed integer '" + token + "'");
    return v;
  }

  json parse_value() {
    switch (peek()) {
      case '"':
        return parse_basic_string();
      case '\'':
        return parse_literal_string();
      case '[':
        return parse_array();
      case '{':
        fail("inline tables are not supported");
      default:
        return parse_number_or_bool();
    }
  }
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return TomlReader(text).parse(); }

nlohmann::json load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  if (path.extension() == ".toml") return parse_toml(buf.str());
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace difflab
