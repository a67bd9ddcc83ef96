#include "ppap/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ppap/errors.hpp"

namespace ppap::toml {

namespace {

struct Parser {
  std::string origin;
  std::size_t line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    raise(ErrorKind::ParseError,
          origin + ":" + std::to_string(line_no) + ": " + msg);
  }

  static bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  struct Cursor {
    const char* p;
    const char* end;
  };

  void skip_ws(Cursor& c) const {
    while (c.p < c.end && (*c.p == ' ' || *c.p == '\t')) ++c.p;
  }

  std::string parse_basic_string(Cursor& c) const {
    ++c.p;  // opening quote
    std::string out;
    while (c.p < c.end && *c.p != '"') {
      if (*c.p == '\\') {
        ++c.p;
        if (c.p >= c.end) fail("dangling escape in string");
        switch (*c.p) {
          case 'b': out.push_back('\b'); break;
          case 't': out.push_back('\t'); break;
          case 'n': out.push_back('\n'); break;
          case 'f': out.push_back('\f'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(std::string("unsupported escape '\\") + *c.p + "'");
        }
        ++c.p;
      } else {
        out.push_back(*c.p++);
      }
    }
    if (c.p >= c.end) fail("unterminated string");
    ++c.p;  // closing quote
    return out;
  }

  std::string parse_literal_string(Cursor& c) const {
    ++c.p;
    std::string out;
    while (c.p < c.end && *c.p != '\'') out.push_back(*c.p++);
    if (c.p >= c.end) fail("unterminated literal string");
    ++c.p;
    return out;
  }

  std::string parse_key(Cursor& c) const {
    skip_ws(c);
    if (c.p >= c.end) fail("expected a key");
    if (*c.p == '"') return parse_basic_string(c);
    if (*c.p == '\'') return parse_literal_string(c);
    const char* start = c.p;
    while (c.p < c.end && is_bare_char(*c.p)) ++c.p;
    if (c.p == start) fail("expected a key");
    return std::string(start, c.p);
  }

  Value parse_number(Cursor& c) const {
    const char* start = c.p;
    bool is_float = false;
    while (c.p < c.end) {
      const char ch = *c.p;
      if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' ||
          ch == '_') {
        ++c.p;
      } else if (ch == '.' || ch == 'e' || ch == 'E') {
        is_float = true;
        ++c.p;
      } else {
        break;
      }
    }
    std::string text;
    for (const char* q = start; q < c.p; ++q) {
      if (*q == '_') continue;  // digit separators
      text.push_back(*q);
    }
    // from_chars rejects an explicit plus sign.
    if (!text.empty() && text[0] == '+') text.erase(0, 1);
    if (text.empty()) fail("expected a number");
    if (is_float) {
      double v = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        fail("cannot parse float '" + std::string(start, c.p) + "'");
      }
      return Value(v);
    }
    int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      fail("cannot parse integer '" + std::string(start, c.p) + "'");
    }
    return Value(v);
  }

  Value parse_value(Cursor& c) const {
    skip_ws(c);
    if (c.p >= c.end) fail("expected a value");
    const char ch = *c.p;
    if (ch == '"') return Value(parse_basic_string(c));
    if (ch == '\'') return Value(parse_literal_string(c));
    if (ch == '[') {
      ++c.p;
      Array arr;
      skip_ws(c);
      while (c.p < c.end && *c.p != ']') {
        arr.push_back(parse_value(c));
        skip_ws(c);
        if (c.p < c.end && *c.p == ',') {
          ++c.p;
          skip_ws(c);
        } else {
          break;
        }
      }
      if (c.p >= c.end || *c.p != ']') fail("unterminated array");
      ++c.p;
      return Value(std::move(arr));
    }
    if (c.end - c.p >= 4 && std::string_view(c.p, 4) == "true" &&
        (c.p + 4 == c.end || !is_bare_char(c.p[4]))) {
      c.p += 4;
      return Value(true);
    }
    if (c.end - c.p >= 5 && std::string_view(c.p, 5) == "false" &&
        (c.p + 5 == c.end || !is_bare_char(c.p[5]))) {
      c.p += 5;
      return Value(false);
    }
    if (ch == '+' || ch == '-' || ch == '.' ||
        std::isdigit(static_cast<unsigned char>(ch))) {
      return parse_number(c);
    }
    fail(std::string("unexpected value starting with '") + ch + "'");
  }

  std::vector<std::string> parse_path(Cursor& c) const {
    std::vector<std::string> path;
    for (;;) {
      path.push_back(parse_key(c));
      skip_ws(c);
      if (c.p < c.end && *c.p == '.') {
        ++c.p;
        continue;
      }
      break;
    }
    return path;
  }

  // Walks to (and creates) the table all but the last path segment names.
  // Descends into the last element of an array-of-tables.
  Table* navigate(Table* root, const std::vector<std::string>& path,
                  std::size_t upto) const {
    Table* cur = root;
    for (std::size_t i = 0; i < upto; ++i) {
      auto [it, inserted] = cur->try_emplace(path[i], Table{});
      Value& v = it->second;
      if (v.is_table()) {
        cur = &v.as_table();
      } else if (v.is_array() && !std::get<Array>(v.data).empty() &&
                 std::get<Array>(v.data).back().is_table()) {
        cur = &std::get<Table>(std::get<Array>(v.data).back().data);
      } else {
        fail("'" + path[i] + "' is not a table");
      }
    }
    return cur;
  }
};

std::string strip_comment(const std::string& line) {
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_basic) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_basic = false;
      }
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else if (c == '"') {
      in_basic = true;
    } else if (c == '\'') {
      in_literal = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Value parse_string(const std::string& text, const std::string& origin) {
  Parser parser{origin};
  Table root;
  Table* current = &root;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++parser.line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.size() >= 2 && line[0] == '[' && line[1] == '[') {
      if (line.size() < 4 || line.substr(line.size() - 2) != "]]") {
        parser.fail("malformed array-of-tables header");
      }
      const std::string inner = line.substr(2, line.size() - 4);
      Parser::Cursor c{inner.data(), inner.data() + inner.size()};
      const auto path = parser.parse_path(c);
      parser.skip_ws(c);
      if (c.p != c.end) parser.fail("trailing characters in header");
      Table* parent = parser.navigate(&root, path, path.size() - 1);
      auto [it, inserted] = parent->try_emplace(path.back(), Array{});
      if (!it->second.is_array()) {
        parser.fail("'" + path.back() + "' is already a non-array value");
      }
      auto& arr = std::get<Array>(it->second.data);
      if (!inserted && !arr.empty() && !arr.back().is_table()) {
        parser.fail("'" + path.back() + "' is not an array of tables");
      }
      arr.emplace_back(Table{});
      current = &std::get<Table>(arr.back().data);
      continue;
    }

    if (line[0] == '[') {
      if (line.back() != ']') parser.fail("malformed section header");
      const std::string inner = line.substr(1, line.size() - 2);
      Parser::Cursor c{inner.data(), inner.data() + inner.size()};
      const auto path = parser.parse_path(c);
      parser.skip_ws(c);
      if (c.p != c.end) parser.fail("trailing characters in header");
      Table* parent = parser.navigate(&root, path, path.size() - 1);
      auto [it, inserted] = parent->try_emplace(path.back(), Table{});
      if (!inserted) {
        parser.fail("duplicate section '" + path.back() + "'");
      }
      current = &it->second.as_table();
      continue;
    }

    Parser::Cursor c{line.data(), line.data() + line.size()};
    const std::string key = parser.parse_key(c);
    parser.skip_ws(c);
    if (c.p >= c.end || *c.p != '=') parser.fail("expected '=' after key");
    ++c.p;
    Value value = parser.parse_value(c);
    parser.skip_ws(c);
    if (c.p != c.end) parser.fail("trailing characters after value");
    if (!current->try_emplace(key, std::move(value)).second) {
      parser.fail("duplicate key '" + key + "'");
    }
  }
  return Value(std::move(root));
}

Value parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

}  // namespace ppap::toml
