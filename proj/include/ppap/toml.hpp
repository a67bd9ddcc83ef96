#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace ppap::toml {

// Supported subset: key = value pairs, [section] and [[array-of-tables]]
// headers with dotted paths, booleans, integers, floats, basic and literal
// strings, and single-line (possibly nested) arrays. Comments run from an
// unquoted '#' to end of line. Errors carry "origin:line:" prefixes.
struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
  std::variant<std::monostate, bool, int64_t, double, std::string, Array, Table> data;

  Value() = default;
  Value(bool b) : data(b) {}
  Value(int64_t i) : data(i) {}
  Value(double d) : data(d) {}
  Value(std::string s) : data(std::move(s)) {}
  Value(Array a) : data(std::move(a)) {}
  Value(Table t) : data(std::move(t)) {}

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<int64_t>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_number() const { return is_int() || is_float(); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
  bool is_table() const { return std::holds_alternative<Table>(data); }

  bool as_bool() const { return std::get<bool>(data); }
  int64_t as_int() const { return std::get<int64_t>(data); }
  double as_float() const { return std::get<double>(data); }
  // Numeric accessor usable for either numeric representation.
  double as_double() const {
    return is_int() ? static_cast<double>(as_int()) : as_float();
  }
  const std::string& as_string() const { return std::get<std::string>(data); }
  const Array& as_array() const { return std::get<Array>(data); }
  const Table& as_table() const { return std::get<Table>(data); }
  Table& as_table() { return std::get<Table>(data); }
};

Value parse_string(const std::string& text, const std::string& origin);
Value parse_file(const std::filesystem::path& path);

}  // namespace ppap::toml
