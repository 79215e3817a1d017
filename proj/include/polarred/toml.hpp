#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace polarred::toml {

/// The subset used by scenario files: tables of key = value with strings,
/// booleans, integers, floats and (nested, possibly multi-line) arrays.
struct Value {
  using Array = std::vector<Value>;
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  std::size_t line = 0;

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_number() const { return is_int() || std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  bool as_bool() const { return std::get<bool>(data); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data); }
  double as_number() const { return is_int() ? static_cast<double>(as_int()) : std::get<double>(data); }
  const std::string& as_string() const { return std::get<std::string>(data); }
  const Array& as_array() const { return std::get<Array>(data); }
};

struct Entry {
  std::string key;
  Value value;
};

struct Table {
  std::string name;
  std::size_t line = 0;
  std::vector<Entry> entries;

  const Value* find(std::string_view key) const;
};

struct Document {
  std::vector<Table> tables;
  const Table* find(std::string_view name) const;
};

/// Throws InputError("line N", ...) on malformed input, duplicate tables or keys.
Document parse(std::string_view text);

std::string quote(std::string_view s);
std::string format(const Value& v);

}  // namespace polarred::toml
