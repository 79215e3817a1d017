#include "polarred/toml.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "polarred/errors.hpp"
#include "polarred/expr.hpp"

namespace polarred::toml {

const Value* Table::find(std::string_view key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e.value;
  return nullptr;
}

const Table* Document::find(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : s_(text) {}

  Document run() {
    Document doc;
    std::set<std::string> seen;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        const std::size_t at = line_;
        ++pos_;
        skip_spaces();
        std::string name = bare_key();
        skip_spaces();
        expect(']');
        end_of_line();
        if (!seen.insert(name).second) fail(at, "duplicate table [" + name + "]");
        doc.tables.push_back({std::move(name), at, {}});
        continue;
      }
      if (doc.tables.empty()) fail(line_, "key outside of any table");
      Table& t = doc.tables.back();
      const std::size_t at = line_;
      std::string key = bare_key();
      skip_spaces();
      expect('=');
      skip_spaces();
      Value v = value();
      end_of_line();
      if (t.find(key)) fail(at, "duplicate key '" + key + "' in [" + t.name + "]");
      t.entries.push_back({std::move(key), std::move(v)});
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw InputError("line " + std::to_string(line), msg);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void newline() {
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }

  void skip_blank_lines() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n' || peek() == '\r')
        newline();
      else
        return;
    }
  }

  // whitespace, comments and newlines inside arrays
  void skip_array_space() { skip_blank_lines(); }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail(line_, std::string("unexpected '") + peek() + "' after value");
    newline();
  }

  void expect(char c) {
    if (peek() != c) fail(line_, std::string("expected '") + c + "'" + (eof() ? " before end of file" : ""));
    ++pos_;
  }

  std::string bare_key() {
    const std::size_t b = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
    if (b == pos_) fail(line_, "expected a key");
    return std::string(s_.substr(b, pos_ - b));
  }

  Value value() {
    Value v;
    v.line = line_;
    const char c = peek();
    if (c == '"') {
      v.data = string();
    } else if (c == '[') {
      ++pos_;
      Value::Array arr;
      for (;;) {
        skip_array_space();
        if (peek() == ']') {
          ++pos_;
          break;
        }
        arr.push_back(value());
        skip_array_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(']');
        break;
      }
      v.data = std::move(arr);
    } else if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      v.data = true;
    } else if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      v.data = false;
    } else {
      v.data = number().data;
    }
    return v;
  }

  std::string string() {
    expect('"');
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail(line_, "unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = eof() ? '\0' : s_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail(line_, std::string("unsupported escape '\\") + e + "'");
      }
    }
    return out;
  }

  Value number() {
    const std::size_t b = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      ++pos_;
    std::string tok(s_.substr(b, pos_ - b));
    if (tok.empty()) fail(line_, eof() ? "expected a value before end of file" : std::string("unexpected '") + peek() + "'");
    std::string clean;
    for (const char c : tok)
      if (c != '_') clean += c;
    const char* first = clean.data() + (clean[0] == '+' ? 1 : 0);
    const char* last = clean.data() + clean.size();
    Value v;
    if (clean.find_first_of(".eE") == std::string::npos) {
      std::int64_t i = 0;
      const auto r = std::from_chars(first, last, i);
      if (r.ec == std::errc() && r.ptr == last) {
        v.data = i;
        return v;
      }
    }
    double d = 0;
    const auto r = std::from_chars(first, last, d);
    if (r.ec != std::errc() || r.ptr != last || !std::isfinite(d)) fail(line_, "malformed value '" + tok + "'");
    v.data = d;
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

Document parse(std::string_view text) { return Reader(text).run(); }

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + '"';
}

std::string format(const Value& v) {
  if (v.is_bool()) return v.as_bool() ? "true" : "false";
  if (v.is_int()) return std::to_string(v.as_int());
  if (v.is_string()) return quote(v.as_string());
  if (v.is_array()) {
    std::string out = "[";
    const auto& a = v.as_array();
    for (std::size_t i = 0; i < a.size(); ++i) out += (i ? ", " : "") + format(a[i]);
    return out + "]";
  }
  return format_number(std::get<double>(v.data));
}

}  // namespace polarred::toml
