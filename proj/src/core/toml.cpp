#include "ghnforge/core/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ghnforge/core/errors.hpp"

namespace ghnforge {

namespace {

struct Cursor {
  const std::string& s;
  size_t i = 0;
  int line = 1;
  std::string origin;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
  }
  bool eof() const { return i >= s.size(); }
  char peek() const { return s[i]; }
  char get() { return s[i++]; }
  void skip_ws_inline() {
    while (!eof() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
};

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_bare_key(Cursor& c) {
  std::string k;
  while (!c.eof() && is_bare_key_char(c.peek())) k.push_back(c.get());
  if (k.empty()) c.fail("expected key");
  return k;
}

std::string parse_basic_string(Cursor& c) {
  if (c.get() != '"') c.fail("expected '\"'");
  std::string out;
  while (true) {
    if (c.eof()) c.fail("unterminated string");
    char ch = c.get();
    if (ch == '"') break;
    if (ch == '\n') c.fail("newline in string");
    if (ch == '\\') {
      if (c.eof()) c.fail("dangling escape");
      char e = c.get();
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: c.fail(std::string("unsupported escape: \\") + e);
      }
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

TomlValue parse_scalar_or_array(Cursor& c);

TomlValue parse_scalar(Cursor& c) {
  TomlValue v;
  char ch = c.peek();
  if (ch == '"') {
    v.kind = TomlValue::Kind::String;
    v.str = parse_basic_string(c);
    return v;
  }
  // bare token up to delimiter
  std::string tok;
  while (!c.eof()) {
    char t = c.peek();
    if (t == ',' || t == ']' || t == '#' || t == '\n' || t == ' ' || t == '\t' || t == '\r') break;
    tok.push_back(c.get());
  }
  if (tok.empty()) c.fail("expected value");
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::Bool;
    v.bval = (tok == "true");
    return v;
  }
  std::string digits;
  for (char t : tok)
    if (t != '_') digits.push_back(t);
  bool looks_float = digits.find_first_of(".eE") != std::string::npos &&
                     digits.find_first_of("0123456789") != std::string::npos;
  if (!looks_float) {
    int64_t iv = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), iv);
    if (ec == std::errc() && p == digits.data() + digits.size()) {
      v.kind = TomlValue::Kind::Int;
      v.ival = iv;
      return v;
    }
  }
  try {
    size_t used = 0;
    double fv = std::stod(digits, &used);
    if (used == digits.size()) {
      v.kind = TomlValue::Kind::Float;
      v.fval = fv;
      return v;
    }
  } catch (...) {
  }
  c.fail("cannot parse value: '" + tok + "'");
}

TomlValue parse_scalar_or_array(Cursor& c) {
  if (c.peek() != '[') return parse_scalar(c);
  c.get();  // '['
  TomlValue arr;
  arr.kind = TomlValue::Kind::Array;
  c.skip_ws_inline();
  if (!c.eof() && c.peek() == ']') {
    c.get();
    return arr;
  }
  while (true) {
    c.skip_ws_inline();
    if (c.eof() || c.peek() == '\n') c.fail("arrays must be single-line");
    arr.array.push_back(parse_scalar(c));
    c.skip_ws_inline();
    if (c.eof()) c.fail("unterminated array");
    char t = c.get();
    if (t == ']') break;
    if (t != ',') c.fail("expected ',' or ']' in array");
  }
  return arr;
}

void finish_line(Cursor& c) {
  c.skip_ws_inline();
  if (!c.eof() && c.peek() == '\r') c.get();
  if (!c.eof() && c.peek() == '#') {
    while (!c.eof() && c.peek() != '\n') c.get();
  }
  if (!c.eof()) {
    if (c.peek() != '\n') c.fail("trailing characters on line");
    c.get();
    ++c.line;
  }
}

TomlValue* descend(TomlValue& root, const std::vector<std::string>& keys, Cursor& c) {
  TomlValue* cur = &root;
  for (const auto& k : keys) {
    auto it = cur->table.find(k);
    if (it == cur->table.end()) {
      TomlValue t;
      t.kind = TomlValue::Kind::Table;
      it = cur->table.emplace(k, std::move(t)).first;
    } else if (it->second.kind != TomlValue::Kind::Table) {
      c.fail("key '" + k + "' is not a table");
    }
    cur = &it->second;
  }
  return cur;
}

}  // namespace

TomlValue toml_parse(const std::string& text, const std::string& origin) {
  TomlValue root;
  root.kind = TomlValue::Kind::Table;
  Cursor c{text, 0, 1, origin};
  TomlValue* section = &root;

  while (!c.eof()) {
    c.skip_ws_inline();
    if (c.eof()) break;
    char ch = c.peek();
    if (ch == '\n' || ch == '\r' || ch == '#') {
      finish_line(c);
      continue;
    }
    if (ch == '[') {
      c.get();
      std::vector<std::string> keys;
      while (true) {
        c.skip_ws_inline();
        keys.push_back(parse_bare_key(c));
        c.skip_ws_inline();
        if (c.eof()) c.fail("unterminated section header");
        char t = c.get();
        if (t == ']') break;
        if (t != '.') c.fail("expected '.' or ']' in section header");
      }
      section = descend(root, keys, c);
      finish_line(c);
      continue;
    }
    std::string key = parse_bare_key(c);
    c.skip_ws_inline();
    if (c.eof() || c.get() != '=') c.fail("expected '=' after key '" + key + "'");
    c.skip_ws_inline();
    if (c.eof()) c.fail("missing value for key '" + key + "'");
    TomlValue v = parse_scalar_or_array(c);
    if (section->table.count(key)) c.fail("duplicate key '" + key + "'");
    section->table.emplace(key, std::move(v));
    finish_line(c);
  }
  return root;
}

TomlValue toml_parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return toml_parse(ss.str(), path);
}

const TomlValue* TomlValue::find(const std::string& key) const {
  auto it = table.find(key);
  return it == table.end() ? nullptr : &it->second;
}

int64_t TomlValue::as_int(const std::string& path) const {
  if (kind != Kind::Int) throw ConfigError(path + ": expected integer");
  return ival;
}

double TomlValue::as_float(const std::string& path) const {
  if (kind == Kind::Int) return static_cast<double>(ival);
  if (kind != Kind::Float) throw ConfigError(path + ": expected number");
  return fval;
}

const std::string& TomlValue::as_str(const std::string& path) const {
  if (kind != Kind::String) throw ConfigError(path + ": expected string");
  return str;
}

bool TomlValue::as_bool(const std::string& path) const {
  if (kind != Kind::Bool) throw ConfigError(path + ": expected bool");
  return bval;
}

std::vector<double> TomlValue::as_float_array(const std::string& path) const {
  if (kind != Kind::Array) throw ConfigError(path + ": expected array");
  std::vector<double> out;
  for (size_t i = 0; i < array.size(); ++i)
    out.push_back(array[i].as_float(path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int64_t> TomlValue::as_int_array(const std::string& path) const {
  if (kind != Kind::Array) throw ConfigError(path + ": expected array");
  std::vector<int64_t> out;
  for (size_t i = 0; i < array.size(); ++i)
    out.push_back(array[i].as_int(path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::string> TomlValue::as_str_array(const std::string& path) const {
  if (kind != Kind::Array) throw ConfigError(path + ": expected array");
  std::vector<std::string> out;
  for (size_t i = 0; i < array.size(); ++i)
    out.push_back(array[i].as_str(path + "[" + std::to_string(i) + "]"));
  return out;
}

const TomlValue& TomlValue::require(const std::string& key, const std::string& path) const {
  const TomlValue* v = find(key);
  if (!v) throw ConfigError(path + ": missing required key '" + key + "'");
  return *v;
}

int64_t TomlValue::get_int(const std::string& key, int64_t fallback) const {
  const TomlValue* v = find(key);
  return v ? v->as_int(key) : fallback;
}

double TomlValue::get_float(const std::string& key, double fallback) const {
  const TomlValue* v = find(key);
  return v ? v->as_float(key) : fallback;
}

std::string TomlValue::get_str(const std::string& key, const std::string& fallback) const {
  const TomlValue* v = find(key);
  return v ? v->as_str(key) : fallback;
}

bool TomlValue::get_bool(const std::string& key, bool fallback) const {
  const TomlValue* v = find(key);
  return v ? v->as_bool(key) : fallback;
}

void toml_reject_unknown(const TomlValue& root, const std::set<std::string>& allowed,
                         const std::string& prefix) {
  for (const auto& [k, v] : root.table) {
    std::string path = prefix.empty() ? k : prefix + "." + k;
    if (v.kind == TomlValue::Kind::Table) {
      bool extends = false;
      for (const auto& a : allowed) {
        if (a == path || (a.size() > path.size() && a.compare(0, path.size(), path) == 0 &&
                          a[path.size()] == '.')) {
          extends = true;
          break;
        }
      }
      if (!extends) throw ConfigError("unknown config section: " + path);
      toml_reject_unknown(v, allowed, path);
    } else {
      if (!allowed.count(path)) throw ConfigError("unknown config key: " + path);
    }
  }
}

}  // namespace ghnforge
