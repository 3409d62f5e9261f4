#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ghnforge {

// Minimal TOML reader covering what experiment configs use: [a.b] tables,
// bare keys, strings, ints, floats, bools and single-line arrays of scalars.
// Anything else is a ConfigError with a line number.
class TomlValue {
 public:
  enum class Kind { Table, Array, String, Int, Float, Bool };

  Kind kind = Kind::Table;
  std::map<std::string, TomlValue> table;  // ordered: deterministic iteration
  std::vector<TomlValue> array;
  std::string str;
  int64_t ival = 0;
  double fval = 0.0;
  bool bval = false;

  bool is_table() const { return kind == Kind::Table; }

  const TomlValue* find(const std::string& key) const;

  // Typed getters; `path` only feeds error messages.
  int64_t as_int(const std::string& path) const;
  double as_float(const std::string& path) const;  // ints promote
  const std::string& as_str(const std::string& path) const;
  bool as_bool(const std::string& path) const;
  std::vector<double> as_float_array(const std::string& path) const;
  std::vector<int64_t> as_int_array(const std::string& path) const;
  std::vector<std::string> as_str_array(const std::string& path) const;

  // Required lookup helpers on tables.
  const TomlValue& require(const std::string& key, const std::string& path) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_float(const std::string& key, double fallback) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

TomlValue toml_parse(const std::string& text, const std::string& origin = "<string>");
TomlValue toml_parse_file(const std::string& path);

// Typo safety: every key path in `root` must be listed in `allowed` (dotted
// leaf paths; a table is implicitly allowed when any allowed path extends
// it). Throws ConfigError naming the offending path.
void toml_reject_unknown(const TomlValue& root, const std::set<std::string>& allowed,
                         const std::string& prefix = "");

}  // namespace ghnforge
