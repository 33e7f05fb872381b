#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cli {

// Flat TOML subset: [table] headers, key = value with numbers, booleans, "strings" and [arrays] of those.
// Keys are stored as "table.key".
struct Value {
  enum class Kind { Number, Bool, String, Array } kind = Kind::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<Value> items;
  int line = 0;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config");
  static Config load(const std::string& path);

  // "table.key=value"; the value uses the same syntax as the file.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) const;

  // Every key must belong to the known set; reports the first unknown key with its line.
  void check_keys(const std::vector<std::string>& known) const;

  const std::string& raw() const { return raw_; }

 private:
  const Value* find(const std::string& key) const;
  [[noreturn]] void type_error(const std::string& key, const char* expected) const;

  std::map<std::string, Value> values_;
  std::string origin_;
  std::string raw_;
};

}  // namespace cli
