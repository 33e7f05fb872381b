#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace cli {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

struct Reader {
  const std::string& s;
  size_t pos = 0;
  std::string where;

  [[noreturn]] void error(const std::string& what) const { throw ConfigError(where + ": " + what); }

  void skip() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }

  Value value() {
    skip();
    if (pos >= s.size()) error("missing value");
    Value v;
    char c = s[pos];
    if (c == '"') {
      size_t end = s.find('"', pos + 1);
      if (end == std::string::npos) error("unterminated string");
      v.kind = Value::Kind::String;
      v.text = s.substr(pos + 1, end - pos - 1);
      pos = end + 1;
    } else if (c == '[') {
      ++pos;
      v.kind = Value::Kind::Array;
      skip();
      if (pos < s.size() && s[pos] == ']') {
        ++pos;
        return v;
      }
      for (;;) {
        Value item = value();
        if (item.kind == Value::Kind::Array) error("nested arrays are not supported");
        v.items.push_back(item);
        skip();
        if (pos < s.size() && s[pos] == ',') {
          ++pos;
          continue;
        }
        if (pos < s.size() && s[pos] == ']') {
          ++pos;
          break;
        }
        error("expected ',' or ']' in array");
      }
    } else {
      size_t end = pos;
      while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != ' ' && s[end] != '\t') ++end;
      std::string tok = s.substr(pos, end - pos);
      pos = end;
      if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::Bool;
        v.boolean = tok == "true";
      } else if (tok == "inf" || tok == "+inf") {
        v.number = std::numeric_limits<double>::infinity();
      } else {
        const char* b = tok.data();
        const char* e = tok.data() + tok.size();
        if (!tok.empty() && *b == '+') ++b;
        auto [p, ec] = std::from_chars(b, e, v.number);
        if (ec != std::errc() || p != e) error("cannot parse value '" + tok + "'");
      }
    }
    return v;
  }
};

Value parse_value(const std::string& text, const std::string& where) {
  Reader r{text, 0, where};
  Value v = r.value();
  r.skip();
  if (r.pos != text.size()) r.error("trailing characters after value");
  return v;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  c.raw_ = text;
  std::istringstream in(text);
  std::string line, table;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string where = origin + ":" + std::to_string(no);
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed table header");
      table = trim(s.substr(1, s.size() - 2));
      if (!valid_key(table)) throw ConfigError(where + ": invalid table name '" + table + "'");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    std::string full = table.empty() ? key : table + "." + key;
    if (c.values_.count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
    Value v = parse_value(trim(s.substr(eq + 1)), where + " (" + full + ")");
    v.line = no;
    c.values_[full] = v;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

void Config::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "': expected table.key=value");
  std::string key = trim(assignment.substr(0, eq));
  size_t dot = key.find('.');
  if (dot == std::string::npos || !valid_key(key.substr(0, dot)) || !valid_key(key.substr(dot + 1)))
    throw ConfigError("override '" + assignment + "': key must look like table.key");
  values_[key] = parse_value(trim(assignment.substr(eq + 1)), "override " + key);
}

const Value* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void Config::type_error(const std::string& key, const char* expected) const {
  const Value* v = find(key);
  std::string where = v && v->line ? origin_ + ":" + std::to_string(v->line) : "override";
  throw ConfigError(where + ": key '" + key + "' must be " + expected);
}

double Config::number(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::Number) type_error(key, "a number");
  return v->number;
}

int Config::integer(const std::string& key, int fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::Number || v->number != static_cast<int>(v->number)) type_error(key, "an integer");
  return static_cast<int>(v->number);
}

bool Config::boolean(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::Bool) type_error(key, "true or false");
  return v->boolean;
}

std::string Config::string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind != Value::Kind::String) type_error(key, "a quoted string");
  return v->text;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind == Value::Kind::Number) return {v->number};
  if (v->kind != Value::Kind::Array) type_error(key, "an array of numbers");
  std::vector<double> out;
  for (const auto& it : v->items) {
    if (it.kind != Value::Kind::Number) type_error(key, "an array of numbers");
    out.push_back(it.number);
  }
  return out;
}

std::vector<std::string> Config::strings(const std::string& key, const std::vector<std::string>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->kind == Value::Kind::String) return {v->text};
  if (v->kind != Value::Kind::Array) type_error(key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& it : v->items) {
    if (it.kind != Value::Kind::String) type_error(key, "an array of strings");
    out.push_back(it.text);
  }
  return out;
}

void Config::check_keys(const std::vector<std::string>& known) const {
  for (const auto& [key, v] : values_) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    std::string where = v.line ? origin_ + ":" + std::to_string(v.line) : "override";
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace cli
