#include "sfd/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "sfd/errors.hpp"

namespace sfd {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(k[0])) && k[0] != '_') return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

/// Removes a trailing comment, honoring quotes so `#` can appear in strings.
std::string strip_comment(const std::string& s) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_quotes = !in_quotes;
    else if (s[i] == '#' && !in_quotes) return s.substr(0, i);
  }
  return s;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  ConfigValue v;
  v.line = line_no;
  if (raw.empty()) throw ConfigError("missing value", line_no);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw ConfigError("unterminated string", line_no);
    std::string body = raw.substr(1, raw.size() - 2);
    if (body.find('"') != std::string::npos)
      throw ConfigError("unexpected text after closing quote", line_no);
    v.kind = ConfigValue::Kind::string;
    v.str = body;
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.flag = raw == "true";
    return v;
  }
  const char* begin = raw.c_str();
  char* end = nullptr;
  double num = std::strtod(begin, &end);
  if (end != begin + raw.size())
    throw ConfigError("expected a number, quoted string, or true/false, got '" + raw + "'",
                      line_no);
  if (!std::isfinite(num)) throw ConfigError("number is not finite", line_no);
  v.kind = ConfigValue::Kind::number;
  v.num = num;
  return v;
}

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::string: return "a quoted string";
    case ConfigValue::Kind::boolean: return "a boolean";
    default: return "a number";
  }
}

Real want_number(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::number)
    throw ConfigError("key '" + key + "' must be a number, got " + kind_name(v.kind), v.line);
  return v.num;
}

std::string want_string(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::string)
    throw ConfigError("key '" + key + "' must be a quoted string, got " + kind_name(v.kind),
                      v.line);
  return v.str;
}

long long want_integer(const ConfigValue& v, const std::string& key) {
  Real num = want_number(v, key);
  if (num != std::floor(num) || std::abs(num) > 9.007199254740992e15)
    throw ConfigError("key '" + key + "' must be an integer", v.line);
  return static_cast<long long>(num);
}

}  // namespace

ConfigDoc parse_config_text(const std::string& text) {
  ConfigDoc doc;
  std::size_t pos = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
    std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'", line_no);
    if (doc.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
    doc[key] = parse_value(trim(line.substr(eq + 1)), line_no);
  }
  return doc;
}

Real RunSpec::extra_number(const std::string& key, Real fallback) const {
  auto it = extras.find(key);
  return it == extras.end() ? fallback : want_number(it->second, key);
}

std::string RunSpec::extra_string(const std::string& key, const std::string& fallback) const {
  auto it = extras.find(key);
  return it == extras.end() ? fallback : want_string(it->second, key);
}

RunSpec resolve_run(const ConfigDoc& doc, const std::vector<std::string>& command_keys) {
  RunSpec spec;
  ConfigDoc rest = doc;

  if (auto it = rest.find("system"); it != rest.end()) {
    spec.id = preset_from_string(want_string(it->second, "system"));
    rest.erase(it);
  }
  if (auto it = rest.find("mode"); it != rest.end()) {
    spec.mode = want_string(it->second, "mode");
    rest.erase(it);
  }
  if (auto it = rest.find("out"); it != rest.end()) {
    spec.options.out = want_string(it->second, "out");
    rest.erase(it);
  }
  if (auto it = rest.find("jobs"); it != rest.end()) {
    long long jobs = want_integer(it->second, "jobs");
    if (jobs < 0) throw ConfigError("key 'jobs' must be >= 0", it->second.line);
    spec.options.jobs = static_cast<int>(jobs);
    rest.erase(it);
  }
  if (auto it = rest.find("order"); it != rest.end()) {
    long long order = want_integer(it->second, "order");
    if (order != 0 && order != 1) throw ConfigError("key 'order' must be 0 or 1", it->second.line);
    spec.options.order = static_cast<int>(order);
    rest.erase(it);
  }
  if (auto it = rest.find("seed"); it != rest.end()) {
    long long seed = want_integer(it->second, "seed");
    if (seed < 0) throw ConfigError("key 'seed' must be >= 0", it->second.line);
    spec.options.seed = static_cast<std::uint64_t>(seed);
    rest.erase(it);
  }
  if (auto it = rest.find("force"); it != rest.end()) {
    const ConfigValue& v = it->second;
    if (v.kind != ConfigValue::Kind::boolean)
      throw ConfigError("key 'force' must be true or false", v.line);
    spec.options.force = v.flag;
    rest.erase(it);
  }

  for (const std::string& key : command_keys) {
    if (auto it = rest.find(key); it != rest.end()) {
      spec.extras[key] = it->second;
      rest.erase(it);
    }
  }

  for (const auto& [key, value] : rest)
    spec.overrides[key] = want_number(value, key);
  return spec;
}

}  // namespace sfd
