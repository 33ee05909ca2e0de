#pragma once

#include <map>
#include <string>
#include <vector>

#include "sfd/presets.hpp"

namespace sfd {

/// One parsed configuration value.  The document format is flat UTF-8
/// `key = value` lines: values are double-quoted strings, numbers, or the
/// bare literals true/false, and `#` starts a comment outside quotes.
struct ConfigValue {
  enum class Kind { string, number, boolean };
  Kind kind = Kind::number;
  std::string str;
  Real num = 0.0;
  bool flag = false;
  int line = 0;  ///< 1-based source line, kept for error reporting
};

using ConfigDoc = std::map<std::string, ConfigValue>;

/// Parses a configuration document.  Malformed lines, duplicate keys, and
/// non-finite numbers throw ConfigError carrying the offending line.
ConfigDoc parse_config_text(const std::string& text);

/// Keys the command layer consumes directly (mirrors the global CLI flags).
struct RunOptions {
  std::string out;                 ///< output directory; empty means the CLI default
  int jobs = 0;                    ///< worker threads; 0 picks the logical core count
  int order = 0;                   ///< reduced-model truncation order, 0 or 1
  std::uint64_t seed = 42;         ///< sampler seed
  bool force = false;              ///< proceed past failed verification
};

/// A fully resolved run request: which preset to load, the parameter
/// overrides to apply, the generic options, and any command-specific keys
/// that were pulled aside before the remainder became overrides.
struct RunSpec {
  PresetId id = PresetId::linear_coupled;
  std::string mode;
  std::map<std::string, Real> overrides;
  RunOptions options;
  ConfigDoc extras;

  Real extra_number(const std::string& key, Real fallback) const;
  std::string extra_string(const std::string& key, const std::string& fallback) const;
};

/// Splits a parsed document into a RunSpec.  `command_keys` names the
/// command-specific keys to collect into `extras`; every remaining key after
/// the generic options must be numeric and becomes a preset override (whose
/// name load_preset validates).  An absent `system` key selects
/// linear-coupled.
RunSpec resolve_run(const ConfigDoc& doc, const std::vector<std::string>& command_keys = {});

}  // namespace sfd
