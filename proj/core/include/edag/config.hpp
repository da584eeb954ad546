#pragma once

#include <map>
#include <string>
#include <vector>

#include "edag/model.hpp"
#include "edag/training.hpp"

namespace edag {

// Model + optimizer settings resolved from layered sources, plus a flat
// string echo of every key for run manifests.
struct ResolvedConfig {
  ModelConfig model;
  TrainConfig train;
  std::map<std::string, std::string> raw;  // key -> final value, all keys
};

// The accepted configuration keys (sorted), one per tunable field.
const std::vector<std::string>& config_keys();

// Parses "key = value" lines: '#' starts a comment, blank lines are skipped,
// keys may not repeat. Unknown keys are NOT checked here (resolve_config
// does that) so the parser stays reusable. Throws ConfigError naming the
// offending line on malformed input.
std::map<std::string, std::string> parse_key_values(const std::string& text);

// parse_key_values over a file's contents; IoError when unreadable.
std::map<std::string, std::string> read_config_file(const std::string& path);

// Layered resolution, weakest first: built-in defaults, then `env` (e.g. an
// EDAG_SEED fallback), then `file`, then `overrides` (command-line flags).
// Unknown keys are rejected with a nearest-key suggestion; values must parse
// as the field's type; the combined result must validate.
ResolvedConfig resolve_config(const std::map<std::string, std::string>& file,
                              const std::map<std::string, std::string>& overrides,
                              const std::map<std::string, std::string>& env = {});

// Edit distance used for the unknown-key suggestions; exposed for testing.
int levenshtein(const std::string& a, const std::string& b);

}  // namespace edag
