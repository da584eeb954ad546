#include "edag/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

#include "edag/errors.hpp"

namespace edag {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One settable field: how to store a string into the config pair and how to
// print the current value back out for the manifest echo.
struct Field {
  std::function<void(ResolvedConfig&, const std::string&)> set;
  std::function<std::string(const ResolvedConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* kind) {
  throw ConfigError("config: key '" + key + "' expects " + kind + ", got '" +
                    value + "'");
}

int64_t to_int(const std::string& key, const std::string& value) {
  int64_t out = 0;
  const char* b = value.data();
  const char* e = b + value.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) bad_value(key, value, "an integer");
  return out;
}

uint64_t to_uint(const std::string& key, const std::string& value) {
  uint64_t out = 0;
  const char* b = value.data();
  const char* e = b + value.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) bad_value(key, value, "a non-negative integer");
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false/1/0)");
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto num = [&t](const std::string& key, auto pick) {
      t[key] = Field{
          [key, pick](ResolvedConfig& c, const std::string& v) {
            pick(c) = static_cast<std::remove_reference_t<decltype(pick(c))>>(
                to_int(key, v));
          },
          [pick](const ResolvedConfig& c) {
            return std::to_string(pick(const_cast<ResolvedConfig&>(c)));
          }};
    };
    auto real = [&t](const std::string& key, auto pick) {
      t[key] = Field{[key, pick](ResolvedConfig& c, const std::string& v) {
                       pick(c) = to_double(key, v);
                     },
                     [pick](const ResolvedConfig& c) {
                       return fmt(pick(const_cast<ResolvedConfig&>(c)));
                     }};
    };

    num("d_w", [](ResolvedConfig& c) -> int64_t& { return c.model.d_w; });
    num("n_s", [](ResolvedConfig& c) -> int& { return c.model.max_sentences; });
    num("n_w", [](ResolvedConfig& c) -> int& { return c.model.max_sentence_len; });
    num("layers", [](ResolvedConfig& c) -> int& { return c.model.num_layers; });
    num("ff_dim", [](ResolvedConfig& c) -> int64_t& { return c.model.ff_dim; });
    num("heads", [](ResolvedConfig& c) -> int& { return c.model.num_heads; });
    real("dropout", [](ResolvedConfig& c) -> double& { return c.model.dropout; });
    real("lambda_er", [](ResolvedConfig& c) -> double& { return c.model.lambda_er; });
    real("lambda_tr", [](ResolvedConfig& c) -> double& { return c.model.lambda_tr; });
    real("lambda_dag", [](ResolvedConfig& c) -> double& { return c.model.lambda_dag; });
    real("lambda_ks", [](ResolvedConfig& c) -> double& { return c.model.lambda_ks; });
    real("gamma", [](ResolvedConfig& c) -> double& { return c.model.gamma; });
    num("sched_start_epoch",
        [](ResolvedConfig& c) -> int& { return c.model.sched_start_epoch; });
    num("sched_end_epoch",
        [](ResolvedConfig& c) -> int& { return c.model.sched_end_epoch; });
    real("sched_start_prob",
         [](ResolvedConfig& c) -> double& { return c.model.sched_start_prob; });
    real("sched_end_prob",
         [](ResolvedConfig& c) -> double& { return c.model.sched_end_prob; });
    real("trigger_threshold",
         [](ResolvedConfig& c) -> double& { return c.model.trigger_threshold; });
    real("expand_threshold",
         [](ResolvedConfig& c) -> double& { return c.model.expand_threshold; });
    num("frontier_cap", [](ResolvedConfig& c) -> int& { return c.model.frontier_cap; });
    t["use_path_memory"] =
        Field{[](ResolvedConfig& c, const std::string& v) {
                c.model.use_path_memory = to_bool("use_path_memory", v);
              },
              [](const ResolvedConfig& c) {
                return c.model.use_path_memory ? "true" : "false";
              }};

    real("lr", [](ResolvedConfig& c) -> double& { return c.train.lr; });
    num("batch_size", [](ResolvedConfig& c) -> int& { return c.train.batch_size; });
    num("max_epochs", [](ResolvedConfig& c) -> int& { return c.train.max_epochs; });
    real("adam_beta1", [](ResolvedConfig& c) -> double& { return c.train.adam_beta1; });
    real("adam_beta2", [](ResolvedConfig& c) -> double& { return c.train.adam_beta2; });
    real("adam_eps", [](ResolvedConfig& c) -> double& { return c.train.adam_eps; });
    t["seed"] = Field{[](ResolvedConfig& c, const std::string& v) {
                        c.train.seed = to_uint("seed", v);
                      },
                      [](const ResolvedConfig& c) {
                        return std::to_string(c.train.seed);
                      }};
    num("validate_every",
        [](ResolvedConfig& c) -> int& { return c.train.validate_every; });
    real("clip_norm", [](ResolvedConfig& c) -> double& { return c.train.clip_norm; });
    return t;
  }();
  return table;
}

void apply(ResolvedConfig& cfg, const std::map<std::string, std::string>& values) {
  const auto& table = field_table();
  for (const auto& [key, value] : values) {
    auto it = table.find(key);
    if (it == table.end()) {
      int best = INT32_MAX;
      std::string suggestion;
      for (const auto& [known, field] : table) {
        const int d = levenshtein(key, known);
        if (d < best) {
          best = d;
          suggestion = known;
        }
      }
      std::string msg = "config: unknown key '" + key + "'";
      if (best <= 3) msg += "; did you mean '" + suggestion + "'?";
      throw ConfigError(msg);
    }
    it->second.set(cfg, value);
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, field] : field_table()) k.push_back(key);
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value': '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key");
    if (value.empty())
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " has no value for key '" + key + "'");
    if (out.count(key))
      throw ConfigError("config: duplicate key '" + key + "' at line " +
                        std::to_string(lineno));
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_key_values(text.str());
}

ResolvedConfig resolve_config(const std::map<std::string, std::string>& file,
                              const std::map<std::string, std::string>& overrides,
                              const std::map<std::string, std::string>& env) {
  ResolvedConfig cfg;  // defaults
  apply(cfg, env);
  apply(cfg, file);
  apply(cfg, overrides);
  cfg.model.validate();
  cfg.train.validate();
  for (const auto& [key, field] : field_table()) cfg.raw[key] = field.get(cfg);
  return cfg;
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = int(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace edag
